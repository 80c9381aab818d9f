#include "lrlab/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>

#include "lrlab/util.hpp"

namespace lrlab {

ImageU8 quantize(const ImageF& img) {
    ImageU8 out;
    out.h = img.h;
    out.w = img.w;
    out.rgb.resize(img.rgb.size());
    for (size_t i = 0; i < img.rgb.size(); ++i) {
        double v = std::round(img.rgb[i] * 255.0);
        if (v < 0.0) v = 0.0;
        if (v > 255.0) v = 255.0;
        out.rgb[i] = static_cast<uint8_t>(v);
    }
    return out;
}

ImageF mirror_horizontal(const ImageF& img) {
    ImageF out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
    return out;
}

double mean_abs_diff(const ImageU8& a, const ImageU8& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("mean_abs_diff: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.rgb.size(); ++i) acc += std::abs(static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]));
    return acc / static_cast<double>(a.rgb.size());
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_png_rgb8(const std::string& path, const ImageU8& img) {
    if (img.h <= 0 || img.w <= 0 || img.rgb.size() != static_cast<size_t>(img.h) * img.w * 3)
        throw std::invalid_argument("write_png_rgb8: malformed image");

    // write-temp-then-rename so readers never see a partial file
    const std::string tmp = path + ".tmp";
    {
        FilePtr fp(std::fopen(tmp.c_str(), "wb"));
        if (!fp) throw std::runtime_error("write_png_rgb8: cannot open " + tmp);

        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) throw std::runtime_error("write_png_rgb8: png_create_write_struct failed");
        png_infop info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw std::runtime_error("write_png_rgb8: png_create_info_struct failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw std::runtime_error("write_png_rgb8: libpng error writing " + path);
        }
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < img.h; ++y)
            png_write_row(png, const_cast<png_bytep>(img.rgb.data() + static_cast<size_t>(y) * img.w * 3));
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    std::filesystem::rename(tmp, path);
}

ImageU8 read_png_rgb8(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_png_rgb8: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("read_png_rgb8: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("read_png_rgb8: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png_rgb8: libpng error reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // normalize any valid PNG to 8-bit RGB
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY || png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    ImageU8 img;
    img.w = static_cast<int>(png_get_image_width(png, info));
    img.h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<size_t>(img.w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png_rgb8: unexpected row size in " + path);
    }
    img.rgb.resize(static_cast<size_t>(img.h) * img.w * 3);
    for (int y = 0; y < img.h; ++y) png_read_row(png, img.rgb.data() + static_cast<size_t>(y) * img.w * 3, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace lrlab
