#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lrlab {

// 8-bit RGB, row-major, channel-interleaved. The storage format for
// everything loaded from or written to disk.
struct ImageU8 {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> rgb;  // h * w * 3

    uint8_t at(int y, int x, int c) const { return rgb[static_cast<size_t>((y * w + x) * 3 + c)]; }
    uint8_t& at(int y, int x, int c) { return rgb[static_cast<size_t>((y * w + x) * 3 + c)]; }
};

// Real-valued RGB in [0,1]; the compositor's working format.
struct ImageF {
    int h = 0;
    int w = 0;
    std::vector<double> rgb;

    ImageF() = default;
    ImageF(int h_, int w_) : h(h_), w(w_), rgb(static_cast<size_t>(h_) * w_ * 3, 0.0) {}

    double at(int y, int x, int c) const { return rgb[static_cast<size_t>((y * w + x) * 3 + c)]; }
    double& at(int y, int x, int c) { return rgb[static_cast<size_t>((y * w + x) * 3 + c)]; }
};

ImageU8 quantize(const ImageF& img);  // round(v * 255), clamped

ImageF mirror_horizontal(const ImageF& img);

double mean_abs_diff(const ImageU8& a, const ImageU8& b);

void write_png_rgb8(const std::string& path, const ImageU8& img);
ImageU8 read_png_rgb8(const std::string& path);

}  // namespace lrlab
