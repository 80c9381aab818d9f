#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrlab/image.hpp"

namespace lrlab {

struct ModelConfig {
    int scene_h = 64;
    int scene_w = 64;
    int patch = 8;       // patch side in pixels
    int width = 32;      // patch/token feature width
    int hidden = 128;    // per-position mlp hidden width
    int embed_dim = 64;  // shared embedding dimension
    int max_len = 12;    // caption length in tokens

    int n_patches() const { return (scene_h / patch) * (scene_w / patch); }
    int patch_dim() const { return patch * patch * 3; }
    void validate() const;
};

struct TensorInfo {
    std::string name;
    std::vector<int> shape;
    size_t offset = 0;
    size_t size = 0;
};

// All learnable weights of both towers plus the temperature, stored as one
// flat vector so updates, finite differences and checkpoints can treat
// parameters uniformly. Layout:
//
//   image tower: patch linear map -> +positional embedding ->
//                tanh mlp (per patch) -> mean pool -> projection -> L2 norm
//   text tower:  token embedding  -> +positional embedding ->
//                tanh mlp (per position) -> mean pool -> projection -> L2 norm
//
// The positional embedding is added before the per-position nonlinearity;
// with pooling directly after the additive step, position information would
// cancel to a constant and left/right would be unlearnable.
class ParamPack {
  public:
    ParamPack(const ModelConfig& cfg, int vocab_size);

    static ParamPack init(const ModelConfig& cfg, int vocab_size, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    int vocab_size() const { return vocab_size_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }
    const std::vector<TensorInfo>& tensors() const { return tensors_; }
    const TensorInfo& tensor_at(size_t flat_index) const;  // tensor containing a flat offset

    // image tower
    const double* img_patch_w() const { return at(o_img_patch_w_); }
    const double* img_patch_b() const { return at(o_img_patch_b_); }
    const double* img_pos() const { return at(o_img_pos_); }
    const double* img_w1() const { return at(o_img_w1_); }
    const double* img_b1() const { return at(o_img_b1_); }
    const double* img_w2() const { return at(o_img_w2_); }
    const double* img_b2() const { return at(o_img_b2_); }
    const double* img_proj() const { return at(o_img_proj_); }
    // text tower
    const double* txt_embed() const { return at(o_txt_embed_); }
    const double* txt_pos() const { return at(o_txt_pos_); }
    const double* txt_w1() const { return at(o_txt_w1_); }
    const double* txt_b1() const { return at(o_txt_b1_); }
    const double* txt_w2() const { return at(o_txt_w2_); }
    const double* txt_b2() const { return at(o_txt_b2_); }
    const double* txt_proj() const { return at(o_txt_proj_); }

    double log_temperature() const { return data_[o_log_temp_]; }
    void set_log_temperature(double v) { data_[o_log_temp_] = v; }

    // offsets into the flat vector, for gradient buffers
    size_t off_img_patch_w() const { return o_img_patch_w_; }
    size_t off_img_patch_b() const { return o_img_patch_b_; }
    size_t off_img_pos() const { return o_img_pos_; }
    size_t off_img_w1() const { return o_img_w1_; }
    size_t off_img_b1() const { return o_img_b1_; }
    size_t off_img_w2() const { return o_img_w2_; }
    size_t off_img_b2() const { return o_img_b2_; }
    size_t off_img_proj() const { return o_img_proj_; }
    size_t off_txt_embed() const { return o_txt_embed_; }
    size_t off_txt_pos() const { return o_txt_pos_; }
    size_t off_txt_w1() const { return o_txt_w1_; }
    size_t off_txt_b1() const { return o_txt_b1_; }
    size_t off_txt_w2() const { return o_txt_w2_; }
    size_t off_txt_b2() const { return o_txt_b2_; }
    size_t off_txt_proj() const { return o_txt_proj_; }
    size_t off_log_temp() const { return o_log_temp_; }

  private:
    const double* at(size_t off) const { return data_.data() + off; }
    size_t add_tensor(const std::string& name, std::vector<int> shape);

    ModelConfig cfg_;
    int vocab_size_ = 0;
    std::vector<double> data_;
    std::vector<TensorInfo> tensors_;
    size_t o_img_patch_w_ = 0, o_img_patch_b_ = 0, o_img_pos_ = 0, o_img_w1_ = 0, o_img_b1_ = 0, o_img_w2_ = 0,
           o_img_b2_ = 0, o_img_proj_ = 0;
    size_t o_txt_embed_ = 0, o_txt_pos_ = 0, o_txt_w1_ = 0, o_txt_b1_ = 0, o_txt_w2_ = 0, o_txt_b2_ = 0,
           o_txt_proj_ = 0;
    size_t o_log_temp_ = 0;
};

std::vector<double> encode_image(const ParamPack& params, const ImageU8& image);  // unit norm, length embed_dim
std::vector<double> encode_text(const ParamPack& params, const std::vector<int>& token_ids);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct EncodeBatch {
    std::vector<const ImageU8*> images;
    std::vector<const std::vector<int>*> tokens;

    int size() const { return static_cast<int>(images.size()); }
};

// row-major n x embed_dim; the OpenMP kernels and their serial references
// are bitwise identical
std::vector<double> embed_images(const ParamPack& params, const std::vector<const ImageU8*>& images);
std::vector<double> embed_images_serial(const ParamPack& params, const std::vector<const ImageU8*>& images);
std::vector<double> embed_texts(const ParamPack& params, const std::vector<const std::vector<int>*>& tokens);
std::vector<double> embed_texts_serial(const ParamPack& params, const std::vector<const std::vector<int>*>& tokens);

// symmetric cross-entropy over the scaled cosine matrix; diagonal entries
// are the positives
double contrastive_loss(const std::vector<double>& image_emb, const std::vector<double>& text_emb, int n, int d,
                        double log_temperature);

struct LossGrads {
    double loss = 0.0;
    std::vector<double> grad;  // same layout as ParamPack::data()
};

LossGrads loss_and_gradients(const ParamPack& params, const EncodeBatch& batch, double loss_scale = 1.0);
LossGrads loss_and_gradients_serial(const ParamPack& params, const EncodeBatch& batch, double loss_scale = 1.0);

double batch_loss(const ParamPack& params, const EncodeBatch& batch);  // forward only

}  // namespace lrlab
