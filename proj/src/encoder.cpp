#include "lrlab/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

#include "lrlab/util.hpp"

namespace lrlab {

void ModelConfig::validate() const {
    if (scene_h < 1 || scene_w < 1) throw std::runtime_error("model config: scene size must be positive");
    if (patch < 1) throw std::runtime_error("model config: patch must be positive");
    if (scene_h % patch != 0 || scene_w % patch != 0)
        throw std::runtime_error("model config: scene size must be a multiple of patch size");
    if (width < 1 || hidden < 1 || embed_dim < 1) throw std::runtime_error("model config: widths must be positive");
    if (max_len < 1) throw std::runtime_error("model config: max_len must be positive");
}

size_t ParamPack::add_tensor(const std::string& name, std::vector<int> shape) {
    size_t size = 1;
    for (int s : shape) size *= static_cast<size_t>(s);
    TensorInfo info{name, std::move(shape), data_.size(), size};
    tensors_.push_back(info);
    data_.resize(data_.size() + size, 0.0);
    return info.offset;
}

ParamPack::ParamPack(const ModelConfig& cfg, int vocab_size) : cfg_(cfg), vocab_size_(vocab_size) {
    cfg_.validate();
    if (vocab_size < 2) throw std::invalid_argument("ParamPack: vocabulary must include PAD and UNK");
    const int np = cfg_.n_patches(), pd = cfg_.patch_dim(), w = cfg_.width, h = cfg_.hidden, d = cfg_.embed_dim,
              L = cfg_.max_len;
    o_img_patch_w_ = add_tensor("img_patch_w", {w, pd});
    o_img_patch_b_ = add_tensor("img_patch_b", {w});
    o_img_pos_ = add_tensor("img_pos", {np, w});
    o_img_w1_ = add_tensor("img_mlp_w1", {h, w});
    o_img_b1_ = add_tensor("img_mlp_b1", {h});
    o_img_w2_ = add_tensor("img_mlp_w2", {w, h});
    o_img_b2_ = add_tensor("img_mlp_b2", {w});
    o_img_proj_ = add_tensor("img_proj", {d, w});
    o_txt_embed_ = add_tensor("txt_embed", {vocab_size, w});
    o_txt_pos_ = add_tensor("txt_pos", {L, w});
    o_txt_w1_ = add_tensor("txt_mlp_w1", {h, w});
    o_txt_b1_ = add_tensor("txt_mlp_b1", {h});
    o_txt_w2_ = add_tensor("txt_mlp_w2", {w, h});
    o_txt_b2_ = add_tensor("txt_mlp_b2", {w});
    o_txt_proj_ = add_tensor("txt_proj", {d, w});
    o_log_temp_ = add_tensor("log_temperature", {1});
}

ParamPack ParamPack::init(const ModelConfig& cfg, int vocab_size, uint64_t seed) {
    ParamPack p(cfg, vocab_size);
    Rng rng(mix64(seed, 0x70617261));
    for (const auto& t : p.tensors_) {
        if (t.name == "log_temperature") continue;
        // biases start at zero; everything else uniform / sqrt(fan_in)
        if (t.shape.size() == 1) continue;
        const int fan_in = t.shape.back();
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (size_t i = 0; i < t.size; ++i) p.data_[t.offset + i] = (2.0 * rng.uniform() - 1.0) * scale;
    }
    p.set_log_temperature(std::log(1.0 / 0.07));
    return p;
}

const TensorInfo& ParamPack::tensor_at(size_t flat_index) const {
    for (const auto& t : tensors_)
        if (flat_index >= t.offset && flat_index < t.offset + t.size) return t;
    throw std::out_of_range("ParamPack::tensor_at: index beyond parameter vector");
}

namespace {

struct TowerTrace {
    std::vector<double> v;    // positions x width, post positional add
    std::vector<double> h1;   // positions x hidden, post tanh
    std::vector<double> m;    // width, pooled
    std::vector<double> raw;  // embed_dim, pre-normalization
    std::vector<double> e;    // embed_dim, unit
    double inv_norm = 0.0;
};

void normalize_embed(TowerTrace& tr, int d) {
    double sq = 0.0;
    for (int k = 0; k < d; ++k) sq += tr.raw[static_cast<size_t>(k)] * tr.raw[static_cast<size_t>(k)];
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm) || norm == 0.0) throw std::runtime_error("encode: non-finite or zero-norm embedding");
    tr.inv_norm = 1.0 / norm;
    tr.e.resize(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) tr.e[static_cast<size_t>(k)] = tr.raw[static_cast<size_t>(k)] * tr.inv_norm;
}

void extract_patch(const ImageU8& img, int patch, int pi, double* x) {
    const int cols = img.w / patch;
    const int py = (pi / cols) * patch, px = (pi % cols) * patch;
    int q = 0;
    for (int dy = 0; dy < patch; ++dy)
        for (int dx = 0; dx < patch; ++dx)
            for (int c = 0; c < 3; ++c) x[q++] = img.at(py + dy, px + dx, c) / 255.0;
}

// shared per-position block of both towers: v -> tanh(W1 v + b1) -> W2 h1 + b2
void mlp_forward(const double* w1, const double* b1, const double* w2, const double* b2, int width, int hidden,
                 const double* v, double* h1, double* z) {
    for (int l = 0; l < hidden; ++l) {
        double acc = b1[l];
        const double* row = w1 + static_cast<size_t>(l) * width;
        for (int j = 0; j < width; ++j) acc += row[j] * v[j];
        h1[l] = std::tanh(acc);
    }
    for (int k = 0; k < width; ++k) {
        double acc = b2[k];
        const double* row = w2 + static_cast<size_t>(k) * hidden;
        for (int l = 0; l < hidden; ++l) acc += row[l] * h1[l];
        z[k] = acc;
    }
}

void image_forward(const ParamPack& p, const ImageU8& img, TowerTrace& tr) {
    const ModelConfig& c = p.config();
    if (img.h != c.scene_h || img.w != c.scene_w)
        throw std::runtime_error("encode_image: image is " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                                 ", model expects " + std::to_string(c.scene_h) + "x" + std::to_string(c.scene_w));
    const int np = c.n_patches(), pd = c.patch_dim(), w = c.width, h = c.hidden, d = c.embed_dim;

    tr.v.assign(static_cast<size_t>(np) * w, 0.0);
    tr.h1.assign(static_cast<size_t>(np) * h, 0.0);
    tr.m.assign(static_cast<size_t>(w), 0.0);
    tr.raw.assign(static_cast<size_t>(d), 0.0);

    std::vector<double> x(static_cast<size_t>(pd));
    std::vector<double> z(static_cast<size_t>(w));
    for (int pi = 0; pi < np; ++pi) {
        extract_patch(img, c.patch, pi, x.data());
        double* v = tr.v.data() + static_cast<size_t>(pi) * w;
        const double* pos = p.img_pos() + static_cast<size_t>(pi) * w;
        for (int j = 0; j < w; ++j) {
            double acc = p.img_patch_b()[j];
            const double* row = p.img_patch_w() + static_cast<size_t>(j) * pd;
            for (int q = 0; q < pd; ++q) acc += row[q] * x[static_cast<size_t>(q)];
            v[j] = acc + pos[j];
        }
        mlp_forward(p.img_w1(), p.img_b1(), p.img_w2(), p.img_b2(), w, h, v,
                    tr.h1.data() + static_cast<size_t>(pi) * h, z.data());
        for (int k = 0; k < w; ++k) tr.m[static_cast<size_t>(k)] += z[static_cast<size_t>(k)] / np;
    }
    for (int k = 0; k < d; ++k) {
        double acc = 0.0;
        const double* row = p.img_proj() + static_cast<size_t>(k) * w;
        for (int j = 0; j < w; ++j) acc += row[j] * tr.m[static_cast<size_t>(j)];
        tr.raw[static_cast<size_t>(k)] = acc;
    }
    normalize_embed(tr, d);
}

void text_forward(const ParamPack& p, const std::vector<int>& ids, TowerTrace& tr) {
    const ModelConfig& c = p.config();
    if (static_cast<int>(ids.size()) != c.max_len)
        throw std::runtime_error("encode_text: expected " + std::to_string(c.max_len) + " token ids, got " +
                                 std::to_string(ids.size()));
    const int L = c.max_len, w = c.width, h = c.hidden, d = c.embed_dim;
    for (int i = 0; i < L; ++i)
        if (ids[static_cast<size_t>(i)] < 0 || ids[static_cast<size_t>(i)] >= p.vocab_size())
            throw std::runtime_error("encode_text: token id " + std::to_string(ids[static_cast<size_t>(i)]) +
                                     " out of range [0, " + std::to_string(p.vocab_size()) + ")");

    tr.v.assign(static_cast<size_t>(L) * w, 0.0);
    tr.h1.assign(static_cast<size_t>(L) * h, 0.0);
    tr.m.assign(static_cast<size_t>(w), 0.0);
    tr.raw.assign(static_cast<size_t>(d), 0.0);

    std::vector<double> z(static_cast<size_t>(w));
    for (int i = 0; i < L; ++i) {
        double* v = tr.v.data() + static_cast<size_t>(i) * w;
        const double* emb = p.txt_embed() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * w;
        const double* pos = p.txt_pos() + static_cast<size_t>(i) * w;
        for (int j = 0; j < w; ++j) v[j] = emb[j] + pos[j];
        mlp_forward(p.txt_w1(), p.txt_b1(), p.txt_w2(), p.txt_b2(), w, h, v,
                    tr.h1.data() + static_cast<size_t>(i) * h, z.data());
        for (int k = 0; k < w; ++k) tr.m[static_cast<size_t>(k)] += z[static_cast<size_t>(k)] / L;
    }
    for (int k = 0; k < d; ++k) {
        double acc = 0.0;
        const double* row = p.txt_proj() + static_cast<size_t>(k) * w;
        for (int j = 0; j < w; ++j) acc += row[j] * tr.m[static_cast<size_t>(j)];
        tr.raw[static_cast<size_t>(k)] = acc;
    }
    normalize_embed(tr, d);
}

// dL/d(unit embedding) -> dL/d(raw embedding)
void normalize_backward(const TowerTrace& tr, const double* de, int d, double* dr) {
    double dot = 0.0;
    for (int k = 0; k < d; ++k) dot += de[k] * tr.e[static_cast<size_t>(k)];
    for (int k = 0; k < d; ++k) dr[k] = tr.inv_norm * (de[k] - tr.e[static_cast<size_t>(k)] * dot);
}

// common mlp/pool/projection backward; dv_out gets dL/dv per position
void head_backward(const double* proj, const double* w1, const double* w2, int positions, int width, int hidden,
                   int d, const TowerTrace& tr, const double* de, double* g_proj, double* g_w1, double* g_b1,
                   double* g_w2, double* g_b2, std::vector<double>& dv_out) {
    std::vector<double> dr(static_cast<size_t>(d));
    normalize_backward(tr, de, d, dr.data());

    std::vector<double> dm(static_cast<size_t>(width), 0.0);
    for (int k = 0; k < d; ++k) {
        const double* row = proj + static_cast<size_t>(k) * width;
        double* grow = g_proj + static_cast<size_t>(k) * width;
        const double drk = dr[static_cast<size_t>(k)];
        for (int j = 0; j < width; ++j) {
            grow[j] += drk * tr.m[static_cast<size_t>(j)];
            dm[static_cast<size_t>(j)] += row[j] * drk;
        }
    }

    // mean pool: every position sees the same dz
    std::vector<double> dz(static_cast<size_t>(width));
    for (int k = 0; k < width; ++k) dz[static_cast<size_t>(k)] = dm[static_cast<size_t>(k)] / positions;

    // dh1 before the tanh gate is also position-independent
    std::vector<double> dh1(static_cast<size_t>(hidden), 0.0);
    for (int k = 0; k < width; ++k) {
        const double* row = w2 + static_cast<size_t>(k) * hidden;
        const double dzk = dz[static_cast<size_t>(k)];
        for (int l = 0; l < hidden; ++l) dh1[static_cast<size_t>(l)] += row[l] * dzk;
    }
    for (int k = 0; k < width; ++k) g_b2[k] += dz[static_cast<size_t>(k)] * positions;

    dv_out.assign(static_cast<size_t>(positions) * width, 0.0);
    std::vector<double> da(static_cast<size_t>(hidden));
    for (int pi = 0; pi < positions; ++pi) {
        const double* h1 = tr.h1.data() + static_cast<size_t>(pi) * hidden;
        const double* v = tr.v.data() + static_cast<size_t>(pi) * width;
        double* dv = dv_out.data() + static_cast<size_t>(pi) * width;

        for (int k = 0; k < width; ++k) {
            double* grow = g_w2 + static_cast<size_t>(k) * hidden;
            const double dzk = dz[static_cast<size_t>(k)];
            for (int l = 0; l < hidden; ++l) grow[l] += dzk * h1[l];
        }
        for (int l = 0; l < hidden; ++l) da[static_cast<size_t>(l)] = dh1[static_cast<size_t>(l)] * (1.0 - h1[l] * h1[l]);
        for (int l = 0; l < hidden; ++l) {
            const double* row = w1 + static_cast<size_t>(l) * width;
            double* grow = g_w1 + static_cast<size_t>(l) * width;
            const double dal = da[static_cast<size_t>(l)];
            g_b1[l] += dal;
            for (int j = 0; j < width; ++j) {
                grow[j] += dal * v[j];
                dv[j] += row[j] * dal;
            }
        }
    }
}

void image_backward(const ParamPack& p, const ImageU8& img, const TowerTrace& tr, const double* de, double* g) {
    const ModelConfig& c = p.config();
    const int np = c.n_patches(), pd = c.patch_dim(), w = c.width;

    std::vector<double> dv;
    head_backward(p.img_proj(), p.img_w1(), p.img_w2(), np, w, c.hidden, c.embed_dim, tr, de,
                  g + p.off_img_proj(), g + p.off_img_w1(), g + p.off_img_b1(), g + p.off_img_w2(),
                  g + p.off_img_b2(), dv);

    std::vector<double> x(static_cast<size_t>(pd));
    double* g_pos = g + p.off_img_pos();
    double* g_pw = g + p.off_img_patch_w();
    double* g_pb = g + p.off_img_patch_b();
    for (int pi = 0; pi < np; ++pi) {
        const double* dvp = dv.data() + static_cast<size_t>(pi) * w;
        extract_patch(img, c.patch, pi, x.data());
        double* gp = g_pos + static_cast<size_t>(pi) * w;
        for (int j = 0; j < w; ++j) {
            gp[j] += dvp[j];
            g_pb[j] += dvp[j];
            double* grow = g_pw + static_cast<size_t>(j) * pd;
            const double duj = dvp[j];
            for (int q = 0; q < pd; ++q) grow[q] += duj * x[static_cast<size_t>(q)];
        }
    }
}

void text_backward(const ParamPack& p, const std::vector<int>& ids, const TowerTrace& tr, const double* de,
                   double* g) {
    const ModelConfig& c = p.config();
    const int L = c.max_len, w = c.width;

    std::vector<double> dv;
    head_backward(p.txt_proj(), p.txt_w1(), p.txt_w2(), L, w, c.hidden, c.embed_dim, tr, de, g + p.off_txt_proj(),
                  g + p.off_txt_w1(), g + p.off_txt_b1(), g + p.off_txt_w2(), g + p.off_txt_b2(), dv);

    double* g_pos = g + p.off_txt_pos();
    double* g_emb = g + p.off_txt_embed();
    for (int i = 0; i < L; ++i) {
        const double* dvp = dv.data() + static_cast<size_t>(i) * w;
        double* gp = g_pos + static_cast<size_t>(i) * w;
        double* ge = g_emb + static_cast<size_t>(ids[static_cast<size_t>(i)]) * w;
        for (int j = 0; j < w; ++j) {
            gp[j] += dvp[j];
            ge[j] += dvp[j];
        }
    }
}

struct LossBack {
    double loss = 0.0;
    std::vector<double> d_img;  // n x d
    std::vector<double> d_txt;  // n x d
    double d_log_temp = 0.0;
};

void check_finite_matrix(const std::vector<double>& m, const char* what) {
    for (double v : m)
        if (!std::isfinite(v)) throw std::runtime_error(std::string("contrastive_loss: non-finite ") + what);
}

// forward + dL/d(embeddings); the n x n part is cheap and stays serial
LossBack loss_backward(const std::vector<double>& I, const std::vector<double>& T, int n, int d, double log_temp,
                       double scale) {
    check_finite_matrix(I, "image embedding");
    check_finite_matrix(T, "text embedding");
    if (!std::isfinite(log_temp)) throw std::runtime_error("contrastive_loss: non-finite log_temperature");

    const double tau = std::exp(log_temp);
    std::vector<double> S(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k)
                acc += I[static_cast<size_t>(i) * d + k] * T[static_cast<size_t>(j) * d + k];
            S[static_cast<size_t>(i) * n + j] = tau * acc;
        }

    std::vector<double> P(static_cast<size_t>(n) * n);  // row softmax
    std::vector<double> Q(static_cast<size_t>(n) * n);  // column softmax
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double mx = S[static_cast<size_t>(i) * n];
        for (int j = 1; j < n; ++j) mx = std::max(mx, S[static_cast<size_t>(i) * n + j]);
        double denom = 0.0;
        for (int j = 0; j < n; ++j) denom += std::exp(S[static_cast<size_t>(i) * n + j] - mx);
        for (int j = 0; j < n; ++j) P[static_cast<size_t>(i) * n + j] = std::exp(S[static_cast<size_t>(i) * n + j] - mx) / denom;
        loss += mx + std::log(denom) - S[static_cast<size_t>(i) * n + i];
    }
    for (int j = 0; j < n; ++j) {
        double mx = S[static_cast<size_t>(j)];
        for (int i = 1; i < n; ++i) mx = std::max(mx, S[static_cast<size_t>(i) * n + j]);
        double denom = 0.0;
        for (int i = 0; i < n; ++i) denom += std::exp(S[static_cast<size_t>(i) * n + j] - mx);
        for (int i = 0; i < n; ++i) Q[static_cast<size_t>(i) * n + j] = std::exp(S[static_cast<size_t>(i) * n + j] - mx) / denom;
        loss += mx + std::log(denom) - S[static_cast<size_t>(j) * n + j];
    }

    LossBack out;
    out.loss = scale * loss / (2.0 * n);

    std::vector<double> dS(static_cast<size_t>(n) * n);
    const double f = scale / (2.0 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double delta = i == j ? 1.0 : 0.0;
            dS[static_cast<size_t>(i) * n + j] =
                f * ((P[static_cast<size_t>(i) * n + j] - delta) + (Q[static_cast<size_t>(i) * n + j] - delta));
        }

    out.d_img.assign(static_cast<size_t>(n) * d, 0.0);
    out.d_txt.assign(static_cast<size_t>(n) * d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double ds = dS[static_cast<size_t>(i) * n + j];
            out.d_log_temp += ds * S[static_cast<size_t>(i) * n + j];
            for (int k = 0; k < d; ++k) {
                out.d_img[static_cast<size_t>(i) * d + k] += tau * ds * T[static_cast<size_t>(j) * d + k];
                out.d_txt[static_cast<size_t>(j) * d + k] += tau * ds * I[static_cast<size_t>(i) * d + k];
            }
        }
    return out;
}

void validate_batch(const EncodeBatch& batch) {
    if (batch.images.empty()) throw std::invalid_argument("batch must be non-empty");
    if (batch.images.size() != batch.tokens.size())
        throw std::invalid_argument("batch image/text counts differ");
}

// exceptions may not unwind out of an OpenMP region; capture and rethrow
class RegionError {
  public:
    void capture() {
#pragma omp critical(lrlab_region_error)
        if (!err_) err_ = std::current_exception();
    }
    void rethrow() const {
        if (err_) std::rethrow_exception(err_);
    }

  private:
    std::exception_ptr err_;
};

template <bool Parallel>
std::vector<double> embed_images_impl(const ParamPack& p, const std::vector<const ImageU8*>& images) {
    const int n = static_cast<int>(images.size());
    const int d = p.config().embed_dim;
    std::vector<double> out(static_cast<size_t>(n) * d);
    RegionError err;
#pragma omp parallel for schedule(static) if (Parallel)
    for (int i = 0; i < n; ++i) {
        try {
            TowerTrace tr;
            image_forward(p, *images[static_cast<size_t>(i)], tr);
            for (int k = 0; k < d; ++k) out[static_cast<size_t>(i) * d + k] = tr.e[static_cast<size_t>(k)];
        } catch (...) {
            err.capture();
        }
    }
    err.rethrow();
    return out;
}

template <bool Parallel>
std::vector<double> embed_texts_impl(const ParamPack& p, const std::vector<const std::vector<int>*>& tokens) {
    const int n = static_cast<int>(tokens.size());
    const int d = p.config().embed_dim;
    std::vector<double> out(static_cast<size_t>(n) * d);
    RegionError err;
#pragma omp parallel for schedule(static) if (Parallel)
    for (int i = 0; i < n; ++i) {
        try {
            TowerTrace tr;
            text_forward(p, *tokens[static_cast<size_t>(i)], tr);
            for (int k = 0; k < d; ++k) out[static_cast<size_t>(i) * d + k] = tr.e[static_cast<size_t>(k)];
        } catch (...) {
            err.capture();
        }
    }
    err.rethrow();
    return out;
}

template <bool Parallel>
LossGrads loss_and_gradients_impl(const ParamPack& p, const EncodeBatch& batch, double loss_scale) {
    validate_batch(batch);
    const int n = batch.size();
    const int d = p.config().embed_dim;

    std::vector<TowerTrace> img_tr(static_cast<size_t>(n)), txt_tr(static_cast<size_t>(n));
    RegionError err;
#pragma omp parallel for schedule(static) if (Parallel)
    for (int i = 0; i < n; ++i) {
        try {
            image_forward(p, *batch.images[static_cast<size_t>(i)], img_tr[static_cast<size_t>(i)]);
            text_forward(p, *batch.tokens[static_cast<size_t>(i)], txt_tr[static_cast<size_t>(i)]);
        } catch (...) {
            err.capture();
        }
    }
    err.rethrow();

    std::vector<double> I(static_cast<size_t>(n) * d), T(static_cast<size_t>(n) * d);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) {
            I[static_cast<size_t>(i) * d + k] = img_tr[static_cast<size_t>(i)].e[static_cast<size_t>(k)];
            T[static_cast<size_t>(i) * d + k] = txt_tr[static_cast<size_t>(i)].e[static_cast<size_t>(k)];
        }

    LossBack lb = loss_backward(I, T, n, d, p.log_temperature(), loss_scale);

    // per-sample buffers, reduced in index order: parallel runs reproduce
    // the serial sums bit for bit
    std::vector<std::vector<double>> bufs(static_cast<size_t>(n));
#pragma omp parallel for schedule(static) if (Parallel)
    for (int i = 0; i < n; ++i) {
        try {
            auto& g = bufs[static_cast<size_t>(i)];
            g.assign(p.data().size(), 0.0);
            image_backward(p, *batch.images[static_cast<size_t>(i)], img_tr[static_cast<size_t>(i)],
                           lb.d_img.data() + static_cast<size_t>(i) * d, g.data());
            text_backward(p, *batch.tokens[static_cast<size_t>(i)], txt_tr[static_cast<size_t>(i)],
                          lb.d_txt.data() + static_cast<size_t>(i) * d, g.data());
        } catch (...) {
            err.capture();
        }
    }
    err.rethrow();

    LossGrads out;
    out.loss = lb.loss;
    out.grad.assign(p.data().size(), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& g = bufs[static_cast<size_t>(i)];
        for (size_t k = 0; k < g.size(); ++k) out.grad[k] += g[k];
    }
    out.grad[p.off_log_temp()] += lb.d_log_temp;

    if (!std::isfinite(out.loss)) throw std::runtime_error("gradients: non-finite loss");
    for (size_t k = 0; k < out.grad.size(); ++k)
        if (!std::isfinite(out.grad[k]))
            throw std::runtime_error("gradients: non-finite gradient in tensor " + p.tensor_at(k).name);
    return out;
}

}  // namespace

std::vector<double> encode_image(const ParamPack& params, const ImageU8& image) {
    TowerTrace tr;
    image_forward(params, image, tr);
    return tr.e;
}

std::vector<double> encode_text(const ParamPack& params, const std::vector<int>& token_ids) {
    TowerTrace tr;
    text_forward(params, token_ids, tr);
    return tr.e;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

std::vector<double> embed_images(const ParamPack& params, const std::vector<const ImageU8*>& images) {
    return embed_images_impl<true>(params, images);
}
std::vector<double> embed_images_serial(const ParamPack& params, const std::vector<const ImageU8*>& images) {
    return embed_images_impl<false>(params, images);
}
std::vector<double> embed_texts(const ParamPack& params, const std::vector<const std::vector<int>*>& tokens) {
    return embed_texts_impl<true>(params, tokens);
}
std::vector<double> embed_texts_serial(const ParamPack& params, const std::vector<const std::vector<int>*>& tokens) {
    return embed_texts_impl<false>(params, tokens);
}

double contrastive_loss(const std::vector<double>& image_emb, const std::vector<double>& text_emb, int n, int d,
                        double log_temperature) {
    if (n < 1) throw std::invalid_argument("contrastive_loss: empty batch");
    if (image_emb.size() != static_cast<size_t>(n) * d || text_emb.size() != static_cast<size_t>(n) * d)
        throw std::invalid_argument("contrastive_loss: embedding matrix shape mismatch");
    return loss_backward(image_emb, text_emb, n, d, log_temperature, 1.0).loss;
}

LossGrads loss_and_gradients(const ParamPack& params, const EncodeBatch& batch, double loss_scale) {
    return loss_and_gradients_impl<true>(params, batch, loss_scale);
}

LossGrads loss_and_gradients_serial(const ParamPack& params, const EncodeBatch& batch, double loss_scale) {
    return loss_and_gradients_impl<false>(params, batch, loss_scale);
}

double batch_loss(const ParamPack& params, const EncodeBatch& batch) {
    validate_batch(batch);
    const int n = batch.size();
    const int d = params.config().embed_dim;
    std::vector<double> I = embed_images_serial(params, batch.images);
    std::vector<double> T = embed_texts_serial(params, batch.tokens);
    return contrastive_loss(I, T, n, d, params.log_temperature());
}

}  // namespace lrlab
