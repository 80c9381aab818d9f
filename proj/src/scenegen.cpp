#include "lrlab/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "lrlab/jsonl.hpp"

namespace lrlab {

std::string relation_name(Relation r) { return r == Relation::LeftOf ? "left_of" : "right_of"; }

Relation relation_from_name(const std::string& name) {
    if (name == "left_of") return Relation::LeftOf;
    if (name == "right_of") return Relation::RightOf;
    throw std::runtime_error("unknown relation \"" + name + "\"");
}

namespace {

Relation flipped(Relation r) { return r == Relation::LeftOf ? Relation::RightOf : Relation::LeftOf; }

// substream ids for seed derivation
enum StreamKind : uint64_t {
    kSprites = 1,
    kBackgrounds = 2,
    kHeldout = 3,
    kPlain = 4,
    kPairs = 5,
    kTriplets = 6,
};

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    double c = v * s;
    double hp = h * 6.0;
    double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) {
        r = c; g = x;
    } else if (hp < 2) {
        r = x; g = c;
    } else if (hp < 3) {
        g = c; b = x;
    } else if (hp < 4) {
        g = x; b = c;
    } else if (hp < 5) {
        r = x; b = c;
    } else {
        r = c; b = x;
    }
    double m = v - c;
    return {r + m, g + m, b + m};
}

constexpr int kShapeFamilies = 8;

bool inside_shape(int family, double u, double v, double scale) {
    double r2 = u * u + v * v;
    switch (family) {
        case 0: return r2 <= scale * scale;                                   // disk
        case 1: return std::max(std::abs(u), std::abs(v)) <= scale;           // square
        case 2: return v <= scale && v >= -scale && std::abs(u) <= (v + scale) * 0.5;  // triangle
        case 3: return std::abs(u) + std::abs(v) <= scale;                    // diamond
        case 4: return r2 <= scale * scale && r2 >= 0.3 * scale * scale;      // ring
        case 5:                                                               // cross
            return (std::abs(u) <= 0.35 * scale && std::abs(v) <= scale) ||
                   (std::abs(v) <= 0.35 * scale && std::abs(u) <= scale);
        case 6: {                                                             // five-lobed blob
            double ang = std::atan2(v, u);
            double rim = scale * (0.62 + 0.38 * std::cos(5.0 * ang));
            return r2 <= rim * rim;
        }
        default:                                                              // notched square
            return std::max(std::abs(u), std::abs(v)) <= scale && r2 >= 0.12 * scale * scale;
    }
}

Sprite draw_sprite(const std::string& noun, int variant, uint64_t seed, int side) {
    Sprite sp;
    sp.noun = noun;
    sp.variant = variant;
    sp.side = side;
    sp.rgba.assign(static_cast<size_t>(side) * side * 4, 0);

    // noun fixes shape family and base hue; the variant jitters the rest
    const uint64_t sig = fnv1a(noun);
    const int family = static_cast<int>(sig % kShapeFamilies);
    const double base_hue = static_cast<double>(mix64(sig) >> 11) * 0x1.0p-53;

    Rng rng(mix64(seed, sig, static_cast<uint64_t>(variant)));
    const double hue = base_hue + (rng.uniform() - 0.5) * 0.08;
    const double sat = 0.75 + rng.uniform() * 0.25;
    const double val = 0.75 + rng.uniform() * 0.25;
    const double scale = 0.62 + rng.uniform() * 0.3;
    const Rgb primary = hsv_to_rgb(hue, sat, val);
    const Rgb accent = hsv_to_rgb(hue + 0.45 + rng.uniform() * 0.1, sat, 0.35 + rng.uniform() * 0.25);

    // variant-keyed two-tone banding
    const int band_dir = rng.uniform_int(0, 2);  // 0 horizontal, 1 vertical, 2 diagonal
    const double band_period = 0.18 + rng.uniform() * 0.22;
    const double band_phase = rng.uniform();

    bool any = false;
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double u = (2.0 * x + 1.0) / side - 1.0;
            double v = (2.0 * y + 1.0) / side - 1.0;
            if (!inside_shape(family, u, v, scale)) continue;
            double t = band_dir == 0 ? v : band_dir == 1 ? u : (u + v) * 0.5;
            bool band = std::fmod(t / band_period + band_phase + 8.0, 1.0) < 0.45;
            const Rgb& c = band ? accent : primary;
            size_t at = (static_cast<size_t>(y) * side + x) * 4;
            sp.rgba[at + 0] = static_cast<uint8_t>(std::lround(c.r * 255.0));
            sp.rgba[at + 1] = static_cast<uint8_t>(std::lround(c.g * 255.0));
            sp.rgba[at + 2] = static_cast<uint8_t>(std::lround(c.b * 255.0));
            sp.rgba[at + 3] = 255;
            any = true;
        }
    }
    if (!any) {
        size_t at = (static_cast<size_t>(side / 2) * side + side / 2) * 4;
        sp.rgba[at + 0] = static_cast<uint8_t>(std::lround(primary.r * 255.0));
        sp.rgba[at + 1] = static_cast<uint8_t>(std::lround(primary.g * 255.0));
        sp.rgba[at + 2] = static_cast<uint8_t>(std::lround(primary.b * 255.0));
        sp.rgba[at + 3] = 255;
    }
    return sp;
}

}  // namespace

std::vector<Sprite> gen_sprites(const std::vector<std::string>& nouns, int variants_per_noun, uint64_t seed,
                                int sprite_size) {
    if (nouns.empty()) throw std::invalid_argument("gen_sprites: empty noun list");
    if (variants_per_noun < 1) throw std::invalid_argument("gen_sprites: variants_per_noun must be >= 1");
    if (sprite_size < 1) throw std::invalid_argument("gen_sprites: sprite_size must be >= 1");
    std::unordered_set<std::string> uniq(nouns.begin(), nouns.end());
    if (uniq.size() != nouns.size()) throw std::invalid_argument("gen_sprites: duplicate nouns");

    const int total = static_cast<int>(nouns.size()) * variants_per_noun;
    std::vector<Sprite> sprites(static_cast<size_t>(total));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < total; ++i)
        sprites[static_cast<size_t>(i)] =
            draw_sprite(nouns[static_cast<size_t>(i / variants_per_noun)], i % variants_per_noun, seed, sprite_size);
    return sprites;
}

std::vector<Sprite> load_sprite_dir(const std::string& dir, const std::vector<std::string>& nouns,
                                    int variants_per_noun) {
    std::vector<Sprite> sprites;
    for (const auto& noun : nouns) {
        for (int v = 0; v < variants_per_noun; ++v) {
            const std::string path = dir + "/" + noun + "_" + std::to_string(v) + ".png";
            if (!std::filesystem::exists(path))
                throw std::runtime_error("load_sprite_dir: missing sprite image " + path);
            // reuse the RGB reader and a parallel alpha read via libpng would
            // complicate the io layer; external cutouts encode alpha as pure
            // black (0,0,0) background instead
            ImageU8 img = read_png_rgb8(path);
            if (img.h != img.w) throw std::runtime_error("load_sprite_dir: sprite must be square: " + path);
            Sprite sp;
            sp.noun = noun;
            sp.variant = v;
            sp.side = img.h;
            sp.rgba.assign(static_cast<size_t>(img.h) * img.w * 4, 0);
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x) {
                    size_t at = (static_cast<size_t>(y) * img.w + x) * 4;
                    uint8_t r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
                    sp.rgba[at + 0] = r;
                    sp.rgba[at + 1] = g;
                    sp.rgba[at + 2] = b;
                    sp.rgba[at + 3] = (r | g | b) ? 255 : 0;
                }
            sprites.push_back(std::move(sp));
        }
    }
    return sprites;
}

std::vector<Background> gen_backgrounds(int n, int scene_h, int scene_w, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_backgrounds: n must be >= 1");
    if (scene_h < 1 || scene_w < 1) throw std::invalid_argument("gen_backgrounds: scene size must be >= 1");

    std::vector<Background> bgs(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        Rng rng(mix64(seed, kBackgrounds, static_cast<uint64_t>(i)));
        // muted two-colour gradient plus a faint sinusoidal texture; kept
        // low-contrast so sprites dominate the scene
        Rgb c1 = hsv_to_rgb(rng.uniform(), 0.15 + rng.uniform() * 0.3, 0.3 + rng.uniform() * 0.4);
        Rgb c2 = hsv_to_rgb(rng.uniform(), 0.15 + rng.uniform() * 0.3, 0.3 + rng.uniform() * 0.4);
        double angle = rng.uniform() * 2.0 * M_PI;
        double dx = std::cos(angle), dy = std::sin(angle);
        double fx = 1.0 + rng.uniform() * 3.0, fy = 1.0 + rng.uniform() * 3.0;
        double phase = rng.uniform() * 2.0 * M_PI;
        double amp = 0.02 + rng.uniform() * 0.02;

        Background bg;
        bg.id = "bg_" + std::to_string(i);
        bg.pixels = ImageF(scene_h, scene_w);
        for (int y = 0; y < scene_h; ++y) {
            for (int x = 0; x < scene_w; ++x) {
                double px = scene_w > 1 ? static_cast<double>(x) / (scene_w - 1) : 0.0;
                double py = scene_h > 1 ? static_cast<double>(y) / (scene_h - 1) : 0.0;
                double t = 0.5 + 0.5 * (dx * (px - 0.5) + dy * (py - 0.5)) / 0.7071067811865476;
                t = std::clamp(t, 0.0, 1.0);
                double tex = amp * std::sin(2.0 * M_PI * (fx * px + fy * py) + phase);
                bg.pixels.at(y, x, 0) = std::clamp(c1.r + (c2.r - c1.r) * t + tex, 0.0, 1.0);
                bg.pixels.at(y, x, 1) = std::clamp(c1.g + (c2.g - c1.g) * t + tex, 0.0, 1.0);
                bg.pixels.at(y, x, 2) = std::clamp(c1.b + (c2.b - c1.b) * t + tex, 0.0, 1.0);
            }
        }
        bgs[static_cast<size_t>(i)] = std::move(bg);
    }
    return bgs;
}

SceneSpec place_pair(const Background& background, const Sprite& sprite_a, const Sprite& sprite_b, Relation relation,
                     int size_min, int size_max, Rng& rng) {
    const int H = background.pixels.h;
    const int W = background.pixels.w;
    if (size_min < 1) throw std::invalid_argument("place_pair: size_min must be >= 1");
    if (size_min > size_max) throw std::invalid_argument("place_pair: size_min > size_max");
    if (2 * size_min > W)
        throw std::runtime_error("place_pair: infeasible configuration: 2*size_min=" + std::to_string(2 * size_min) +
                                 " exceeds scene width " + std::to_string(W));
    if (size_max > H) throw std::runtime_error("place_pair: infeasible configuration: size_max exceeds scene height");

    const int size_a = rng.uniform_int(size_min, size_max);
    const int size_b = rng.uniform_int(size_min, size_max);
    if (size_a + size_b > W)
        throw std::runtime_error("place_pair: infeasible configuration: sampled sizes " + std::to_string(size_a) + "+" +
                                 std::to_string(size_b) + " exceed scene width " + std::to_string(W));

    const bool a_left = relation == Relation::LeftOf;
    const int s_left = a_left ? size_a : size_b;
    const int s_right = a_left ? size_b : size_a;

    // left box first, constrained so the right box still fits
    const int x_left = rng.uniform_int(0, W - s_left - s_right);
    const int x_right = rng.uniform_int(x_left + s_left, W - s_right);
    const int y_a = rng.uniform_int(0, H - size_a);
    const int y_b = rng.uniform_int(0, H - size_b);

    SceneSpec spec;
    spec.background_id = background.id;
    spec.relation = relation;
    spec.a = {sprite_a.noun, sprite_a.variant, a_left ? x_left : x_right, y_a, size_a};
    spec.b = {sprite_b.noun, sprite_b.variant, a_left ? x_right : x_left, y_b, size_b};
    return spec;
}

SceneSpec swap_scene(const SceneSpec& spec, int scene_w) {
    SceneSpec out = spec;
    out.a.x = scene_w - spec.a.x - spec.a.size;
    out.b.x = scene_w - spec.b.x - spec.b.size;
    out.relation = flipped(spec.relation);
    return out;
}

SpriteSet::SpriteSet(std::vector<Sprite> sprites) : sprites_(std::move(sprites)) {
    index_.reserve(sprites_.size());
    for (size_t i = 0; i < sprites_.size(); ++i)
        index_.emplace_back(sprites_[i].noun + "#" + std::to_string(sprites_[i].variant), i);
    std::sort(index_.begin(), index_.end());
}

const Sprite& SpriteSet::get(const std::string& noun, int variant) const {
    const std::string key = noun + "#" + std::to_string(variant);
    auto it = std::lower_bound(index_.begin(), index_.end(), key,
                               [](const auto& p, const std::string& k) { return p.first < k; });
    if (it == index_.end() || it->first != key)
        throw std::runtime_error("unknown sprite reference " + noun + " variant " + std::to_string(variant));
    return sprites_[it->second];
}

BackgroundSet::BackgroundSet(std::vector<Background> backgrounds) : backgrounds_(std::move(backgrounds)) {}

const Background& BackgroundSet::get(const std::string& id) const {
    for (const auto& bg : backgrounds_)
        if (bg.id == id) return bg;
    throw std::runtime_error("unknown background reference " + id);
}

namespace {

void composite(ImageF& out, const Sprite& sprite, const Placement& p) {
    for (int y = 0; y < p.size; ++y) {
        int sy = std::min(sprite.side - 1, static_cast<int>((y + 0.5) * sprite.side / p.size));
        for (int x = 0; x < p.size; ++x) {
            int sx = std::min(sprite.side - 1, static_cast<int>((x + 0.5) * sprite.side / p.size));
            if (sprite.at(sy, sx, 3) <= 127) continue;
            out.at(p.y + y, p.x + x, 0) = sprite.at(sy, sx, 0) / 255.0;
            out.at(p.y + y, p.x + x, 1) = sprite.at(sy, sx, 1) / 255.0;
            out.at(p.y + y, p.x + x, 2) = sprite.at(sy, sx, 2) / 255.0;
        }
    }
}

}  // namespace

ImageF render(const SceneSpec& spec, const SpriteSet& sprites, const BackgroundSet& backgrounds) {
    const Background& bg = backgrounds.get(spec.background_id);
    ImageF out = bg.pixels;
    for (const Placement* p : {&spec.a, &spec.b}) {
        if (p->size <= 0) continue;  // single-object scenes leave b empty
        composite(out, sprites.get(p->noun, p->variant), *p);
    }
    return out;
}

namespace {

std::string caption_direct(const std::string& noun_x, const std::string& noun_y, Relation rel) {
    return "a " + noun_x + (rel == Relation::LeftOf ? " to the left of a " : " to the right of a ") + noun_y;
}

struct CaptionPair {
    std::string pos;
    std::string neg;
};

// pos/neg share the template and noun order, differing in the direction
// word only; the synonym branch reverses roles and direction together
CaptionPair caption_pair_for(const SceneSpec& spec, Rng& rng) {
    const bool direct = rng.uniform() < 0.5;
    if (direct)
        return {caption_direct(spec.a.noun, spec.b.noun, spec.relation),
                caption_direct(spec.a.noun, spec.b.noun, flipped(spec.relation))};
    return {caption_direct(spec.b.noun, spec.a.noun, flipped(spec.relation)),
            caption_direct(spec.b.noun, spec.a.noun, spec.relation)};
}

}  // namespace

std::string caption_for(const SceneSpec& spec, Rng& rng) { return caption_pair_for(spec, rng).pos; }

ContrastivePair make_contrastive_pair(const Background& background, const Sprite& sprite_a, const Sprite& sprite_b,
                                      int size_min, int size_max, int scene_w, const std::string& pair_id, Rng& rng) {
    if (sprite_a.noun == sprite_b.noun)
        throw std::invalid_argument("make_contrastive_pair: nouns must be distinct, got \"" + sprite_a.noun + "\"");
    ContrastivePair pair;
    pair.pair_id = pair_id;
    pair.first = place_pair(background, sprite_a, sprite_b, Relation::LeftOf, size_min, size_max, rng);
    pair.second = swap_scene(pair.first, scene_w);
    pair.first_caption = caption_for(pair.first, rng);
    pair.second_caption = caption_for(pair.second, rng);
    return pair;
}

void SceneGenConfig::validate() const {
    if (nouns_path.empty()) throw std::runtime_error("config: nouns_path must be set");
    if (scene_size < 8) throw std::runtime_error("config: scene_size must be >= 8");
    if (sprite_size < 4) throw std::runtime_error("config: sprite_size must be >= 4");
    if (variants_per_noun < 1) throw std::runtime_error("config: variants_per_noun must be >= 1");
    if (n_backgrounds < 1) throw std::runtime_error("config: n_backgrounds must be >= 1");
    if (size_min < 1) throw std::runtime_error("config: size_min must be >= 1");
    if (size_min > size_max) throw std::runtime_error("config: size_min must not exceed size_max");
    if (size_max > scene_size) throw std::runtime_error("config: size_max must not exceed scene_size");
    if (2 * size_max > scene_size)
        throw std::runtime_error("config: 2*size_max must not exceed scene_size (side-by-side placement)");
    if (n_plain < 0) throw std::runtime_error("config: n_plain must be >= 0");
    if (n_contrastive_pairs < 0) throw std::runtime_error("config: n_contrastive_pairs must be >= 0");
    if (n_heldout_pairs < 0) throw std::runtime_error("config: n_heldout_pairs must be >= 0");
    if (n_triplets < 0) throw std::runtime_error("config: n_triplets must be >= 0");
    if (n_triplets > 0 && n_heldout_pairs < 1)
        throw std::runtime_error("config: n_triplets > 0 requires n_heldout_pairs >= 1");
}

namespace {

nlohmann::json placement_json(const Placement& p) {
    return {{"noun", p.noun}, {"variant", p.variant}, {"x", p.x}, {"y", p.y}, {"size", p.size}};
}

Placement placement_from_json(const nlohmann::json& j, const std::string& path, long lineno) {
    for (const char* f : {"noun", "variant", "x", "y", "size"})
        if (!j.contains(f))
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": placement missing field \"" +
                                     std::string(f) + "\"");
    Placement p;
    p.noun = j["noun"].get<std::string>();
    p.variant = j["variant"].get<int>();
    p.x = j["x"].get<int>();
    p.y = j["y"].get<int>();
    p.size = j["size"].get<int>();
    return p;
}

nlohmann::json manifest_json(const ManifestRecord& r) {
    nlohmann::json placements = nlohmann::json::array();
    for (const auto& p : r.placements) placements.push_back(placement_json(p));
    return {{"id", r.id},         {"caption", r.caption}, {"pool", r.pool},        {"pair_id", r.pair_id},
            {"noun_a", r.noun_a}, {"noun_b", r.noun_b},   {"relation", r.relation}, {"placements", placements}};
}

struct RenderJob {
    std::string id;
    SceneSpec spec;
};

}  // namespace

DatasetSummary generate_dataset(const SceneGenConfig& config, const std::string& out_dir,
                                const std::string& sprite_dir) {
    config.validate();
    const std::vector<std::string> nouns = load_noun_list(config.nouns_path);
    if (nouns.size() < 2) throw std::runtime_error("noun list " + config.nouns_path + " needs at least 2 nouns");
    {
        std::unordered_set<std::string> uniq(nouns.begin(), nouns.end());
        if (uniq.size() != nouns.size()) throw std::runtime_error("noun list " + config.nouns_path + " has duplicates");
    }

    const int S = config.scene_size;
    std::vector<Sprite> sprite_vec =
        sprite_dir.empty() ? gen_sprites(nouns, config.variants_per_noun, mix64(config.seed, kSprites), config.sprite_size)
                           : load_sprite_dir(sprite_dir, nouns, config.variants_per_noun);
    const SpriteSet sprites(std::move(sprite_vec));
    const BackgroundSet backgrounds(gen_backgrounds(config.n_backgrounds, S, S, config.seed));

    // unordered noun pairs, split into held-out (triplets only) and training
    const int n_nouns = static_cast<int>(nouns.size());
    std::vector<std::pair<int, int>> all_pairs;
    for (int i = 0; i < n_nouns; ++i)
        for (int j = i + 1; j < n_nouns; ++j) all_pairs.emplace_back(i, j);
    if (config.n_heldout_pairs > static_cast<int>(all_pairs.size()))
        throw std::runtime_error("requested held-out pairs (" + std::to_string(config.n_heldout_pairs) +
                                 ") exceed available unseen combinations (" + std::to_string(all_pairs.size()) + ")");

    Rng heldout_rng(mix64(config.seed, kHeldout));
    std::vector<int> heldout_idx = heldout_rng.sample_without_replacement(static_cast<int>(all_pairs.size()),
                                                                          config.n_heldout_pairs);
    std::set<int> heldout_set(heldout_idx.begin(), heldout_idx.end());
    std::vector<std::pair<int, int>> train_pairs, heldout_pairs;
    for (int i = 0; i < static_cast<int>(all_pairs.size()); ++i)
        (heldout_set.count(i) ? heldout_pairs : train_pairs).push_back(all_pairs[static_cast<size_t>(i)]);

    const bool need_train_pairs = config.n_contrastive_pairs > 0 || config.n_plain > 0;
    if (need_train_pairs && train_pairs.empty())
        throw std::runtime_error("no noun pairs left for training pools after holding out " +
                                 std::to_string(config.n_heldout_pairs));

    std::vector<RenderJob> jobs;
    std::vector<ManifestRecord> manifest;
    std::vector<TripletRecord> triplets;

    auto pick_variant = [&](Rng& rng) { return rng.uniform_int(0, config.variants_per_noun - 1); };
    auto pick_background = [&](Rng& rng) -> const Background& {
        return backgrounds.all()[static_cast<size_t>(rng.uniform_int(0, config.n_backgrounds - 1))];
    };

    // plain pool: single objects and non-directional two-object scenes
    for (long i = 0; i < config.n_plain; ++i) {
        Rng rng(mix64(config.seed, kPlain, static_cast<uint64_t>(i)));
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "plain_%06ld", i);
        const Background& bg = pick_background(rng);
        const int tpl = rng.uniform_int(0, 2);

        ManifestRecord rec;
        rec.id = idbuf;
        rec.pool = "plain";
        SceneSpec spec;
        if (tpl == 0) {
            const int noun_idx = rng.uniform_int(0, n_nouns - 1);
            const Sprite& sp = sprites.get(nouns[static_cast<size_t>(noun_idx)], pick_variant(rng));
            const int size = rng.uniform_int(config.size_min, config.size_max);
            Placement solo{sp.noun, sp.variant, rng.uniform_int(0, S - size), rng.uniform_int(0, S - size), size};
            spec.background_id = bg.id;
            spec.a = solo;
            rec.caption = "a " + sp.noun;
            rec.noun_a = sp.noun;
            rec.relation = "none";
            rec.placements = {solo};
        } else {
            const auto [pi, pj] = train_pairs[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(train_pairs.size()) - 1))];
            const bool swap_order = rng.uniform() < 0.5;
            const std::string& nx = nouns[static_cast<size_t>(swap_order ? pj : pi)];
            const std::string& ny = nouns[static_cast<size_t>(swap_order ? pi : pj)];
            const Sprite& sa = sprites.get(nx, pick_variant(rng));
            const Sprite& sb = sprites.get(ny, pick_variant(rng));
            const Relation rel = rng.uniform() < 0.5 ? Relation::LeftOf : Relation::RightOf;
            spec = place_pair(bg, sa, sb, rel, config.size_min, config.size_max, rng);
            rec.caption = tpl == 1 ? "a " + nx + " and a " + ny : "a " + nx + " next to a " + ny;
            rec.noun_a = nx;
            rec.noun_b = ny;
            rec.relation = relation_name(rel);
            rec.placements = {spec.a, spec.b};
        }
        jobs.push_back({rec.id, spec});
        manifest.push_back(std::move(rec));
    }

    // contrastive pool
    for (long i = 0; i < config.n_contrastive_pairs; ++i) {
        Rng rng(mix64(config.seed, kPairs, static_cast<uint64_t>(i)));
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "pair_%06ld", i);
        const Background& bg = pick_background(rng);
        const auto [pi, pj] = train_pairs[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(train_pairs.size()) - 1))];
        const bool swap_order = rng.uniform() < 0.5;
        const Sprite& sa = sprites.get(nouns[static_cast<size_t>(swap_order ? pj : pi)], pick_variant(rng));
        const Sprite& sb = sprites.get(nouns[static_cast<size_t>(swap_order ? pi : pj)], pick_variant(rng));
        ContrastivePair pair =
            make_contrastive_pair(bg, sa, sb, config.size_min, config.size_max, S, idbuf, rng);

        for (int member = 0; member < 2; ++member) {
            const SceneSpec& spec = member == 0 ? pair.first : pair.second;
            ManifestRecord rec;
            rec.id = pair.pair_id + (member == 0 ? "_a" : "_b");
            rec.caption = member == 0 ? pair.first_caption : pair.second_caption;
            rec.pool = "contrastive";
            rec.pair_id = pair.pair_id;
            rec.noun_a = spec.a.noun;
            rec.noun_b = spec.b.noun;
            rec.relation = relation_name(spec.relation);
            rec.placements = {spec.a, spec.b};
            jobs.push_back({rec.id, spec});
            manifest.push_back(std::move(rec));
        }
    }

    // held-out triplets: unseen noun pairs, pos/neg differ in direction only
    if (config.n_triplets > 0) {
        for (long i = 0; i < config.n_triplets; ++i) {
            Rng rng(mix64(config.seed, kTriplets, static_cast<uint64_t>(i)));
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "trip_%06ld", i);
            const Background& bg = pick_background(rng);
            const auto [pi, pj] =
                heldout_pairs[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(heldout_pairs.size()) - 1))];
            const bool swap_order = rng.uniform() < 0.5;
            const Sprite& sa = sprites.get(nouns[static_cast<size_t>(swap_order ? pj : pi)], pick_variant(rng));
            const Sprite& sb = sprites.get(nouns[static_cast<size_t>(swap_order ? pi : pj)], pick_variant(rng));
            const Relation rel = rng.uniform() < 0.5 ? Relation::LeftOf : Relation::RightOf;
            SceneSpec spec = place_pair(bg, sa, sb, rel, config.size_min, config.size_max, rng);
            CaptionPair captions = caption_pair_for(spec, rng);
            jobs.push_back({idbuf, spec});
            triplets.push_back({idbuf, captions.pos, captions.neg});
        }
    }

    // render and write; per-scene rng streams make thread order irrelevant
    const DatasetPaths paths{out_dir};
    std::filesystem::create_directories(paths.images_dir());
    std::exception_ptr render_err = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (long j = 0; j < static_cast<long>(jobs.size()); ++j) {
        try {
            ImageF img = render(jobs[static_cast<size_t>(j)].spec, sprites, backgrounds);
            write_png_rgb8(paths.image_path(jobs[static_cast<size_t>(j)].id), quantize(img));
        } catch (...) {
#pragma omp critical(lrlab_render_error)
            if (!render_err) render_err = std::current_exception();
        }
    }
    if (render_err) std::rethrow_exception(render_err);

    {
        std::ostringstream os;
        for (const auto& noun : nouns) os << noun << '\n';
        write_text_file_atomic(paths.nouns_path(), os.str());
    }
    {
        std::ostringstream os;
        for (const auto& rec : manifest) os << manifest_json(rec).dump() << '\n';
        write_text_file_atomic(paths.manifest_path(), os.str());
    }
    {
        std::ostringstream os;
        for (const auto& t : triplets)
            os << nlohmann::json{{"image_id", t.image_id}, {"caption_pos", t.caption_pos}, {"caption_neg", t.caption_neg}}
                      .dump()
               << '\n';
        write_text_file_atomic(paths.triplets_path(), os.str());
    }

    DatasetSummary summary;
    summary.n_plain = config.n_plain;
    summary.n_contrastive_pairs = config.n_contrastive_pairs;
    summary.n_triplets = config.n_triplets;
    summary.n_nouns = n_nouns;
    summary.n_heldout_pairs = config.n_heldout_pairs;
    return summary;
}

std::vector<ManifestRecord> load_manifest(const std::string& path) {
    std::vector<ManifestRecord> records;
    for_each_jsonl(path, [&](long lineno, const nlohmann::json& j) {
        ManifestRecord rec;
        rec.id = require_string_field(j, "id", path, lineno);
        rec.caption = require_string_field(j, "caption", path, lineno);
        rec.pool = require_string_field(j, "pool", path, lineno);
        rec.pair_id = j.value("pair_id", "");
        rec.noun_a = j.value("noun_a", "");
        rec.noun_b = j.value("noun_b", "");
        rec.relation = j.value("relation", "none");
        if (j.contains("placements"))
            for (const auto& pj : j["placements"]) rec.placements.push_back(placement_from_json(pj, path, lineno));
        records.push_back(std::move(rec));
    });
    return records;
}

std::vector<TripletRecord> load_triplets(const std::string& path) {
    std::vector<TripletRecord> records;
    for_each_jsonl(path, [&](long lineno, const nlohmann::json& j) {
        TripletRecord t;
        t.image_id = require_string_field(j, "image_id", path, lineno);
        t.caption_pos = require_string_field(j, "caption_pos", path, lineno);
        t.caption_neg = require_string_field(j, "caption_neg", path, lineno);
        records.push_back(std::move(t));
    });
    return records;
}

}  // namespace lrlab
