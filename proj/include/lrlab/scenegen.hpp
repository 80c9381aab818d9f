#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lrlab/image.hpp"
#include "lrlab/util.hpp"

namespace lrlab {

enum class Relation { LeftOf, RightOf };

std::string relation_name(Relation r);                 // "left_of" / "right_of"
Relation relation_from_name(const std::string& name);

// Square RGBA cutout; alpha 0 or 255.
struct Sprite {
    std::string noun;
    int variant = 0;
    int side = 0;
    std::vector<uint8_t> rgba;  // side * side * 4

    uint8_t at(int y, int x, int c) const { return rgba[static_cast<size_t>((y * side + x) * 4 + c)]; }
};

struct Background {
    std::string id;
    ImageF pixels;
};

struct Placement {
    std::string noun;
    int variant = 0;
    int x = 0;
    int y = 0;
    int size = 0;
};

// "a relation b"; the relation invariant is strict horizontal separation
// of the two bounding boxes.
struct SceneSpec {
    std::string background_id;
    Placement a;
    Placement b;
    Relation relation = Relation::LeftOf;

    bool relation_holds() const {
        if (relation == Relation::LeftOf) return a.x + a.size <= b.x;
        return b.x + b.size <= a.x;
    }
};

struct ContrastivePair {
    std::string pair_id;
    SceneSpec first;
    std::string first_caption;
    SceneSpec second;
    std::string second_caption;
};

struct SceneGenConfig {
    std::string nouns_path;
    int scene_size = 64;
    int sprite_size = 32;
    int variants_per_noun = 6;
    int n_backgrounds = 12;
    int size_min = 16;
    int size_max = 32;
    long n_plain = 2560;
    long n_contrastive_pairs = 512;
    int n_heldout_pairs = 56;
    long n_triplets = 2000;
    uint64_t seed = 1;

    void validate() const;  // throws naming the offending field
};

std::vector<Sprite> gen_sprites(const std::vector<std::string>& nouns, int variants_per_noun, uint64_t seed,
                                int sprite_size);

// Ingestion path for externally supplied cutouts: files named
// <noun>_<variant>.png (RGBA) in a directory replace the procedural sprites
// for that noun.
std::vector<Sprite> load_sprite_dir(const std::string& dir, const std::vector<std::string>& nouns,
                                    int variants_per_noun);

std::vector<Background> gen_backgrounds(int n, int scene_h, int scene_w, uint64_t seed);

// Samples sizes uniform in [size_min, size_max], places the left-role box
// uniformly over positions leaving room for the right-role box, then the
// right-role box uniformly over what remains. Throws if the sampled sizes
// cannot coexist.
SceneSpec place_pair(const Background& background, const Sprite& sprite_a, const Sprite& sprite_b, Relation relation,
                     int size_min, int size_max, Rng& rng);

// Re-places both boxes at horizontally mirrored positions; sprites, sizes
// and background are untouched, the relation flips.
SceneSpec swap_scene(const SceneSpec& spec, int scene_w);

class SpriteSet {
  public:
    explicit SpriteSet(std::vector<Sprite> sprites);
    const Sprite& get(const std::string& noun, int variant) const;  // throws on dangling reference
    const std::vector<Sprite>& all() const { return sprites_; }

  private:
    std::vector<Sprite> sprites_;
    std::vector<std::pair<std::string, size_t>> index_;  // (noun#variant, position)
};

class BackgroundSet {
  public:
    explicit BackgroundSet(std::vector<Background> backgrounds);
    const Background& get(const std::string& id) const;
    const std::vector<Background>& all() const { return backgrounds_; }

  private:
    std::vector<Background> backgrounds_;
};

// Alpha > 127 overwrites the background; nearest-neighbour resize.
ImageF render(const SceneSpec& spec, const SpriteSet& sprites, const BackgroundSet& backgrounds);

// "a {X} to the left of a {Y}" or the role-reversed synonym, each with
// probability 1/2. The emitted string is always true of the scene.
std::string caption_for(const SceneSpec& spec, Rng& rng);

ContrastivePair make_contrastive_pair(const Background& background, const Sprite& sprite_a, const Sprite& sprite_b,
                                      int size_min, int size_max, int scene_w, const std::string& pair_id, Rng& rng);

// One manifest.jsonl record; placements carry enough to re-check the
// relation invariant without touching pixels.
struct ManifestRecord {
    std::string id;
    std::string caption;
    std::string pool;  // "plain" | "contrastive"
    std::string pair_id;
    std::string noun_a;
    std::string noun_b;
    std::string relation;  // "left_of" | "right_of" | "none"
    std::vector<Placement> placements;
};

struct TripletRecord {
    std::string image_id;
    std::string caption_pos;
    std::string caption_neg;
};

struct DatasetPaths {
    std::string root;
    std::string images_dir() const { return root + "/images"; }
    std::string manifest_path() const { return root + "/manifest.jsonl"; }
    std::string triplets_path() const { return root + "/triplets.jsonl"; }
    std::string nouns_path() const { return root + "/nouns.txt"; }
    std::string image_path(const std::string& id) const { return images_dir() + "/" + id + ".png"; }
};

struct DatasetSummary {
    long n_plain = 0;
    long n_contrastive_pairs = 0;
    long n_triplets = 0;
    int n_nouns = 0;
    int n_heldout_pairs = 0;
};

// Emits images/*.png, manifest.jsonl and triplets.jsonl under out_dir.
// Held-out triplets use noun pairs that never occur in either training
// pool. Deterministic per (config, seed); scenes are rendered in parallel.
DatasetSummary generate_dataset(const SceneGenConfig& config, const std::string& out_dir,
                                const std::string& sprite_dir = "");

std::vector<ManifestRecord> load_manifest(const std::string& path);
std::vector<TripletRecord> load_triplets(const std::string& path);

}  // namespace lrlab
