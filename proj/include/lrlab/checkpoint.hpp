#pragma once

#include <string>

#include "lrlab/encoder.hpp"
#include "lrlab/vocab.hpp"

namespace lrlab {

// On-disk model container: config echo, vocabulary, shape-tagged tensors,
// trainer rng state and step counter. JSON, format-versioned.
struct Checkpoint {
    static constexpr const char* kFormat = "lrlab-checkpoint";
    static constexpr int kVersion = 1;

    ModelConfig config;
    Vocabulary vocab;
    ParamPack params{ModelConfig{}, 2};
    long step = 0;
    std::string tag;        // "baseline" for cs=0 runs, "contrastive" otherwise
    std::string rng_state;  // mt19937_64 stream state

    void save(const std::string& path) const;  // atomic
    static Checkpoint load(const std::string& path);
};

}  // namespace lrlab
