#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrlab/encoder.hpp"
#include "lrlab/scenegen.hpp"
#include "lrlab/util.hpp"
#include "lrlab/vocab.hpp"

namespace lrlab {

struct TrainConfig {
    double learning_rate = 3e-3;
    double weight_decay = 1e-4;
    int warmup_steps = 200;
    int batch_size = 64;
    int cs = 8;  // contrastive samples per batch; cs/2 sibling pairs
    int epochs = 15;
    uint64_t seed = 1;

    void validate() const;
};

struct TrainSample {
    std::string id;
    ImageU8 image;
    std::string caption;
    std::vector<int> tokens;
};

struct PairSample {
    std::string pair_id;
    TrainSample a;
    TrainSample b;
};

struct TrainingData {
    Vocabulary vocab;
    std::vector<TrainSample> plain;
    std::vector<PairSample> pairs;
};

// Reads nouns.txt + manifest.jsonl + images/ from a generated dataset;
// images decode in parallel.
TrainingData load_training_data(const std::string& dataset_dir, const ModelConfig& mcfg);

struct MiniBatch {
    std::vector<const TrainSample*> items;          // length batch_size
    std::vector<std::pair<int, int>> pair_slots;    // indices of sibling pairs
};

// cs/2 complete sibling pairs plus batch_size-cs plain samples, drawn
// without replacement within the batch, order shuffled after assembly.
MiniBatch sample_batch(const std::vector<TrainSample>& plain_pool, const std::vector<PairSample>& contrastive_pool,
                       const TrainConfig& config, Rng& rng);

// linear ramp 0 -> learning_rate over warmup_steps, constant afterwards
double lr_schedule(long step, const TrainConfig& config);

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr_last = 0.0;
};

struct TrainReport {
    std::vector<double> step_losses;
    std::vector<double> step_lrs;
    std::vector<EpochStats> epochs;
    std::string checkpoint_path;
    std::string log_path;
};

// SGD with decoupled weight decay; a checkpoint is written at the end of
// every epoch. Divergence aborts with the last epoch checkpoint retained.
TrainReport train(const TrainingData& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const std::string& out_dir);

}  // namespace lrlab
