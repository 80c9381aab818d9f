#include "lrlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>

#include "lrlab/checkpoint.hpp"

namespace lrlab {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw std::runtime_error("train config: learning_rate must be finite and >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw std::runtime_error("train config: weight_decay must be finite and >= 0");
    if (warmup_steps < 0) throw std::runtime_error("train config: warmup_steps must be >= 0");
    if (batch_size < 1) throw std::runtime_error("train config: batch_size must be >= 1");
    if (cs < 0) throw std::runtime_error("train config: cs must be >= 0");
    if (cs % 2 != 0) throw std::runtime_error("train config: cs must be even (contrastive samples go in pairs)");
    if (cs > batch_size) throw std::runtime_error("train config: cs must not exceed batch_size");
    if (epochs < 0) throw std::runtime_error("train config: epochs must be >= 0");
}

TrainingData load_training_data(const std::string& dataset_dir, const ModelConfig& mcfg) {
    const DatasetPaths paths{dataset_dir};
    const auto manifest = load_manifest(paths.manifest_path());

    TrainingData data;
    data.vocab = Vocabulary::build(load_noun_list(paths.nouns_path()), mcfg.max_len);

    std::vector<TrainSample> samples(manifest.size());
    std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(manifest.size()); ++i) {
        try {
            const auto& rec = manifest[static_cast<size_t>(i)];
            TrainSample s;
            s.id = rec.id;
            s.image = read_png_rgb8(paths.image_path(rec.id));
            if (s.image.h != mcfg.scene_h || s.image.w != mcfg.scene_w)
                throw std::runtime_error("dataset image " + rec.id + " is " + std::to_string(s.image.h) + "x" +
                                         std::to_string(s.image.w) + ", model expects " + std::to_string(mcfg.scene_h) +
                                         "x" + std::to_string(mcfg.scene_w));
            s.caption = rec.caption;
            s.tokens = data.vocab.tokenize(rec.caption);
            samples[static_cast<size_t>(i)] = std::move(s);
        } catch (...) {
#pragma omp critical(lrlab_load_error)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    std::map<std::string, std::vector<size_t>> pair_members;
    for (size_t i = 0; i < manifest.size(); ++i) {
        if (manifest[i].pool == "plain") {
            data.plain.push_back(std::move(samples[i]));
        } else if (manifest[i].pool == "contrastive") {
            pair_members[manifest[i].pair_id].push_back(i);
        } else {
            throw std::runtime_error("manifest record " + manifest[i].id + " has unknown pool \"" + manifest[i].pool +
                                     "\"");
        }
    }
    for (auto& [pair_id, members] : pair_members) {
        if (members.size() != 2)
            throw std::runtime_error("contrastive pair " + pair_id + " has " + std::to_string(members.size()) +
                                     " members, expected 2");
        PairSample ps;
        ps.pair_id = pair_id;
        ps.a = std::move(samples[members[0]]);
        ps.b = std::move(samples[members[1]]);
        data.pairs.push_back(std::move(ps));
    }
    return data;
}

MiniBatch sample_batch(const std::vector<TrainSample>& plain_pool, const std::vector<PairSample>& contrastive_pool,
                       const TrainConfig& config, Rng& rng) {
    config.validate();
    const int n_pairs = config.cs / 2;
    const int n_plain = config.batch_size - config.cs;
    if (n_pairs > static_cast<int>(contrastive_pool.size()))
        throw std::runtime_error("sample_batch: cs/2=" + std::to_string(n_pairs) + " exceeds contrastive pool size " +
                                 std::to_string(contrastive_pool.size()));
    if (n_plain > static_cast<int>(plain_pool.size()))
        throw std::runtime_error("sample_batch: plain pool exhausted: need " + std::to_string(n_plain) + ", have " +
                                 std::to_string(plain_pool.size()));

    std::vector<const TrainSample*> staged;
    staged.reserve(static_cast<size_t>(config.batch_size));
    const auto pair_idx = rng.sample_without_replacement(static_cast<int>(contrastive_pool.size()), n_pairs);
    for (int pi : pair_idx) {
        staged.push_back(&contrastive_pool[static_cast<size_t>(pi)].a);
        staged.push_back(&contrastive_pool[static_cast<size_t>(pi)].b);
    }
    const auto plain_idx = rng.sample_without_replacement(static_cast<int>(plain_pool.size()), n_plain);
    for (int si : plain_idx) staged.push_back(&plain_pool[static_cast<size_t>(si)]);

    // shuffle positions; sibling slots follow the permutation
    std::vector<int> pos(static_cast<size_t>(config.batch_size));
    std::iota(pos.begin(), pos.end(), 0);
    rng.shuffle(pos);

    MiniBatch batch;
    batch.items.assign(static_cast<size_t>(config.batch_size), nullptr);
    for (int k = 0; k < config.batch_size; ++k) batch.items[static_cast<size_t>(pos[static_cast<size_t>(k)])] = staged[static_cast<size_t>(k)];
    for (int i = 0; i < n_pairs; ++i)
        batch.pair_slots.emplace_back(pos[static_cast<size_t>(2 * i)], pos[static_cast<size_t>(2 * i + 1)]);
    return batch;
}

double lr_schedule(long step, const TrainConfig& config) {
    if (step < 0) throw std::invalid_argument("lr_schedule: step must be >= 0");
    if (config.warmup_steps == 0 || step >= config.warmup_steps) return config.learning_rate;
    return config.learning_rate * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
}

namespace {

constexpr uint64_t kTrainStream = 0x747261696eULL;

std::string train_log_csv(const TrainReport& report) {
    std::ostringstream os;
    os << "step,lr,loss\n";
    for (size_t i = 0; i < report.step_losses.size(); ++i)
        os << i << ',' << format_double(report.step_lrs[i]) << ',' << format_double(report.step_losses[i]) << '\n';
    return os.str();
}

}  // namespace

TrainReport train(const TrainingData& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const std::string& out_dir) {
    tcfg.validate();
    mcfg.validate();
    std::filesystem::create_directories(out_dir);

    ParamPack params = ParamPack::init(mcfg, data.vocab.size(), tcfg.seed);
    Rng rng(mix64(tcfg.seed, kTrainStream));

    const long total_samples = static_cast<long>(data.plain.size()) + 2 * static_cast<long>(data.pairs.size());
    const long steps_per_epoch = std::max<long>(1, total_samples / tcfg.batch_size);

    TrainReport report;
    report.checkpoint_path = out_dir + "/checkpoint.json";
    report.log_path = out_dir + "/train_log.csv";

    auto save_checkpoint = [&](long step) {
        Checkpoint ck;
        ck.config = mcfg;
        ck.vocab = data.vocab;
        ck.params = params;
        ck.step = step;
        ck.tag = tcfg.cs == 0 ? "baseline" : "contrastive";
        ck.rng_state = rng.state_string();
        ck.save(report.checkpoint_path);
    };

    long step = 0;
    save_checkpoint(step);  // epoch 0 state; --epochs 0 leaves initialization on disk
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        double lr = 0.0;
        for (long s = 0; s < steps_per_epoch; ++s, ++step) {
            MiniBatch batch = sample_batch(data.plain, data.pairs, tcfg, rng);
            EncodeBatch eb;
            eb.images.reserve(batch.items.size());
            eb.tokens.reserve(batch.items.size());
            for (const TrainSample* item : batch.items) {
                eb.images.push_back(&item->image);
                eb.tokens.push_back(&item->tokens);
            }

            lr = lr_schedule(step, tcfg);
            LossGrads lg;
            try {
                lg = loss_and_gradients(params, eb);
            } catch (const std::exception& e) {
                write_text_file_atomic(report.log_path, train_log_csv(report));
                throw std::runtime_error("training diverged at step " + std::to_string(step) + " (" + e.what() +
                                         "); last good checkpoint: " + report.checkpoint_path);
            }

            auto& theta = params.data();
            const double keep = 1.0 - lr * tcfg.weight_decay;
            for (size_t k = 0; k < theta.size(); ++k) theta[k] = theta[k] * keep - lr * lg.grad[k];

            report.step_losses.push_back(lg.loss);
            report.step_lrs.push_back(lr);
            loss_sum += lg.loss;
        }
        save_checkpoint(step);
        report.epochs.push_back({epoch, loss_sum / static_cast<double>(steps_per_epoch), lr});
    }

    write_text_file_atomic(report.log_path, train_log_csv(report));
    return report;
}

}  // namespace lrlab
