// lrlab: generate synthetic left/right scene datasets, train the dual
// encoder on them, and run the evaluation/analysis suite.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "lrlab/checkpoint.hpp"
#include "lrlab/corpus.hpp"
#include "lrlab/eval.hpp"
#include "lrlab/scenegen.hpp"
#include "lrlab/trainer.hpp"
#include "lrlab/util.hpp"

namespace {

using nlohmann::json;

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    try {
        return json::parse(lrlab::read_text_file(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config " + path + ": not valid JSON: " + e.what());
    }
}

template <typename T>
void from_section(const json& cfg, const char* section, const char* key, T& out) {
    if (cfg.contains(section) && cfg[section].contains(key)) out = cfg[section][key].get<T>();
}

struct EvalOptions {
    int noun_pairs = 200;
    int template_images = 500;
    uint64_t seed = 1;
};

lrlab::SceneGenConfig scenegen_config(const json& cfg) {
    lrlab::SceneGenConfig c;
    from_section(cfg, "generate", "nouns_path", c.nouns_path);
    from_section(cfg, "generate", "scene_size", c.scene_size);
    from_section(cfg, "generate", "sprite_size", c.sprite_size);
    from_section(cfg, "generate", "variants_per_noun", c.variants_per_noun);
    from_section(cfg, "generate", "n_backgrounds", c.n_backgrounds);
    from_section(cfg, "generate", "size_min", c.size_min);
    from_section(cfg, "generate", "size_max", c.size_max);
    from_section(cfg, "generate", "n_plain", c.n_plain);
    from_section(cfg, "generate", "n_contrastive_pairs", c.n_contrastive_pairs);
    from_section(cfg, "generate", "n_heldout_pairs", c.n_heldout_pairs);
    from_section(cfg, "generate", "n_triplets", c.n_triplets);
    from_section(cfg, "generate", "seed", c.seed);
    return c;
}

lrlab::ModelConfig model_config(const json& cfg) {
    lrlab::ModelConfig c;
    from_section(cfg, "model", "scene_h", c.scene_h);
    from_section(cfg, "model", "scene_w", c.scene_w);
    from_section(cfg, "model", "patch", c.patch);
    from_section(cfg, "model", "width", c.width);
    from_section(cfg, "model", "hidden", c.hidden);
    from_section(cfg, "model", "embed_dim", c.embed_dim);
    from_section(cfg, "model", "max_len", c.max_len);
    return c;
}

lrlab::TrainConfig train_config(const json& cfg) {
    lrlab::TrainConfig c;
    from_section(cfg, "train", "learning_rate", c.learning_rate);
    from_section(cfg, "train", "weight_decay", c.weight_decay);
    from_section(cfg, "train", "warmup_steps", c.warmup_steps);
    from_section(cfg, "train", "batch_size", c.batch_size);
    from_section(cfg, "train", "cs", c.cs);
    from_section(cfg, "train", "epochs", c.epochs);
    from_section(cfg, "train", "seed", c.seed);
    return c;
}

EvalOptions eval_options(const json& cfg) {
    EvalOptions c;
    from_section(cfg, "eval", "noun_pairs", c.noun_pairs);
    from_section(cfg, "eval", "template_images", c.template_images);
    from_section(cfg, "eval", "seed", c.seed);
    return c;
}

json echo_scenegen(const lrlab::SceneGenConfig& c) {
    return {{"nouns_path", c.nouns_path},
            {"scene_size", c.scene_size},
            {"sprite_size", c.sprite_size},
            {"variants_per_noun", c.variants_per_noun},
            {"n_backgrounds", c.n_backgrounds},
            {"size_min", c.size_min},
            {"size_max", c.size_max},
            {"n_plain", c.n_plain},
            {"n_contrastive_pairs", c.n_contrastive_pairs},
            {"n_heldout_pairs", c.n_heldout_pairs},
            {"n_triplets", c.n_triplets},
            {"seed", c.seed}};
}

json echo_model(const lrlab::ModelConfig& c) {
    return {{"scene_h", c.scene_h}, {"scene_w", c.scene_w},      {"patch", c.patch},     {"width", c.width},
            {"hidden", c.hidden},   {"embed_dim", c.embed_dim},  {"max_len", c.max_len}};
}

json echo_train(const lrlab::TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"weight_decay", c.weight_decay},
            {"warmup_steps", c.warmup_steps},
            {"batch_size", c.batch_size},
            {"cs", c.cs},
            {"epochs", c.epochs},
            {"seed", c.seed}};
}

json echo_eval(const EvalOptions& c) {
    return {{"noun_pairs", c.noun_pairs}, {"template_images", c.template_images}, {"seed", c.seed}};
}

void write_config_echo(const std::string& out_dir, const json& echo) {
    std::filesystem::create_directories(out_dir);
    lrlab::write_text_file_atomic(out_dir + "/config.echo.json", echo.dump(2) + "\n");
}

int cmd_generate(const lrlab::SceneGenConfig& cfg, const std::string& out_dir, const std::string& sprite_dir) {
    write_config_echo(out_dir, json{{"command", "generate"}, {"generate", echo_scenegen(cfg)}});
    const auto summary = lrlab::generate_dataset(cfg, out_dir, sprite_dir);
    std::printf("dataset written to %s\n", out_dir.c_str());
    std::printf("  nouns: %d (held-out pairs: %d)\n", summary.n_nouns, summary.n_heldout_pairs);
    std::printf("  plain pool: %ld\n", summary.n_plain);
    std::printf("  contrastive pairs: %ld (%ld samples)\n", summary.n_contrastive_pairs,
                2 * summary.n_contrastive_pairs);
    std::printf("  held-out triplets: %ld\n", summary.n_triplets);
    return 0;
}

int cmd_train(const lrlab::ModelConfig& mcfg, const lrlab::TrainConfig& tcfg, const std::string& dataset_dir,
              const std::string& out_dir) {
    tcfg.validate();
    mcfg.validate();
    write_config_echo(out_dir, json{{"command", "train"}, {"model", echo_model(mcfg)}, {"train", echo_train(tcfg)}});

    const auto data = lrlab::load_training_data(dataset_dir, mcfg);
    std::printf("loaded %zu plain samples, %zu contrastive pairs, vocab %d\n", data.plain.size(), data.pairs.size(),
                data.vocab.size());
    const auto report = lrlab::train(data, mcfg, tcfg, out_dir);
    for (const auto& e : report.epochs)
        std::printf("epoch %d: mean loss %.6f (lr %.6g)\n", e.epoch, e.mean_loss, e.lr_last);
    std::printf("checkpoint: %s\n", report.checkpoint_path.c_str());
    std::printf("train log: %s\n", report.log_path.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir, const std::string& out_dir,
             const EvalOptions& opts) {
    const auto ck = lrlab::Checkpoint::load(checkpoint_path);
    write_config_echo(out_dir, json{{"command", "eval"},
                                    {"checkpoint", checkpoint_path},
                                    {"dataset", dataset_dir},
                                    {"model", echo_model(ck.config)},
                                    {"eval", echo_eval(opts)}});
    const lrlab::DatasetPaths paths{dataset_dir};

    const auto triplets = lrlab::load_triplets(paths.triplets_path());
    const auto report = lrlab::rank_triplets(ck.params, ck.vocab, triplets, dataset_dir);
    lrlab::write_text_file_atomic(out_dir + "/accuracy.csv", lrlab::accuracy_csv(report));

    const auto nouns = lrlab::load_noun_list(paths.nouns_path());
    const auto pairs = lrlab::sample_noun_pairs(nouns, opts.noun_pairs, opts.seed);
    auto sim_rows = lrlab::opposite_similarity(ck.params, ck.vocab, pairs);

    // images whose manifest row certifies noun_a left of noun_b
    const auto manifest = lrlab::load_manifest(paths.manifest_path());
    std::vector<lrlab::ImageU8> left_images;
    std::vector<lrlab::TemplateImage> template_images;
    for (const auto& rec : manifest) {
        if (rec.relation != "left_of" || rec.noun_b.empty()) continue;
        if (static_cast<int>(template_images.size()) >= opts.template_images) break;
        left_images.push_back(lrlab::read_png_rgb8(paths.image_path(rec.id)));
        template_images.push_back({nullptr, rec.noun_a, rec.noun_b});
    }
    for (size_t i = 0; i < template_images.size(); ++i) template_images[i].image = &left_images[i];
    if (!template_images.empty()) {
        const auto tpl_rows = lrlab::template_similarity(ck.params, ck.vocab, template_images, lrlab::kEvalTemplates);
        sim_rows.insert(sim_rows.end(), tpl_rows.begin(), tpl_rows.end());
    }
    lrlab::write_text_file_atomic(out_dir + "/similarity.csv", lrlab::similarity_csv(sim_rows));

    // relation map around the first two nouns, mirroring the caption sets
    // behind the embedding-space plots
    const std::string& n0 = nouns.at(0);
    const std::string& n1 = nouns.at(1);
    const std::vector<std::string> captions = {
        "a " + n0,
        "a " + n1,
        "a " + n0 + " and a " + n1,
        "a " + n0 + " to the left of a " + n1,
        "a " + n0 + " to the right of a " + n1,
        "a " + n0 + " over a " + n1,
        "a " + n0 + " under a " + n1,
        "a " + n0 + " in front of a " + n1,
        "a " + n0 + " behind a " + n1,
    };
    const auto proj = lrlab::project_embeddings(ck.params, ck.vocab, captions);
    lrlab::write_text_file_atomic(out_dir + "/projection.csv", lrlab::projection_csv(proj));
    lrlab::write_text_file_atomic(out_dir + "/projection.svg", lrlab::projection_svg(proj));

    std::printf("%s", lrlab::accuracy_csv(report).c_str());
    if (report.caption_tokens > 0)
        std::printf("unk tokens: %ld of %ld (%.4f)\n", report.unk_tokens, report.caption_tokens,
                    static_cast<double>(report.unk_tokens) / static_cast<double>(report.caption_tokens));
    std::printf("reports written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_corpus(const std::string& corpus_path, const std::vector<std::string>& words,
               const std::string& relations_path, const std::string& relation, const std::string& out_dir) {
    if (!out_dir.empty())
        write_config_echo(out_dir, json{{"command", "corpus"},
                                        {"corpus", corpus_path},
                                        {"words", words},
                                        {"relations", relations_path},
                                        {"relation", relation}});
    if (!corpus_path.empty()) {
        const auto corpus = lrlab::load_corpus(corpus_path);
        const auto reports = lrlab::word_frequency(corpus, words);
        const std::string csv = lrlab::word_frequency_csv(reports);
        std::printf("%s", csv.c_str());
        if (!out_dir.empty()) lrlab::write_text_file_atomic(out_dir + "/word_frequency.csv", csv);
    }
    if (!relations_path.empty()) {
        if (relation.empty()) throw std::runtime_error("--relation is required with --relations");
        const auto manifest = lrlab::load_relation_manifest(relations_path);
        const auto hist = lrlab::direction_histogram(manifest, relation);
        const std::string csv = lrlab::direction_histogram_csv(hist);
        std::printf("%s", csv.c_str());
        if (!out_dir.empty()) lrlab::write_text_file_atomic(out_dir + "/direction_histogram.csv", csv);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"left/right spatial relation laboratory for dual-encoder contrastive models"};
    app.require_subcommand(1);

    std::string config_path, out_dir, dataset_dir, checkpoint_path, sprite_dir;
    std::string corpus_path, relations_path, relation;
    std::vector<std::string> words;
    std::optional<uint64_t> seed_flag;

    auto* gen = app.add_subcommand("generate", "generate a synthetic contrastive dataset");
    gen->add_option("--config", config_path, "JSON config file");
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    gen->add_option("--seed", seed_flag, "override the config seed");
    std::optional<std::string> nouns_flag;
    std::optional<long> n_plain_flag, n_pairs_flag, n_triplets_flag;
    gen->add_option("--nouns", nouns_flag, "noun list file (one noun per line)");
    gen->add_option("--sprites", sprite_dir, "directory of external RGBA sprite cutouts (<noun>_<variant>.png)");
    gen->add_option("--n-plain", n_plain_flag, "plain pool size");
    gen->add_option("--n-pairs", n_pairs_flag, "contrastive pair count");
    gen->add_option("--n-triplets", n_triplets_flag, "held-out triplet count");

    auto* tr = app.add_subcommand("train", "train the dual encoder on a generated dataset");
    tr->add_option("--config", config_path, "JSON config file");
    tr->add_option("--dataset", dataset_dir, "dataset directory from `generate`")->required();
    tr->add_option("--out", out_dir, "output directory for checkpoint and log")->required();
    tr->add_option("--seed", seed_flag, "override the config seed");
    std::optional<int> cs_flag, epochs_flag, batch_flag;
    std::optional<double> lr_flag;
    tr->add_option("--cs", cs_flag, "contrastive samples per batch (0 = ablation baseline)");
    tr->add_option("--epochs", epochs_flag, "training epochs");
    tr->add_option("--batch-size", batch_flag, "mini-batch size");
    tr->add_option("--lr", lr_flag, "learning rate");

    auto* ev = app.add_subcommand("eval", "score triplets and export the analysis reports");
    ev->add_option("--config", config_path, "JSON config file");
    ev->add_option("--checkpoint", checkpoint_path, "checkpoint file from `train`")->required();
    ev->add_option("--dataset", dataset_dir, "dataset directory with triplets.jsonl")->required();
    ev->add_option("--out", out_dir, "output directory for reports")->required();
    ev->add_option("--seed", seed_flag, "override the eval seed");
    std::optional<int> noun_pairs_flag, template_images_flag;
    ev->add_option("--noun-pairs", noun_pairs_flag, "noun pairs for the similarity table");
    ev->add_option("--template-images", template_images_flag, "image budget for the template table");

    auto* co = app.add_subcommand("corpus", "caption corpus statistics");
    co->add_option("--corpus", corpus_path, "JSONL caption corpus ({id, text} per line)");
    co->add_option("--words", words, "words for the frequency report")->delimiter(',');
    co->add_option("--relations", relations_path, "JSONL relation manifest ({subject, relation, object})");
    co->add_option("--relation", relation, "relation for the direction histogram");
    co->add_option("--out", out_dir, "optional output directory for CSVs");

    CLI11_PARSE(app, argc, argv);

    try {
        const json cfg = load_config_file(config_path);
        if (gen->parsed()) {
            lrlab::SceneGenConfig c = scenegen_config(cfg);
            if (seed_flag) c.seed = *seed_flag;
            if (nouns_flag) c.nouns_path = *nouns_flag;
            if (n_plain_flag) c.n_plain = *n_plain_flag;
            if (n_pairs_flag) c.n_contrastive_pairs = *n_pairs_flag;
            if (n_triplets_flag) c.n_triplets = *n_triplets_flag;
            return cmd_generate(c, out_dir, sprite_dir);
        }
        if (tr->parsed()) {
            lrlab::ModelConfig mc = model_config(cfg);
            lrlab::TrainConfig tc = train_config(cfg);
            if (seed_flag) tc.seed = *seed_flag;
            if (cs_flag) tc.cs = *cs_flag;
            if (epochs_flag) tc.epochs = *epochs_flag;
            if (batch_flag) tc.batch_size = *batch_flag;
            if (lr_flag) tc.learning_rate = *lr_flag;
            return cmd_train(mc, tc, dataset_dir, out_dir);
        }
        if (ev->parsed()) {
            EvalOptions opts = eval_options(cfg);
            if (seed_flag) opts.seed = *seed_flag;
            if (noun_pairs_flag) opts.noun_pairs = *noun_pairs_flag;
            if (template_images_flag) opts.template_images = *template_images_flag;
            return cmd_eval(checkpoint_path, dataset_dir, out_dir, opts);
        }
        if (co->parsed()) {
            if (corpus_path.empty() && relations_path.empty())
                throw std::runtime_error("corpus: provide --corpus and/or --relations");
            if (!corpus_path.empty() && words.empty())
                throw std::runtime_error("corpus: --words is required with --corpus");
            return cmd_corpus(corpus_path, words, relations_path, relation, out_dir);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
