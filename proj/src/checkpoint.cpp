#include "lrlab/checkpoint.hpp"

#include <json.hpp>

#include "lrlab/util.hpp"

namespace lrlab {

namespace {

nlohmann::json config_json(const ModelConfig& c) {
    return {{"scene_h", c.scene_h}, {"scene_w", c.scene_w}, {"patch", c.patch},     {"width", c.width},
            {"hidden", c.hidden},   {"embed_dim", c.embed_dim}, {"max_len", c.max_len}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.scene_h = j.at("scene_h").get<int>();
    c.scene_w = j.at("scene_w").get<int>();
    c.patch = j.at("patch").get<int>();
    c.width = j.at("width").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.max_len = j.at("max_len").get<int>();
    return c;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["config"] = config_json(config);
    j["vocab"] = {{"tokens", vocab.tokens()}, {"max_len", vocab.max_len()}};
    j["step"] = step;
    j["tag"] = tag;
    j["rng_state"] = rng_state;

    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& t : params.tensors()) {
        std::vector<double> values(params.data().begin() + static_cast<long>(t.offset),
                                   params.data().begin() + static_cast<long>(t.offset + t.size));
        tensors[t.name] = {{"shape", t.shape}, {"data", values}};
    }
    j["tensors"] = tensors;

    write_text_file_atomic(path, j.dump());
}

Checkpoint Checkpoint::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("checkpoint " + path + ": not valid JSON: " + e.what());
    }
    if (j.value("format", "") != kFormat)
        throw std::runtime_error("checkpoint " + path + ": unrecognized format id");
    if (j.value("version", -1) != kVersion)
        throw std::runtime_error("checkpoint " + path + ": unsupported version " + std::to_string(j.value("version", -1)));

    Checkpoint ck;
    ck.config = config_from_json(j.at("config"));
    ck.vocab = Vocabulary(j.at("vocab").at("tokens").get<std::vector<std::string>>(),
                          j.at("vocab").at("max_len").get<int>());
    if (ck.vocab.size() != static_cast<int>(j.at("vocab").at("tokens").size()))
        throw std::runtime_error("checkpoint " + path + ": vocabulary tokens are not unique");
    ck.step = j.at("step").get<long>();
    ck.tag = j.value("tag", "");
    ck.rng_state = j.value("rng_state", "");

    ck.params = ParamPack(ck.config, ck.vocab.size());
    for (const auto& t : ck.params.tensors()) {
        if (!j.at("tensors").contains(t.name))
            throw std::runtime_error("checkpoint " + path + ": missing tensor " + t.name);
        const auto& tj = j.at("tensors").at(t.name);
        const auto shape = tj.at("shape").get<std::vector<int>>();
        if (shape != t.shape)
            throw std::runtime_error("checkpoint " + path + ": tensor " + t.name + " has unexpected shape");
        const auto values = tj.at("data").get<std::vector<double>>();
        if (values.size() != t.size)
            throw std::runtime_error("checkpoint " + path + ": tensor " + t.name + " has wrong element count");
        std::copy(values.begin(), values.end(), ck.params.data().begin() + static_cast<long>(t.offset));
    }
    return ck;
}

}  // namespace lrlab
