#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace lrlab {

inline std::string trimmed_view(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Walks a JSONL file, skipping blank lines; cb gets (1-based line number,
// parsed value). Parse failures throw with the line number.
template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& cb) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trimmed_view(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        cb(lineno, j);
    }
}

inline std::string require_string_field(const nlohmann::json& j, const char* field, const std::string& path,
                                        long lineno) {
    if (!j.contains(field) || !j[field].is_string())
        throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": missing or non-string field \"" +
                                 std::string(field) + "\"");
    return j[field].get<std::string>();
}

}  // namespace lrlab
