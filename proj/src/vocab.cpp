#include "lrlab/vocab.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "lrlab/corpus.hpp"

namespace lrlab {

Vocabulary::Vocabulary(const std::vector<std::string>& words, int max_len) : max_len_(max_len) {
    if (max_len < 1) throw std::invalid_argument("Vocabulary: max_len must be >= 1");
    std::set<std::string> uniq;
    for (const auto& w : words) {
        if (w.empty()) throw std::invalid_argument("Vocabulary: empty token");
        if (w == "<pad>" || w == "<unk>") continue;
        uniq.insert(w);
    }
    tokens_.push_back("<pad>");
    tokens_.push_back("<unk>");
    tokens_.insert(tokens_.end(), uniq.begin(), uniq.end());
}

Vocabulary Vocabulary::build(const std::vector<std::string>& nouns, int max_len) {
    std::vector<std::string> words = {"a",  "an",   "image", "of",    "next", "to",    "the",
                                      "left", "right", "and",   "over",  "under", "in",   "front",
                                      "behind"};
    for (const auto& noun : nouns)
        for (const auto& w : split_words(noun)) words.push_back(w);
    return Vocabulary(words, max_len);
}

int Vocabulary::id_of(const std::string& token) const {
    auto begin = tokens_.begin() + 2;  // specials are not sorted
    auto it = std::lower_bound(begin, tokens_.end(), token);
    if (it != tokens_.end() && *it == token) return static_cast<int>(it - tokens_.begin());
    if (token == "<pad>") return kPad;
    if (token == "<unk>") return kUnk;
    return kUnk;
}

std::vector<int> Vocabulary::tokenize(const std::string& text) const {
    std::vector<int> ids(static_cast<size_t>(max_len_), kPad);
    const auto words = split_words(text);
    for (size_t i = 0; i < words.size() && i < static_cast<size_t>(max_len_); ++i) ids[i] = id_of(words[i]);
    return ids;
}

long Vocabulary::count_unk(const std::string& text) const {
    long n = 0;
    const auto words = split_words(text);
    for (size_t i = 0; i < words.size() && i < static_cast<size_t>(max_len_); ++i)
        if (id_of(words[i]) == kUnk) ++n;
    return n;
}

}  // namespace lrlab
