#pragma once

#include <string>
#include <vector>

namespace lrlab {

// Closed word-level vocabulary. PAD is index 0, UNK index 1; the remaining
// tokens are sorted for a stable order.
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocabulary() = default;
    Vocabulary(const std::vector<std::string>& words, int max_len);

    // template words, the relation words used by the analysis plots, and
    // the supplied nouns
    static Vocabulary build(const std::vector<std::string>& nouns, int max_len);

    int size() const { return static_cast<int>(tokens_.size()); }
    int max_len() const { return max_len_; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(int id) const { return tokens_[static_cast<size_t>(id)]; }
    int id_of(const std::string& token) const;  // kUnk if absent

    // lowercase, split on non-alphanumeric, pad/truncate to max_len
    std::vector<int> tokenize(const std::string& text) const;

    long count_unk(const std::string& text) const;

  private:
    std::vector<std::string> tokens_;
    int max_len_ = 0;
};

}  // namespace lrlab
