#include "lrlab/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "lrlab/jsonl.hpp"
#include "lrlab/util.hpp"

namespace lrlab {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

namespace {

std::string trimmed(const std::string& s) { return trimmed_view(s); }

}  // namespace

std::vector<CaptionRecord> load_corpus(const std::string& path) {
    std::vector<CaptionRecord> records;
    std::unordered_set<std::string> seen;
    for_each_jsonl(path, [&](long lineno, const nlohmann::json& j) {
        CaptionRecord rec;
        rec.id = require_string_field(j, "id", path, lineno);
        rec.text = require_string_field(j, "text", path, lineno);
        if (rec.id.empty())
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": empty id");
        if (trimmed(rec.text).empty())
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": empty text for id \"" + rec.id + "\"");
        if (!seen.insert(rec.id).second)
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": duplicate id \"" + rec.id + "\"");
        records.push_back(std::move(rec));
    });
    return records;
}

std::vector<RelationRow> load_relation_manifest(const std::string& path) {
    std::vector<RelationRow> rows;
    for_each_jsonl(path, [&](long lineno, const nlohmann::json& j) {
        RelationRow row;
        row.subject = require_string_field(j, "subject", path, lineno);
        row.relation = require_string_field(j, "relation", path, lineno);
        row.object = require_string_field(j, "object", path, lineno);
        rows.push_back(std::move(row));
    });
    return rows;
}

std::vector<WordFrequencyReport> word_frequency(const std::vector<CaptionRecord>& corpus,
                                                const std::vector<std::string>& words) {
    if (words.empty()) throw std::invalid_argument("word_frequency: empty word list");
    for (const auto& w : words) {
        if (w.empty()) throw std::invalid_argument("word_frequency: empty query word");
        for (unsigned char c : w)
            if (std::isupper(c)) throw std::invalid_argument("word_frequency: query words must be lowercase: \"" + w + "\"");
    }

    std::vector<WordFrequencyReport> reports;
    reports.reserve(words.size());
    for (const auto& w : words) {
        WordFrequencyReport r;
        r.word = w;
        r.total = static_cast<long>(corpus.size());
        reports.push_back(r);
    }

    for (const auto& rec : corpus) {
        const auto tokens = split_words(rec.text);
        std::unordered_set<std::string> unique(tokens.begin(), tokens.end());
        for (size_t i = 0; i < words.size(); ++i)
            if (unique.count(words[i])) ++reports[i].count;
    }
    for (auto& r : reports) r.proportion = r.total == 0 ? 0.0 : static_cast<double>(r.count) / static_cast<double>(r.total);
    return reports;
}

DirectionHistogram direction_histogram(const std::vector<RelationRow>& manifest, const std::string& relation) {
    std::string rel;
    for (unsigned char c : relation) rel.push_back(static_cast<char>(std::tolower(c)));

    std::map<std::string, DirectionEntry> by_noun;
    for (const auto& row : manifest) {
        std::string r;
        for (unsigned char c : row.relation) r.push_back(static_cast<char>(std::tolower(c)));
        if (r != rel) continue;
        auto& subj = by_noun[row.subject];
        subj.noun = row.subject;
        ++subj.as_subject;
        auto& obj = by_noun[row.object];
        obj.noun = row.object;
        ++obj.as_object;
    }

    DirectionHistogram hist;
    hist.relation = rel;
    for (auto& [noun, entry] : by_noun) hist.entries.push_back(entry);
    return hist;
}

std::string word_frequency_csv(const std::vector<WordFrequencyReport>& reports) {
    std::ostringstream os;
    os << "word,count,total,proportion\n";
    for (const auto& r : reports)
        os << r.word << ',' << r.count << ',' << r.total << ',' << format_double(r.proportion) << '\n';
    return os.str();
}

std::string direction_histogram_csv(const DirectionHistogram& hist) {
    std::ostringstream os;
    os << "noun,as_subject,as_object\n";
    for (const auto& e : hist.entries) os << e.noun << ',' << e.as_subject << ',' << e.as_object << '\n';
    return os.str();
}

}  // namespace lrlab
