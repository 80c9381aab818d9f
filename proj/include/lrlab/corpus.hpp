#pragma once

#include <string>
#include <vector>

namespace lrlab {

struct CaptionRecord {
    std::string id;
    std::string text;
};

struct WordFrequencyReport {
    std::string word;
    long count = 0;       // captions containing the word at least once
    long total = 0;       // corpus size
    double proportion = 0.0;
};

struct DirectionEntry {
    std::string noun;
    long as_subject = 0;
    long as_object = 0;
};

struct DirectionHistogram {
    std::string relation;
    std::vector<DirectionEntry> entries;  // sorted by noun
};

struct RelationRow {
    std::string subject;
    std::string relation;
    std::string object;
};

// lowercase alnum runs; everything else is a boundary
std::vector<std::string> split_words(const std::string& text);

// JSONL, one {"id", "text"} object per line; blank lines skipped.
// Malformed lines and duplicate ids fail with the 1-based line number.
std::vector<CaptionRecord> load_corpus(const std::string& path);

// JSONL with {"subject", "relation", "object"}
std::vector<RelationRow> load_relation_manifest(const std::string& path);

// whole-token membership counts: a caption counts once per queried word
std::vector<WordFrequencyReport> word_frequency(const std::vector<CaptionRecord>& corpus,
                                                const std::vector<std::string>& words);

DirectionHistogram direction_histogram(const std::vector<RelationRow>& manifest, const std::string& relation);

std::string word_frequency_csv(const std::vector<WordFrequencyReport>& reports);
std::string direction_histogram_csv(const DirectionHistogram& hist);

}  // namespace lrlab
