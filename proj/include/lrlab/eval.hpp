#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lrlab/encoder.hpp"
#include "lrlab/scenegen.hpp"
#include "lrlab/vocab.hpp"

namespace lrlab {

struct RelationAccuracy {
    std::string relation;
    long total = 0;
    long correct = 0;
    long ties = 0;

    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct AccuracyReport {
    RelationAccuracy left{"left of"};
    RelationAccuracy right{"right of"};
    RelationAccuracy overall{"overall"};
    long unk_tokens = 0;     // UNK occurrences across all scored captions
    long caption_tokens = 0;
};

// correct iff cosine(image, pos) > cosine(image, neg); exact ties count as
// incorrect and are tallied. Buckets follow the direction word asserted by
// caption_pos. Triplets score in parallel, aggregation order is fixed.
AccuracyReport rank_triplets(const ParamPack& params, const Vocabulary& vocab,
                             const std::vector<TripletRecord>& triplets, const std::string& dataset_dir);

struct SimilarityRow {
    std::string label;
    double mean = 0.0;
    double stddev = 0.0;  // population
};

// rows "s_opposite": cos of "a X to the right of a Y" vs "a X to the left
// of a Y"; "s_nouns": cos of "a X" vs "a Y"
std::vector<SimilarityRow> opposite_similarity(const ParamPack& params, const Vocabulary& vocab,
                                               const std::vector<std::pair<std::string, std::string>>& noun_pairs);

// seeded ordered pairs of distinct nouns for the similarity tables
std::vector<std::pair<std::string, std::string>> sample_noun_pairs(const std::vector<std::string>& nouns, int count,
                                                                   uint64_t seed);

struct TemplateImage {
    const ImageU8* image = nullptr;
    std::string noun_a;  // known to be left of noun_b
    std::string noun_b;
};

extern const std::vector<std::string> kEvalTemplates;

// per template: mean/std of cos(image, caption with {A},{B} filled in)
std::vector<SimilarityRow> template_similarity(const ParamPack& params, const Vocabulary& vocab,
                                               const std::vector<TemplateImage>& images,
                                               const std::vector<std::string>& templates);

struct ProjectionPoint {
    std::string label;
    double x = 0.0;
    double y = 0.0;
};

struct Projection2D {
    std::vector<ProjectionPoint> points;
    double var_fraction_x = 0.0;
    double var_fraction_y = 0.0;
};

// caption embeddings centered and projected onto the top-2 principal
// components; each axis is signed so its first non-negligible loading is
// positive
Projection2D project_embeddings(const ParamPack& params, const Vocabulary& vocab,
                                const std::vector<std::string>& captions);

std::string accuracy_csv(const AccuracyReport& report);
std::string similarity_csv(const std::vector<SimilarityRow>& rows);
std::string projection_csv(const Projection2D& proj);
std::string projection_svg(const Projection2D& proj);

}  // namespace lrlab
