#include "lrlab/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "lrlab/corpus.hpp"
#include "lrlab/util.hpp"

namespace lrlab {

namespace {

struct TripletOutcome {
    bool correct = false;
    bool tie = false;
    bool is_left = false;
    bool is_right = false;
};

bool contains_word(const std::vector<std::string>& words, const char* w) {
    return std::find(words.begin(), words.end(), w) != words.end();
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

std::string fill_template(const std::string& tpl, const std::string& a, const std::string& b) {
    std::string out = tpl;
    auto replace_all = [&](const std::string& from, const std::string& to) {
        size_t pos = 0;
        while ((pos = out.find(from, pos)) != std::string::npos) {
            out.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all("{A}", a);
    replace_all("{B}", b);
    return out;
}

}  // namespace

AccuracyReport rank_triplets(const ParamPack& params, const Vocabulary& vocab,
                             const std::vector<TripletRecord>& triplets, const std::string& dataset_dir) {
    if (triplets.empty()) throw std::runtime_error("rank_triplets: empty triplet set");
    const DatasetPaths paths{dataset_dir};

    AccuracyReport report;
    std::vector<TripletOutcome> outcomes(triplets.size());
    std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(triplets.size()); ++i) {
        try {
            const auto& t = triplets[static_cast<size_t>(i)];
            const ImageU8 image = read_png_rgb8(paths.image_path(t.image_id));
            const auto e_img = encode_image(params, image);
            const auto e_pos = encode_text(params, vocab.tokenize(t.caption_pos));
            const auto e_neg = encode_text(params, vocab.tokenize(t.caption_neg));
            const double cp = cosine(e_img, e_pos);
            const double cn = cosine(e_img, e_neg);

            TripletOutcome& o = outcomes[static_cast<size_t>(i)];
            o.tie = cp == cn;
            o.correct = cp > cn;
            const auto words = split_words(t.caption_pos);
            o.is_left = contains_word(words, "left");
            o.is_right = contains_word(words, "right");
        } catch (...) {
#pragma omp critical(lrlab_rank_error)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    for (size_t i = 0; i < triplets.size(); ++i) {
        const auto& o = outcomes[i];
        report.overall.total++;
        report.overall.correct += o.correct ? 1 : 0;
        report.overall.ties += o.tie ? 1 : 0;
        if (o.is_left && !o.is_right) {
            report.left.total++;
            report.left.correct += o.correct ? 1 : 0;
            report.left.ties += o.tie ? 1 : 0;
        } else if (o.is_right && !o.is_left) {
            report.right.total++;
            report.right.correct += o.correct ? 1 : 0;
            report.right.ties += o.tie ? 1 : 0;
        }
        report.unk_tokens += vocab.count_unk(triplets[i].caption_pos) + vocab.count_unk(triplets[i].caption_neg);
        report.caption_tokens += static_cast<long>(split_words(triplets[i].caption_pos).size()) +
                                 static_cast<long>(split_words(triplets[i].caption_neg).size());
    }
    return report;
}

std::vector<SimilarityRow> opposite_similarity(const ParamPack& params, const Vocabulary& vocab,
                                               const std::vector<std::pair<std::string, std::string>>& noun_pairs) {
    if (noun_pairs.empty()) throw std::runtime_error("opposite_similarity: empty noun pair list");
    std::vector<double> s_opp(noun_pairs.size()), s_noun(noun_pairs.size());
    std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(noun_pairs.size()); ++i) {
        try {
            const auto& [x, y] = noun_pairs[static_cast<size_t>(i)];
            if (x == y) throw std::runtime_error("opposite_similarity: noun pair must be distinct, got \"" + x + "\"");
            const auto right = encode_text(params, vocab.tokenize("a " + x + " to the right of a " + y));
            const auto left = encode_text(params, vocab.tokenize("a " + x + " to the left of a " + y));
            const auto ex = encode_text(params, vocab.tokenize("a " + x));
            const auto ey = encode_text(params, vocab.tokenize("a " + y));
            s_opp[static_cast<size_t>(i)] = cosine(right, left);
            s_noun[static_cast<size_t>(i)] = cosine(ex, ey);
        } catch (...) {
#pragma omp critical(lrlab_opp_error)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    const auto [om, os] = mean_std(s_opp);
    const auto [nm, ns] = mean_std(s_noun);
    return {{"s_opposite", om, os}, {"s_nouns", nm, ns}};
}

std::vector<std::pair<std::string, std::string>> sample_noun_pairs(const std::vector<std::string>& nouns, int count,
                                                                   uint64_t seed) {
    const long n = static_cast<long>(nouns.size());
    const long available = n * (n - 1);
    if (count < 1) throw std::invalid_argument("sample_noun_pairs: count must be >= 1");
    if (count > available)
        throw std::runtime_error("sample_noun_pairs: requested " + std::to_string(count) + " pairs, only " +
                                 std::to_string(available) + " ordered pairs exist");
    Rng rng(mix64(seed, 0x706169727373ULL));
    const auto idx = rng.sample_without_replacement(static_cast<int>(available), count);
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(static_cast<size_t>(count));
    for (int k : idx) {
        const long i = k / (n - 1);
        long j = k % (n - 1);
        if (j >= i) ++j;
        pairs.emplace_back(nouns[static_cast<size_t>(i)], nouns[static_cast<size_t>(j)]);
    }
    return pairs;
}

const std::vector<std::string> kEvalTemplates = {
    "an image of a {A}",
    "an image of a {A} next to a {B}",
    "an image of a {A} and a {B}",
    "an image of a {A} to the left of a {B}",
};

std::vector<SimilarityRow> template_similarity(const ParamPack& params, const Vocabulary& vocab,
                                               const std::vector<TemplateImage>& images,
                                               const std::vector<std::string>& templates) {
    if (images.empty()) throw std::runtime_error("template_similarity: no images supplied");
    for (const auto& tpl : templates)
        if (tpl.find("{A}") == std::string::npos)
            throw std::runtime_error("template_similarity: template placeholder missing in \"" + tpl + "\"");

    // image embeddings are shared across templates
    std::vector<const ImageU8*> ptrs(images.size());
    for (size_t i = 0; i < images.size(); ++i) ptrs[i] = images[i].image;
    const std::vector<double> img_emb = embed_images(params, ptrs);
    const int d = params.config().embed_dim;

    std::vector<SimilarityRow> rows;
    for (const auto& tpl : templates) {
        std::vector<double> sims(images.size());
        std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static)
        for (long i = 0; i < static_cast<long>(images.size()); ++i) {
            try {
                const auto& im = images[static_cast<size_t>(i)];
                const auto e_txt = encode_text(params, vocab.tokenize(fill_template(tpl, im.noun_a, im.noun_b)));
                double acc = 0.0;
                for (int k = 0; k < d; ++k) acc += img_emb[static_cast<size_t>(i) * d + k] * e_txt[static_cast<size_t>(k)];
                sims[static_cast<size_t>(i)] = acc;
            } catch (...) {
#pragma omp critical(lrlab_tpl_error)
                if (!err) err = std::current_exception();
            }
        }
        if (err) std::rethrow_exception(err);
        const auto [m, s] = mean_std(sims);
        rows.push_back({"template: " + tpl, m, s});
    }
    return rows;
}

Projection2D project_embeddings(const ParamPack& params, const Vocabulary& vocab,
                                const std::vector<std::string>& captions) {
    const long n = static_cast<long>(captions.size());
    if (n < 3) throw std::runtime_error("project_embeddings: need at least 3 captions, got " + std::to_string(n));
    const int d = params.config().embed_dim;

    std::vector<std::vector<int>> token_rows(captions.size());
    std::vector<const std::vector<int>*> token_ptrs(captions.size());
    for (size_t i = 0; i < captions.size(); ++i) {
        token_rows[i] = vocab.tokenize(captions[i]);
        token_ptrs[i] = &token_rows[i];
    }
    const std::vector<double> emb = embed_texts(params, token_ptrs);

    Eigen::MatrixXd X(n, d);
    for (long i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) X(i, k) = emb[static_cast<size_t>(i) * d + k];
    const Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;

    const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("project_embeddings: eigendecomposition failed");

    const Eigen::VectorXd evals = solver.eigenvalues();  // ascending
    double total = 0.0;
    for (int k = 0; k < d; ++k) total += std::max(0.0, evals(k));

    Projection2D out;
    Eigen::VectorXd axes[2];
    double lambda[2];
    for (int a = 0; a < 2; ++a) {
        const int idx = d - 1 - a;
        axes[a] = solver.eigenvectors().col(idx);
        lambda[a] = std::max(0.0, evals(idx));
        for (int k = 0; k < d; ++k) {
            if (std::abs(axes[a](k)) > 1e-12) {
                if (axes[a](k) < 0.0) axes[a] = -axes[a];
                break;
            }
        }
    }
    out.var_fraction_x = total > 0.0 ? lambda[0] / total : 0.0;
    out.var_fraction_y = total > 0.0 ? lambda[1] / total : 0.0;

    for (long i = 0; i < n; ++i) {
        ProjectionPoint pt;
        pt.label = captions[static_cast<size_t>(i)];
        pt.x = X.row(i).dot(axes[0]);
        pt.y = X.row(i).dot(axes[1]);
        out.points.push_back(std::move(pt));
    }
    return out;
}

std::string accuracy_csv(const AccuracyReport& report) {
    std::ostringstream os;
    os << "relation,total,correct,ties,accuracy\n";
    for (const RelationAccuracy* r : {&report.left, &report.right, &report.overall})
        os << r->relation << ',' << r->total << ',' << r->correct << ',' << r->ties << ','
           << format_double(r->accuracy()) << '\n';
    return os.str();
}

std::string similarity_csv(const std::vector<SimilarityRow>& rows) {
    std::ostringstream os;
    os << "label,mean,std\n";
    for (const auto& r : rows) os << r.label << ',' << format_double(r.mean) << ',' << format_double(r.stddev) << '\n';
    return os.str();
}

std::string projection_csv(const Projection2D& proj) {
    std::ostringstream os;
    os << "label,x,y\n";
    for (const auto& p : proj.points) os << p.label << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
    return os.str();
}

std::string projection_svg(const Projection2D& proj) {
    const double W = 640.0, H = 480.0, margin = 60.0;
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    for (const auto& p : proj.points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const double xspan = xmax - xmin > 1e-12 ? xmax - xmin : 1.0;
    const double yspan = ymax - ymin > 1e-12 ? ymax - ymin : 1.0;
    auto sx = [&](double x) { return margin + (x - xmin) / xspan * (W - 2 * margin); };
    auto sy = [&](double y) { return H - margin - (y - ymin) / yspan * (H - 2 * margin); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << " " << H << "\">\n";
    os << "  <rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "  <text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"13\">caption embeddings, "
          "top-2 principal components (var "
       << format_fixed(proj.var_fraction_x, 3) << " / " << format_fixed(proj.var_fraction_y, 3) << ")</text>\n";
    for (const auto& p : proj.points) {
        os << "  <circle cx=\"" << format_fixed(sx(p.x), 2) << "\" cy=\"" << format_fixed(sy(p.y), 2)
           << "\" r=\"4\" fill=\"#1f6fb2\"/>\n";
        os << "  <text x=\"" << format_fixed(sx(p.x) + 6, 2) << "\" y=\"" << format_fixed(sy(p.y) - 6, 2)
           << "\" font-family=\"sans-serif\" font-size=\"11\">" << p.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace lrlab
