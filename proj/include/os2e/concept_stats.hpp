#pragma once
// Probability objects estimated from concept responses: image-level responses,
// p(concept|event), event priors, concept marginals, Bayes posteriors p(event|concept),
// and conditional entropies H(E|concept).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "os2e/common.hpp"

namespace os2e {

enum class ConceptKind { object, scene };

std::string to_string(ConceptKind kind);
ConceptKind concept_kind_from_string(const std::string& s);

/// Tolerance applied to externally supplied score rows.
inline constexpr double kIngestSimplexTol = 1e-6;
/// Tolerance for tables produced internally.
inline constexpr double kInternalSimplexTol = 1e-9;

/// N images x C concept classes; each row is a distribution over concepts.
struct ResponseMatrix {
    Matrix values;
    std::vector<std::string> class_ids;
    std::vector<std::string> image_ids;
    ConceptKind kind = ConceptKind::object;

    std::size_t num_images() const { return values.rows; }
    std::size_t num_classes() const { return values.cols; }

    /// Throws "unnormalized scores" naming the first offending row.
    void validate(double tol = kInternalSimplexTol) const;
};

struct EventLabels {
    std::vector<std::size_t> labels;
    std::size_t num_events = 0;

    void validate() const;
};

/// cond is C x M (column e is p(.|e)); prior[e] = counts[e] / total.
struct ConditionalTable {
    Matrix cond;
    std::vector<double> prior;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
    std::vector<std::string> class_ids;

    std::size_t num_classes() const { return cond.rows; }
    std::size_t num_events() const { return cond.cols; }

    void validate(double tol = kInternalSimplexTol) const;
};

/// post is C x M (row o is p(.|o)). Rows of classes with zero marginal are uniform and masked.
struct PosteriorTable {
    Matrix post;
    std::vector<double> marginal;
    std::vector<bool> undefined_mask;

    std::size_t num_classes() const { return post.rows; }
    std::size_t num_events() const { return post.cols; }
    std::size_t num_unmasked() const;
};

/// Mean of per-crop score rows.
std::vector<double> aggregate_crop_scores(const Matrix& crop_scores);

/// One response row per image, each from aggregate_crop_scores over that image's crops.
ResponseMatrix build_response_matrix(std::span<const Matrix> per_image_crops,
                                     std::vector<std::string> class_ids, ConceptKind kind);

ConditionalTable estimate_conditional(const ResponseMatrix& responses, const EventLabels& labels);

std::vector<double> marginalize(const ConditionalTable& table);

PosteriorTable bayes_posterior(const ConditionalTable& table);

/// H = -sum p log2 p, in bits.
double conditional_entropy(std::span<const double> posterior_row);

/// Unit Euclidean norm; the zero vector is returned unchanged.
std::vector<double> l2_normalize(std::span<const double> v);

/// Row-wise l2 normalization of a response matrix's values.
Matrix l2_normalize_rows(const Matrix& m);

}  // namespace os2e
