#include "os2e/concept_stats.hpp"

#include <algorithm>
#include <cmath>

namespace os2e {

std::string to_string(ConceptKind kind) {
    return kind == ConceptKind::object ? "object" : "scene";
}

ConceptKind concept_kind_from_string(const std::string& s) {
    if (s == "object") return ConceptKind::object;
    if (s == "scene") return ConceptKind::scene;
    throw Error("unknown concept kind: " + s);
}

void ResponseMatrix::validate(double tol) const {
    if (!class_ids.empty() && class_ids.size() != values.cols) {
        throw Error("class_ids size does not match response width");
    }
    for (std::size_t i = 0; i < values.rows; ++i) {
        if (!on_simplex(values.row(i), tol)) {
            throw Error("unnormalized scores (row " + std::to_string(i) + ")");
        }
    }
}

void EventLabels::validate() const {
    if (num_events == 0) throw Error("event count must be positive");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_events) {
            throw Error("event label out of range at index " + std::to_string(i));
        }
    }
}

void ConditionalTable::validate(double tol) const {
    const std::size_t c = cond.rows, m = cond.cols;
    if (prior.size() != m || counts.size() != m) throw Error("conditional table: dimension mismatch");
    for (std::size_t e = 0; e < m; ++e) {
        double col = 0.0;
        for (std::size_t o = 0; o < c; ++o) {
            if (!(cond(o, e) >= 0.0)) throw Error("conditional table: negative entry");
            col += cond(o, e);
        }
        if (std::abs(col - 1.0) > tol) throw Error("conditional table: column not normalized");
    }
    if (!on_simplex(prior, tol)) throw Error("conditional table: prior not normalized");
}

std::size_t PosteriorTable::num_unmasked() const {
    return static_cast<std::size_t>(std::count(undefined_mask.begin(), undefined_mask.end(), false));
}

std::vector<double> aggregate_crop_scores(const Matrix& crop_scores) {
    if (crop_scores.rows == 0) throw Error("no crops");
    std::vector<double> mean(crop_scores.cols, 0.0);
    for (std::size_t r = 0; r < crop_scores.rows; ++r) {
        const auto row = crop_scores.row(r);
        if (!on_simplex(row, kIngestSimplexTol)) {
            throw Error("unnormalized scores (crop " + std::to_string(r) + ")");
        }
        for (std::size_t c = 0; c < row.size(); ++c) mean[c] += row[c];
    }
    const double inv = 1.0 / static_cast<double>(crop_scores.rows);
    for (double& x : mean) x *= inv;
    return mean;
}

ResponseMatrix build_response_matrix(std::span<const Matrix> per_image_crops,
                                     std::vector<std::string> class_ids, ConceptKind kind) {
    ResponseMatrix out;
    out.kind = kind;
    out.class_ids = std::move(class_ids);
    const std::size_t c = out.class_ids.size();
    out.values = Matrix(per_image_crops.size(), c);
    for (std::size_t i = 0; i < per_image_crops.size(); ++i) {
        if (per_image_crops[i].cols != c) throw Error("crop score width does not match class count");
        const auto row = aggregate_crop_scores(per_image_crops[i]);
        std::copy(row.begin(), row.end(), out.values.row(i).begin());
        out.image_ids.push_back(std::to_string(i));
    }
    return out;
}

ConditionalTable estimate_conditional(const ResponseMatrix& responses, const EventLabels& labels) {
    const std::size_t n = responses.num_images();
    const std::size_t c = responses.num_classes();
    const std::size_t m = labels.num_events;
    if (n == 0) throw Error("no images");
    if (labels.labels.size() != n) throw Error("label count does not match image count");
    labels.validate();

    ConditionalTable t;
    t.cond = Matrix(c, m);
    t.counts.assign(m, 0);
    t.total = n;
    t.class_ids = responses.class_ids;
    // Fixed image order keeps the reduction deterministic.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t e = labels.labels[i];
        ++t.counts[e];
        const auto row = responses.values.row(i);
        for (std::size_t o = 0; o < c; ++o) t.cond(o, e) += row[o];
    }
    for (std::size_t e = 0; e < m; ++e) {
        if (t.counts[e] == 0) throw Error("empty event class " + std::to_string(e));
    }
    for (std::size_t o = 0; o < c; ++o) {
        for (std::size_t e = 0; e < m; ++e) t.cond(o, e) /= static_cast<double>(t.counts[e]);
    }
    t.prior.resize(m);
    for (std::size_t e = 0; e < m; ++e) {
        t.prior[e] = static_cast<double>(t.counts[e]) / static_cast<double>(n);
    }
    return t;
}

std::vector<double> marginalize(const ConditionalTable& table) {
    std::vector<double> p(table.num_classes(), 0.0);
    for (std::size_t o = 0; o < table.num_classes(); ++o) {
        for (std::size_t e = 0; e < table.num_events(); ++e) p[o] += table.cond(o, e) * table.prior[e];
    }
    return p;
}

PosteriorTable bayes_posterior(const ConditionalTable& table) {
    const std::size_t c = table.num_classes(), m = table.num_events();
    PosteriorTable out;
    out.marginal = marginalize(table);
    out.post = Matrix(c, m);
    out.undefined_mask.assign(c, false);
    for (std::size_t o = 0; o < c; ++o) {
        if (out.marginal[o] == 0.0) {
            out.undefined_mask[o] = true;
            for (std::size_t e = 0; e < m; ++e) out.post(o, e) = 1.0 / static_cast<double>(m);
            continue;
        }
        for (std::size_t e = 0; e < m; ++e) {
            out.post(o, e) = table.cond(o, e) * table.prior[e] / out.marginal[o];
        }
    }
    return out;
}

double conditional_entropy(std::span<const double> posterior_row) {
    double h = 0.0;
    double total = 0.0;
    for (double p : posterior_row) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw Error("invalid distribution");
        total += p;
        if (p > 0.0) h -= p * std::log2(p);
    }
    if (std::abs(total - 1.0) > 1e-6) throw Error("invalid distribution");
    // Rounding can leave -0.0 or a tiny negative for one-hot rows.
    return std::max(h, 0.0);
}

std::vector<double> l2_normalize(std::span<const double> v) {
    double sq = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) throw Error("non-finite entry");
        sq += x * x;
    }
    std::vector<double> out(v.begin(), v.end());
    if (sq == 0.0) return out;
    const double norm = std::sqrt(sq);
    for (double& x : out) x /= norm;
    return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const auto row = l2_normalize(m.row(r));
        std::copy(row.begin(), row.end(), out.row(r).begin());
    }
    return out;
}

}  // namespace os2e
