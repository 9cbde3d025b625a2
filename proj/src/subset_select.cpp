#include "os2e/subset_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace os2e {

void SelectionProblem::validate() const {
    const std::size_t c = posterior.num_classes();
    if (phi.size() != c) throw Error("phi size does not match class count");
    if (!(lambda >= 0.0)) throw Error("lambda must be non-negative");
    if (k < 1) throw Error("K must be at least 1");
    if (k > c) throw Error("insufficient classes: K=" + std::to_string(k) + " but C=" + std::to_string(c));
}

SelectionProblem make_selection_problem(PosteriorTable posterior, std::size_t k, double lambda) {
    SelectionProblem p;
    p.phi.resize(posterior.num_classes());
    for (std::size_t o = 0; o < posterior.num_classes(); ++o) {
        p.phi[o] = conditional_entropy(posterior.post.row(o));
    }
    p.posterior = std::move(posterior);
    p.k = k;
    p.lambda = lambda;
    p.validate();
    return p;
}

double pairwise_correlation(const PosteriorTable& posterior, std::size_t i, std::size_t j) {
    if (i == j) throw Error("self pair");
    if (i >= posterior.num_classes() || j >= posterior.num_classes()) throw Error("class index out of range");
    const auto a = posterior.post.row(i);
    const auto b = posterior.post.row(j);
    double dot = 0.0;
    for (std::size_t e = 0; e < a.size(); ++e) dot += a[e] * b[e];
    return dot;
}

double energy(const SelectionProblem& problem, std::span<const std::uint8_t> indicator) {
    const std::size_t c = problem.posterior.num_classes();
    if (indicator.size() != c) throw Error("indicator length does not match class count");
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < c; ++i) {
        if (indicator[i] > 1) throw Error("indicator must be binary");
        if (indicator[i]) chosen.push_back(i);
    }
    if (chosen.size() != problem.k) throw Error("constraint violated");

    double unary = 0.0;
    for (std::size_t i : chosen) unary += problem.phi[i];
    double pair = 0.0;
    for (std::size_t i : chosen) {
        for (std::size_t j : chosen) {
            if (i != j) pair += pairwise_correlation(problem.posterior, i, j);
        }
    }
    return unary + problem.lambda * pair;
}

double average_correlation(const PosteriorTable& posterior, std::span<const std::size_t> selected,
                           std::size_t candidate) {
    if (std::find(selected.begin(), selected.end(), candidate) != selected.end()) {
        throw Error("candidate already selected");
    }
    if (selected.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t o : selected) sum += pairwise_correlation(posterior, o, candidate);
    return sum / static_cast<double>(selected.size());
}

SelectionResult greedy_select(const SelectionProblem& problem) {
    problem.validate();
    const std::size_t c = problem.posterior.num_classes();
    const auto& mask = problem.posterior.undefined_mask;
    const auto is_masked = [&](std::size_t o) { return !mask.empty() && mask[o]; };

    std::size_t unmasked = 0;
    for (std::size_t o = 0; o < c; ++o) unmasked += is_masked(o) ? 0 : 1;
    if (problem.k > unmasked) throw Error("insufficient classes");

    SelectionResult out;
    out.indicator.assign(c, 0);
    // Running sum of correlations to the selected set, one entry per class.
    std::vector<double> corr_sum(c, 0.0);

    for (std::size_t step = 0; step < problem.k; ++step) {
        std::size_t best = c;
        double best_cost = std::numeric_limits<double>::infinity();
        const double denom = static_cast<double>(out.selected.size());
        // Ascending scan with strict < keeps the lowest index on ties.
        for (std::size_t o = 0; o < c; ++o) {
            if (out.indicator[o] || is_masked(o)) continue;
            const double s = out.selected.empty() ? 0.0 : corr_sum[o] / denom;
            const double cost = problem.phi[o] + problem.lambda * s;
            if (cost < best_cost || best == c) {
                best_cost = cost;
                best = o;
            }
        }
        out.selected.push_back(best);
        out.step_costs.push_back(best_cost);
        out.indicator[best] = 1;
        for (std::size_t o = 0; o < c; ++o) {
            if (!out.indicator[o]) corr_sum[o] += pairwise_correlation(problem.posterior, best, o);
        }
    }
    out.energy = energy(problem, out.indicator);
    return out;
}

std::uint64_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        // r * (n - k + i) / i stays integral at every step.
        r = r * (n - k + i) / i;
    }
    return r;
}

ExhaustiveResult exhaustive_select(const SelectionProblem& problem) {
    problem.validate();
    const std::size_t c = problem.posterior.num_classes();
    const std::size_t k = problem.k;
    if (c > kOracleMaxClasses || binomial(c, k) > kOracleMaxSubsets) {
        throw Error("instance too large for oracle");
    }

    ExhaustiveResult best;
    best.energy = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> subset(k);
    for (std::size_t i = 0; i < k; ++i) subset[i] = i;
    std::vector<std::uint8_t> indicator(c, 0);

    // Lexicographic enumeration; strict < keeps the first minimizer.
    while (true) {
        std::fill(indicator.begin(), indicator.end(), 0);
        for (std::size_t i : subset) indicator[i] = 1;
        const double e = energy(problem, indicator);
        if (e < best.energy || best.subset.empty()) {
            best.energy = e;
            best.subset = subset;
            best.indicator = indicator;
        }
        std::size_t pos = k;
        while (pos > 0 && subset[pos - 1] == c - k + pos - 1) --pos;
        if (pos == 0) break;
        ++subset[pos - 1];
        for (std::size_t j = pos; j < k; ++j) subset[j] = subset[j - 1] + 1;
    }
    return best;
}

}  // namespace os2e
