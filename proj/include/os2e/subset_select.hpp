#pragma once
// Discriminative/diverse concept subset selection.
//
// Energy of a K-subset h:
//   E(h) = sum_{i in h} phi(i) + lambda * sum_{i != j, both in h} <p(e|i), p(e|j)>
// where phi(i) = H(E|i) in bits. The pair sum runs over ordered pairs.
//
// greedy_select scores candidates with the *average* correlation to the
// already selected set, S(O, o) = mean_{i in O} <p(e|i), p(e|o)>, with S(empty, o) = 0.
// energy() is used only for reporting and for comparison with the exhaustive oracle.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "os2e/concept_stats.hpp"

namespace os2e {

inline constexpr double kDefaultLambda = 0.5;
inline constexpr std::size_t kDefaultObjectK = 300;
inline constexpr std::size_t kDefaultSceneK = 150;

struct SelectionProblem {
    PosteriorTable posterior;
    std::vector<double> phi;
    double lambda = kDefaultLambda;
    std::size_t k = 1;

    void validate() const;
};

/// phi filled from the posterior's conditional entropies.
SelectionProblem make_selection_problem(PosteriorTable posterior, std::size_t k,
                                        double lambda = kDefaultLambda);

struct SelectionResult {
    std::vector<std::size_t> selected;  // selection order
    std::vector<double> step_costs;     // phi(o*) + lambda * S(O, o*) at each step
    double energy = 0.0;
    std::vector<std::uint8_t> indicator;
};

double pairwise_correlation(const PosteriorTable& posterior, std::size_t i, std::size_t j);

double energy(const SelectionProblem& problem, std::span<const std::uint8_t> indicator);

double average_correlation(const PosteriorTable& posterior, std::span<const std::size_t> selected,
                           std::size_t candidate);

SelectionResult greedy_select(const SelectionProblem& problem);

struct ExhaustiveResult {
    std::vector<std::uint8_t> indicator;
    std::vector<std::size_t> subset;  // ascending
    double energy = 0.0;
};

inline constexpr std::size_t kOracleMaxClasses = 20;
inline constexpr std::uint64_t kOracleMaxSubsets = 200000;

/// Exact minimizer of energy() over all K-subsets; lexicographically smallest on ties.
ExhaustiveResult exhaustive_select(const SelectionProblem& problem);

std::uint64_t binomial(std::size_t n, std::size_t k);

}  // namespace os2e
