#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "os2e/concept_stats.hpp"
#include "test_util.hpp"

using namespace os2e;
using os2e::testing::random_simplex_rows;

namespace {

ResponseMatrix responses_from(const std::vector<std::vector<double>>& rows) {
    ResponseMatrix r;
    r.values = Matrix::from_rows(rows);
    for (std::size_t c = 0; c < r.values.cols; ++c) r.class_ids.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < r.values.rows; ++i) r.image_ids.push_back("img" + std::to_string(i));
    return r;
}

ConditionalTable table_from(const std::vector<std::vector<double>>& cond, std::vector<double> prior) {
    ConditionalTable t;
    t.cond = Matrix::from_rows(cond);
    t.prior = std::move(prior);
    t.counts.assign(t.prior.size(), 1);
    t.total = t.prior.size();
    for (std::size_t o = 0; o < t.cond.rows; ++o) t.class_ids.push_back("c" + std::to_string(o));
    return t;
}

}  // namespace

TEST_CASE("aggregate_crop_scores averages crops") {
    auto a = aggregate_crop_scores(Matrix::from_rows({{1, 0}, {0, 1}}));
    CHECK(a[0] == doctest::Approx(0.5));
    CHECK(a[1] == doctest::Approx(0.5));

    a = aggregate_crop_scores(Matrix::from_rows({{0.3, 0.7}}));
    CHECK(a[0] == 0.3);
    CHECK(a[1] == 0.7);

    a = aggregate_crop_scores(Matrix::from_rows({{0.2, 0.8}, {0.4, 0.6}, {0.6, 0.4}}));
    CHECK(a[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("aggregate_crop_scores errors") {
    CHECK_THROWS_WITH_AS(aggregate_crop_scores(Matrix(0, 3)), doctest::Contains("no crops"), Error);
    CHECK_THROWS_WITH_AS(aggregate_crop_scores(Matrix::from_rows({{0.5, 0.6}})),
                         doctest::Contains("unnormalized scores"), Error);
}

TEST_CASE("build_response_matrix keeps rows on the simplex") {
    Rng rng(3);
    std::vector<Matrix> crops;
    for (int i = 0; i < 20; ++i) crops.push_back(random_simplex_rows(1 + rng.uniform_index(10), 7, rng));
    const auto r = build_response_matrix(crops, {"a", "b", "c", "d", "e", "f", "g"}, ConceptKind::scene);
    CHECK(r.num_images() == 20);
    CHECK(r.kind == ConceptKind::scene);
    for (std::size_t i = 0; i < r.num_images(); ++i) CHECK(on_simplex(r.values.row(i), 1e-9));
}

TEST_CASE("estimate_conditional hand examples") {
    SUBCASE("symmetric pair") {
        const auto t = estimate_conditional(responses_from({{1, 0}, {0, 1}}), EventLabels{{0, 0}, 1});
        CHECK(t.cond(0, 0) == doctest::Approx(0.5));
        CHECK(t.cond(1, 0) == doctest::Approx(0.5));
    }
    SUBCASE("prior by counting") {
        std::vector<std::vector<double>> rows(10, {0.5, 0.5});
        EventLabels labels{{0, 1, 0, 1, 1, 0, 1, 0, 1, 1}, 2};
        const auto t = estimate_conditional(responses_from(rows), labels);
        CHECK(t.prior[0] == doctest::Approx(0.4));
        CHECK(t.counts[0] == 4);
        CHECK(t.total == 10);
    }
    SUBCASE("column means") {
        const auto t = estimate_conditional(responses_from({{0.9, 0.1}, {0.7, 0.3}, {0.2, 0.8}}), EventLabels{{0, 0, 1}, 2});
        CHECK(t.cond(0, 0) == doctest::Approx(0.8));
        CHECK(t.cond(1, 0) == doctest::Approx(0.2));
        CHECK(t.cond(0, 1) == doctest::Approx(0.2));
        CHECK(t.cond(1, 1) == doctest::Approx(0.8));
        CHECK(t.prior[0] == doctest::Approx(2.0 / 3.0));
        CHECK(t.prior[1] == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("empty event class") {
        CHECK_THROWS_WITH_AS(estimate_conditional(responses_from({{1, 0}}), EventLabels{{0}, 2}),
                             doctest::Contains("empty event class 1"), Error);
    }
}

TEST_CASE("marginalize hand examples") {
    auto m = marginalize(table_from({{1, 0}, {0, 1}}, {0.5, 0.5}));
    CHECK(m[0] == doctest::Approx(0.5));
    CHECK(m[1] == doctest::Approx(0.5));

    m = marginalize(table_from({{0.8, 0.4}, {0.2, 0.6}}, {0.5, 0.5}));
    CHECK(m[0] == doctest::Approx(0.6));
    CHECK(m[1] == doctest::Approx(0.4));

    m = marginalize(table_from({{0.25, 0.25}, {0.25, 0.25}, {0.25, 0.25}, {0.25, 0.25}}, {0.9, 0.1}));
    for (double v : m) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("bayes_posterior hand examples") {
    auto p = bayes_posterior(table_from({{0.8, 0.4}, {0.2, 0.6}}, {0.5, 0.5}));
    CHECK(p.post(0, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(p.post(0, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(p.num_unmasked() == 2);

    p = bayes_posterior(table_from({{0, 0}, {1, 1}}, {0.3, 0.7}));
    CHECK(p.undefined_mask[0]);
    CHECK_FALSE(p.undefined_mask[1]);
    CHECK(p.post(0, 0) == doctest::Approx(0.5));
    CHECK(p.post(0, 1) == doctest::Approx(0.5));

    p = bayes_posterior(table_from({{0.2}, {0.3}, {0.5}}, {1.0}));
    for (double v : p.post.data) CHECK(v == 1.0);
}

TEST_CASE("conditional_entropy") {
    const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
    CHECK(conditional_entropy(uniform) == doctest::Approx(2.0));
    const std::vector<double> one_hot{0, 1, 0};
    CHECK(conditional_entropy(one_hot) == 0.0);
    const std::vector<double> mixed{0.5, 0.25, 0.25};
    CHECK(conditional_entropy(mixed) == doctest::Approx(1.5).epsilon(1e-12));
    const std::vector<double> bad{0.5, 0.6};
    CHECK_THROWS_WITH_AS(conditional_entropy(bad), doctest::Contains("invalid distribution"), Error);
}

TEST_CASE("l2_normalize") {
    const std::vector<double> v{3, 4};
    auto n = l2_normalize(v);
    CHECK(n[0] == doctest::Approx(0.6));
    CHECK(n[1] == doctest::Approx(0.8));
    const std::vector<double> unit{0, 1, 0};
    CHECK(l2_normalize(unit) == unit);
    const std::vector<double> zero{0, 0};
    CHECK(l2_normalize(zero) == zero);
    const std::vector<double> bad{1, NAN};
    CHECK_THROWS_WITH_AS(l2_normalize(bad), doctest::Contains("non-finite"), Error);
}

TEST_CASE("table invariants on random responses") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 5 + rng.uniform_index(40);
        const std::size_t c = 2 + rng.uniform_index(15);
        const std::size_t m = 1 + rng.uniform_index(6);
        ResponseMatrix r;
        r.values = random_simplex_rows(n, c, rng, 0.3);
        for (std::size_t k = 0; k < c; ++k) r.class_ids.push_back("c" + std::to_string(k));
        EventLabels labels;
        labels.num_events = m;
        for (std::size_t i = 0; i < n; ++i) labels.labels.push_back(i < m ? i : rng.uniform_index(m));

        const auto t = estimate_conditional(r, labels);
        for (std::size_t e = 0; e < m; ++e) {
            double s = 0.0;
            for (std::size_t o = 0; o < c; ++o) s += t.cond(o, e);
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
        const auto marg = marginalize(t);
        CHECK(std::abs(std::accumulate(marg.begin(), marg.end(), 0.0) - 1.0) <= 1e-9);

        const auto p = bayes_posterior(t);
        for (std::size_t e = 0; e < m; ++e) {
            double s = 0.0;
            for (std::size_t o = 0; o < c; ++o) {
                if (!p.undefined_mask[o]) s += p.post(o, e) * p.marginal[o];
            }
            CHECK(std::abs(s - t.prior[e]) <= 1e-8);
        }
        for (std::size_t o = 0; o < c; ++o) {
            const double h = conditional_entropy(p.post.row(o));
            CHECK(h >= 0.0);
            CHECK(h <= std::log2(static_cast<double>(m)) + 1e-12);
        }

        // Permuting image order leaves the tables unchanged.
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        ResponseMatrix rp = r;
        rp.values = gather_rows(r.values, perm);
        EventLabels lp{{}, m};
        for (std::size_t i : perm) lp.labels.push_back(labels.labels[i]);
        const auto tp = estimate_conditional(rp, lp);
        CHECK(os2e::testing::max_abs_diff(tp.cond.data, t.cond.data) <= 1e-12);
        CHECK(tp.prior == t.prior);
    }
}
