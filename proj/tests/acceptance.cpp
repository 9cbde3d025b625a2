// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "benchmarks.hpp"
#include "os2e/io.hpp"
#include "test_util.hpp"

using namespace os2e;
using os2e::testing::max_abs_diff;
using os2e::testing::random_matrix;
using os2e::testing::random_simplex_rows;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// --- 1 ---
Outcome probability_invariants() {
    Rng rng(101);
    double worst_roundtrip = 0.0;
    double worst_simplex = 0.0;
    bool entropy_ok = true;
    bool mask_ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 6 + rng.uniform_index(60);
        const std::size_t c = 2 + rng.uniform_index(20);
        const std::size_t m = 1 + rng.uniform_index(6);
        ResponseMatrix r;
        r.values = random_simplex_rows(n, c, rng, rng.uniform() * 0.8);
        for (std::size_t k = 0; k < c; ++k) r.class_ids.push_back("c" + std::to_string(k));
        EventLabels labels{{}, m};
        for (std::size_t i = 0; i < n; ++i) labels.labels.push_back(i < m ? i : rng.uniform_index(m));

        const auto t = estimate_conditional(r, labels);
        for (std::size_t e = 0; e < m; ++e) {
            double s = 0.0;
            for (std::size_t o = 0; o < c; ++o) s += t.cond(o, e);
            worst_simplex = std::max(worst_simplex, std::abs(s - 1.0));
        }
        worst_simplex = std::max(worst_simplex, std::abs(std::accumulate(t.prior.begin(), t.prior.end(), 0.0) - 1.0));
        const auto p = bayes_posterior(t);
        worst_simplex =
            std::max(worst_simplex, std::abs(std::accumulate(p.marginal.begin(), p.marginal.end(), 0.0) - 1.0));
        for (std::size_t o = 0; o < c; ++o) {
            double s = 0.0;
            for (std::size_t e = 0; e < m; ++e) s += p.post(o, e);
            worst_simplex = std::max(worst_simplex, std::abs(s - 1.0));
            if (p.undefined_mask[o]) {
                for (std::size_t e = 0; e < m; ++e) mask_ok &= p.post(o, e) == 1.0 / static_cast<double>(m);
                continue;
            }
            // p(o|e) = p(e|o) p(o) / p(e)
            for (std::size_t e = 0; e < m; ++e) {
                const double back = p.post(o, e) * p.marginal[o] / t.prior[e];
                worst_roundtrip = std::max(worst_roundtrip, std::abs(back - t.cond(o, e)));
            }
            const double h = conditional_entropy(p.post.row(o));
            entropy_ok &= h >= 0.0 && h <= std::log2(static_cast<double>(m)) + 1e-12;
        }
    }
    return {worst_roundtrip <= 1e-8 && worst_simplex <= 1e-9 && entropy_ok && mask_ok,
            fmt("bayes round-trip %.2e, simplex %.2e", worst_roundtrip, worst_simplex)};
}

// --- 2 ---
Outcome selection_oracle() {
    Rng rng(202);
    int violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t c = 2 + rng.uniform_index(11);
        const std::size_t k = 1 + rng.uniform_index(std::min<std::size_t>(4, c));
        const std::size_t m = 2 + rng.uniform_index(5);
        PosteriorTable post;
        post.post = random_simplex_rows(c, m, rng, 0.4);
        post.marginal.assign(c, 1.0 / static_cast<double>(c));
        post.undefined_mask.assign(c, false);
        const auto prob = make_selection_problem(post, k);
        const auto g = greedy_select(prob);
        double mean_random = 0.0;
        std::vector<std::size_t> idx(c);
        for (int s = 0; s < 50; ++s) {
            std::iota(idx.begin(), idx.end(), 0);
            rng.shuffle(idx);
            std::vector<std::uint8_t> h(c, 0);
            for (std::size_t i = 0; i < k; ++i) h[idx[i]] = 1;
            mean_random += energy(prob, h) / 50.0;
        }
        if (g.energy > mean_random + 1e-12) ++violations;
        if (exhaustive_select(prob).energy > g.energy + 1e-12) ++violations;
    }
    const auto table =
        io::conditional_table_from_json(io::read_json(std::string(OS2E_FIXTURE_DIR) + "/three_class_table.json"));
    const auto fixture = greedy_select(make_selection_problem(bayes_posterior(table), 2));
    const bool fixture_ok = fixture.selected == std::vector<std::size_t>{0, 1} && fixture.energy == 0.0;
    return {violations == 0 && fixture_ok,
            fmt("%.0f violations, fixture selected [%.0f,%.0f] energy %g", violations, double(fixture.selected[0]),
                double(fixture.selected[1]), fixture.energy)};
}

// --- 3 ---
Outcome gradient_correctness() {
    Rng rng(303);
    double worst = 0.0;
    const int configs = 24;
    for (int trial = 0; trial < configs; ++trial) {
        NetworkConfig c;
        c.input_dim = 2 + rng.uniform_index(6);
        const std::size_t depth = rng.uniform_index(3);
        for (std::size_t l = 0; l < depth; ++l) c.hidden.push_back(2 + rng.uniform_index(8));
        c.norm.enabled = !c.hidden.empty() && rng.bernoulli(0.5);
        c.dropout_rate = rng.bernoulli(0.5) ? 0.0 : 0.5;
        c.heads = {2 + rng.uniform_index(4), 2 + rng.uniform_index(5)};
        ParamStore p = init_params(c, static_cast<std::uint64_t>(trial));
        for (double& v : p.values) v += 0.05 * rng.normal();
        for (std::size_t j = 0; j < c.feature_dim(); ++j) {
            p.norm_mean[j] = 0.1 * rng.normal();
            p.norm_var[j] = 0.5 + rng.uniform();
        }

        LossSpec base;
        base.inputs = random_matrix(3 + rng.uniform_index(6), c.input_dim, rng);
        base.labels.resize(base.inputs.rows);
        for (auto& y : base.labels) y = rng.uniform_index(c.heads[0]);
        base.dropout_seed = static_cast<std::uint64_t>(trial);

        std::vector<LossSpec> specs{base};
        for (auto dir : {SoftDirection::target_as_distribution, SoftDirection::prediction_as_distribution}) {
            LossSpec k = base;
            k.kind = LossKind::knowledge;
            k.direction = dir;
            k.targets = random_simplex_rows(base.inputs.rows, c.heads[1], rng);
            specs.push_back(k);
        }
        LossSpec d = base;
        d.kind = LossKind::data;
        d.aux_inputs = random_matrix(2 + rng.uniform_index(5), c.input_dim, rng);
        d.aux_labels.resize(d.aux_inputs.rows);
        for (auto& y : d.aux_labels) y = rng.uniform_index(c.heads[1]);
        specs.push_back(d);
        for (const auto& s : specs) worst = std::max(worst, grad_check(c, p, s, 1e-5));
    }
    return {worst <= 1e-4, fmt("%.0f configs x 4 losses, max relative error %.2e", configs, worst)};
}

// --- 4 ---
Outcome degenerate_weights() {
    int mismatches = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        GeneratorConfig g = generator_preset("vectors");
        g.seed = seed;
        const auto b = gen_vector_dataset(g, plant_truth(g));
        const auto source = random_checkpoint(g.feature_dim, {64}, g.num_events, 40 + seed);
        TransferConfig c;
        c.decay_period = 60;
        c.seed = seed;
        c.eval_every = 1000;
        const auto init = init_transfer_train(source, b.train, b.test, c);
        c.mode = TransferMode::knowledge;
        c.alpha = 0.0;
        if (knowledge_transfer_train(source, b.train, b.test, b.soft_targets, c).event_path_digests !=
            init.event_path_digests)
            ++mismatches;
        c.mode = TransferMode::data;
        c.beta = 0.0;
        const auto data = data_transfer_train(source, b.train, b.test, b.aux, c);
        if (data.event_path_digests != init.event_path_digests) ++mismatches;
        if (data.checkpoint.params.values.size() == 0) ++mismatches;
    }
    return {mismatches == 0, fmt("3 seeds x 150 steps, %.0f digest mismatches", mismatches)};
}

// --- 5 ---
Outcome shipped_defaults() {
    const CropConfig crop;
    const TransferConfig t;
    const SelectionProblem sel;
    const bool ok = generate_regions(480, 640, crop).size() == 54 && crop.region_count() == 54 &&
                    sel.lambda == 0.5 && default_alpha(ConceptKind::object) == 0.125 &&
                    default_alpha(ConceptKind::scene) == 0.25 && t.alpha == 0.125 && t.beta == 0.5 &&
                    t.dropout_rate == 0.7 && NetworkConfig{}.dropout_rate == 0.7 && t.momentum == 0.9 &&
                    t.learning_rate == 0.01 && crop.base_side == 256 && crop.crop_side == 224;
    return {ok, fmt("%.0f regions, lambda %.2f, alpha %.3f/%.3f", double(generate_regions(480, 640, crop).size()),
                    sel.lambda, default_alpha(ConceptKind::object), default_alpha(ConceptKind::scene))};
}

// --- 6 ---
Outcome transfer_ordering() {
    const auto s = bench::transfer_ordering(10);
    const double init = s.accuracy[0], know = s.accuracy[1], data = s.accuracy[2];
    const bool ok = know >= init - 0.01 && data >= init - 0.01 && std::max(know, data) >= init + 0.02 &&
                    s.gap[1] <= s.gap[0] + 0.02 && s.gap[2] <= s.gap[0] + 0.02;
    std::ostringstream d;
    d << fmt("acc init %.4f know %.4f data %.4f", init, know, data)
      << fmt(", gap init %.3f know %.3f data %.3f", s.gap[0], s.gap[1], s.gap[2]);
    return {ok, d.str()};
}

// --- 7 ---
Outcome crop_benefit() {
    const auto s = bench::crop_benefit(200, 0);
    return {s.multi_crop >= s.center_crop, fmt("54-region %.3f vs center crop %.3f", s.multi_crop, s.center_crop)};
}

// --- 8 ---
Outcome probe_combination() {
    const auto s = bench::probe_combination(5);
    return {s.combined >= std::max(s.objects, s.scenes) - 0.005,
            fmt("mAP objects %.4f scenes %.4f combined %.4f", s.objects, s.scenes, s.combined)};
}

// --- 9 ---
Outcome concept_recovery() {
    const double r = bench::concept_recovery(10);
    return {r >= 0.8, fmt("mean recovery %.3f", r)};
}

// --- 10 ---
Outcome determinism_and_round_trips() {
    bool ok = true;
    std::string failed;
    auto expect = [&](bool cond, const char* what) {
        if (!cond) {
            ok = false;
            failed += std::string(failed.empty() ? "" : ", ") + what;
        }
    };

    GeneratorConfig g = generator_preset("vectors");
    g.seed = 5;
    g.aux_count = 128;
    const auto truth = plant_truth(g);
    const auto b = gen_vector_dataset(g, truth);
    const auto source = random_checkpoint(g.feature_dim, {32}, g.num_events, 3);
    for (auto mode : {TransferMode::init, TransferMode::knowledge, TransferMode::data}) {
        TransferConfig c;
        c.mode = mode;
        c.decay_period = 40;
        c.seed = 21;
        const auto x = transfer_train(source, b.train, b.test, &b.soft_targets, &b.aux, c);
        const auto y = transfer_train(source, b.train, b.test, &b.soft_targets, &b.aux, c);
        expect(x.checkpoint == y.checkpoint, "checkpoint determinism");
    }

    const auto dir = os2e::testing::scratch_dir("acceptance");
    const auto resp = gen_response_data(generator_preset("responses"));
    io::write_response_csv(dir / "r.csv", resp.objects);
    expect(max_abs_diff(io::read_response_csv(dir / "r.csv").values.data, resp.objects.values.data) <= 1e-12,
           "response csv");
    io::write_labels_csv(dir / "l.csv", resp.labels, resp.objects.image_ids);
    expect(io::read_labels_csv(dir / "l.csv", 4).labels == resp.labels.labels, "labels csv");
    io::write_dataset_csv(dir / "d.csv", b.train);
    const auto d = io::read_dataset_csv(dir / "d.csv", 4);
    expect(d.labels == b.train.labels && max_abs_diff(d.features.data, b.train.features.data) <= 1e-12, "dataset csv");
    io::write_matrix_csv(dir / "t.csv", b.soft_targets, "sample_id", "t_");
    expect(max_abs_diff(io::read_matrix_csv(dir / "t.csv").data, b.soft_targets.data) <= 1e-12, "matrix csv");

    io::write_checkpoint(dir / "ck.json", truth.teacher);
    expect(io::read_checkpoint(dir / "ck.json") == truth.teacher, "checkpoint json");
    const auto table = estimate_conditional(resp.objects, resp.labels);
    io::write_json(dir / "tab.json", io::to_json(table));
    const auto tab = io::conditional_table_from_json(io::read_json(dir / "tab.json"));
    expect(tab.cond.data == table.cond.data && tab.prior == table.prior, "table json");
    const auto post = bayes_posterior(table);
    const auto p2 = io::posterior_table_from_json(io::to_json(post));
    expect(p2.post.data == post.post.data && p2.marginal == post.marginal, "posterior json");

    ImageBuffer img(6, 7, 3);
    Rng rng(4);
    for (double& v : img.pixels) v = rng.uniform();
    io::write_image(dir / "i.img", img);
    expect(max_abs_diff(io::read_image(dir / "i.img").pixels, img.pixels) <= 1e-12, "image");

    const std::vector<double> scores{0.9, 0.8, 0.7, 0.1};
    const bool positive[] = {true, false, true, false};
    const double ap = average_precision(scores, positive);
    expect(ap == 5.0 / 6.0, "AP fixture");
    return {ok, failed.empty() ? fmt("3 modes deterministic, 9 formats round-trip, AP %.17g", ap)
                               : "failed: " + failed};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "probability invariants", 10, probability_invariants},
        {2, "selection oracle", 30, selection_oracle},
        {3, "gradient correctness", 60, gradient_correctness},
        {4, "degenerate-weight equivalence", 300, degenerate_weights},
        {5, "shipped defaults", 10, shipped_defaults},
        {6, "transfer ordering benchmark", 300, transfer_ordering},
        {7, "multi-crop benefit", 120, crop_benefit},
        {8, "probe combination", 120, probe_combination},
        {9, "planted-concept recovery", 30, concept_recovery},
        {10, "determinism and round-trips", 300, determinism_and_round_trips},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = o.pass && secs <= c.budget_seconds;
        if (!pass) ++failures;
        std::printf("%s %2d %-30s %s (%.1fs / %.0fs)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    c.budget_seconds);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
