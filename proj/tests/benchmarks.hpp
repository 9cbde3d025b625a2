#pragma once
// Planted-benchmark runs shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

#include "os2e/datagen.hpp"
#include "os2e/subset_select.hpp"
#include "os2e/transfer_train.hpp"

namespace os2e::bench {

struct ModeSummary {
    std::array<double, 3> accuracy{};  // indexed by TransferMode
    std::array<double, 3> gap{};       // final test loss - train loss
};

// Vectors preset, source pretrained on the auxiliary concept set, K = 1000.
inline ModeSummary transfer_ordering(std::size_t seeds) {
    ModeSummary out;
    for (std::size_t s = 0; s < seeds; ++s) {
        GeneratorConfig g = generator_preset("vectors");
        g.seed = s;
        const auto truth = plant_truth(g);
        const auto b = gen_vector_dataset(g, truth);

        TransferConfig pc;
        pc.seed = 500 + s;
        const Checkpoint source = train_source_model(b.aux, {128}, pc);

        TransferConfig c;
        c.decay_period = 1000;
        c.seed = s;
        c.eval_every = 1000000;
        for (auto mode : {TransferMode::init, TransferMode::knowledge, TransferMode::data}) {
            c.mode = mode;
            const auto r = transfer_train(source, b.train, b.test, &b.soft_targets, &b.aux, c);
            const auto& f = r.final_point();
            const auto m = static_cast<std::size_t>(mode);
            out.accuracy[m] += f.test_accuracy / static_cast<double>(seeds);
            out.gap[m] += (f.test_loss - f.train_loss) / static_cast<double>(seeds);
        }
    }
    return out;
}

inline std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct CropSummary {
    double multi_crop = 0.0;
    double center_crop = 0.0;
};

inline CropSummary crop_benefit(std::size_t count, std::uint64_t seed) {
    GeneratorConfig g = generator_preset("images");
    g.seed = seed;
    const auto truth = plant_truth(g);
    const auto images = gen_image_dataset(g, truth, count);
    CropConfig cc;
    cc.base_side = 32;
    cc.crop_side = 16;
    const Scorer scorer = blob_intensity_scorer(truth.blob_levels, 0.5);
    CropSummary out;
    for (const auto& b : images) {
        if (argmax(recognize(b.image, cc, scorer, scorer)) == b.label) out.multi_crop += 1.0;
        if (argmax(scorer(subtract_mean(center_crop(b.image, cc), cc.mean_pixel))) == b.label) out.center_crop += 1.0;
    }
    out.multi_crop /= static_cast<double>(count);
    out.center_crop /= static_cast<double>(count);
    return out;
}

struct ProbeSummary {
    double objects = 0.0;
    double scenes = 0.0;
    double combined = 0.0;
};

inline ProbeSummary probe_combination(std::size_t seeds) {
    ProbeSummary out;
    const double w = 1.0 / static_cast<double>(seeds);
    for (std::size_t s = 0; s < seeds; ++s) {
        GeneratorConfig g = generator_preset("responses");
        g.seed = s;
        const auto d = gen_response_data(g);
        std::vector<std::size_t> tr(g.train_count), te(g.test_count);
        for (std::size_t i = 0; i < tr.size(); ++i) tr[i] = i;
        for (std::size_t i = 0; i < te.size(); ++i) te[i] = g.train_count + i;
        auto labels_of = [&](const std::vector<std::size_t>& idx) {
            std::vector<std::size_t> l;
            for (std::size_t i : idx) l.push_back(d.labels.labels[i]);
            return l;
        };
        TransferConfig c;
        c.seed = s;
        c.learning_rate = 0.1;
        c.eval_every = 1000000;
        auto run = [&](const Matrix& x) {
            return linear_probe_train(gather_rows(x, tr), labels_of(tr), gather_rows(x, te), labels_of(te),
                                      g.num_events, c)
                .final_point()
                .test_map;
        };
        out.objects += w * run(d.objects.values);
        out.scenes += w * run(d.scenes.values);
        out.combined += w * run(hconcat(l2_normalize_rows(d.objects.values), l2_normalize_rows(d.scenes.values)));
    }
    return out;
}

inline double concept_recovery(std::size_t seeds) {
    double r = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
        GeneratorConfig g = generator_preset("recovery");
        g.seed = s;
        const auto d = gen_response_data(g);
        const auto table = estimate_conditional(d.objects, d.labels);
        const auto prob = make_selection_problem(bayes_posterior(table), g.num_events * g.sparsity);
        r += recovery_rate(d.truth, greedy_select(prob).selected) / static_cast<double>(seeds);
    }
    return r;
}

}  // namespace os2e::bench
