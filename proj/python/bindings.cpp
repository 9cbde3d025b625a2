#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "os2e/cli.hpp"
#include "os2e/concept_stats.hpp"
#include "os2e/datagen.hpp"
#include "os2e/infer_pipeline.hpp"
#include "os2e/subset_select.hpp"
#include "os2e/transfer_train.hpp"

namespace py = pybind11;
using namespace os2e;

namespace {

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const Matrix& m) {
    Rows out(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
    return out;
}

ResponseMatrix responses_from(const Rows& rows) {
    ResponseMatrix r;
    r.values = Matrix::from_rows(rows);
    for (std::size_t c = 0; c < r.values.cols; ++c) r.class_ids.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < r.values.rows; ++i) r.image_ids.push_back("img" + std::to_string(i));
    return r;
}

PosteriorTable posterior_from(const Rows& post, const std::vector<double>& marginal) {
    PosteriorTable p;
    p.post = Matrix::from_rows(post);
    p.marginal = marginal.empty() ? std::vector<double>(p.post.rows, 1.0 / static_cast<double>(p.post.rows)) : marginal;
    p.undefined_mask.assign(p.post.rows, false);
    return p;
}

py::dict posterior_dict(const PosteriorTable& p) {
    py::dict d;
    d["post"] = to_rows(p.post);
    d["marginal"] = p.marginal;
    std::vector<bool> mask(p.undefined_mask.begin(), p.undefined_mask.end());
    d["undefined_mask"] = mask;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Concept statistics, subset selection, transfer training and multi-crop inference";

    py::register_exception<Error>(m, "Os2eError", PyExc_ValueError);

    m.def(
        "estimate_conditional",
        [](const Rows& responses, const std::vector<std::size_t>& labels, std::size_t num_events) {
            const auto t = estimate_conditional(responses_from(responses), EventLabels{labels, num_events});
            py::dict d;
            d["cond"] = to_rows(t.cond);
            d["prior"] = t.prior;
            d["counts"] = t.counts;
            return d;
        },
        py::arg("responses"), py::arg("labels"), py::arg("num_events"));

    m.def(
        "bayes_posterior",
        [](const Rows& responses, const std::vector<std::size_t>& labels, std::size_t num_events) {
            return posterior_dict(
                bayes_posterior(estimate_conditional(responses_from(responses), EventLabels{labels, num_events})));
        },
        py::arg("responses"), py::arg("labels"), py::arg("num_events"));

    m.def("conditional_entropy", [](const std::vector<double>& row) { return conditional_entropy(row); },
          py::arg("row"));

    m.def(
        "greedy_select",
        [](const Rows& post, std::size_t k, double lambda, const std::vector<double>& marginal) {
            const auto r = greedy_select(make_selection_problem(posterior_from(post, marginal), k, lambda));
            py::dict d;
            d["selected"] = r.selected;
            d["step_costs"] = r.step_costs;
            d["energy"] = r.energy;
            return d;
        },
        py::arg("post"), py::arg("k"), py::arg("lambda_") = kDefaultLambda, py::arg("marginal") = std::vector<double>{});

    m.def(
        "exhaustive_select",
        [](const Rows& post, std::size_t k, double lambda) {
            const auto r = exhaustive_select(make_selection_problem(posterior_from(post, {}), k, lambda));
            return py::make_tuple(r.subset, r.energy);
        },
        py::arg("post"), py::arg("k"), py::arg("lambda_") = kDefaultLambda);

    m.def(
        "generate_regions",
        [](std::size_t height, std::size_t width, std::size_t base_side, std::size_t crop_side) {
            CropConfig c;
            c.base_side = base_side;
            c.crop_side = crop_side;
            py::list out;
            for (const auto& s : generate_regions(height, width, c)) {
                py::dict d;
                d["ratio_mode"] = to_string(s.ratio_mode);
                d["scale"] = s.scale_factor;
                d["top"] = s.top;
                d["left"] = s.left;
                d["size"] = s.height;
                d["resized"] = py::make_tuple(s.resized_height, s.resized_width);
                out.append(d);
            }
            return out;
        },
        py::arg("height"), py::arg("width"), py::arg("base_side") = 256, py::arg("crop_side") = 224);

    m.def(
        "resize_bilinear",
        [](const Rows& image, std::size_t height, std::size_t width) {
            const Matrix in = Matrix::from_rows(image);
            ImageBuffer img(in.rows, in.cols, 1);
            img.pixels = in.data;
            const auto out = resize_bilinear(img, height, width);
            Matrix res(out.height, out.width);
            res.data = out.pixels;
            return to_rows(res);
        },
        py::arg("image"), py::arg("height"), py::arg("width"));

    m.def(
        "fuse_streams",
        [](const std::vector<double>& o, const std::vector<double>& s, double alpha_o, double alpha_s) {
            return fuse_streams(o, s, alpha_o, alpha_s);
        },
        py::arg("object_scores"), py::arg("scene_scores"), py::arg("alpha_o") = 0.5, py::arg("alpha_s") = 0.5);

    m.def(
        "average_precision",
        [](const std::vector<double>& scores, const std::vector<bool>& positive) {
            std::unique_ptr<bool[]> flags(new bool[positive.size()]);
            for (std::size_t i = 0; i < positive.size(); ++i) flags[i] = positive[i];
            return average_precision(scores, std::span<const bool>(flags.get(), positive.size()));
        },
        py::arg("scores"), py::arg("positive"));

    m.def(
        "evaluate",
        [](const Rows& scores, const std::vector<std::size_t>& labels) {
            const auto r = evaluate(Matrix::from_rows(scores), labels);
            return py::make_tuple(r.accuracy, r.mean_ap);
        },
        py::arg("scores"), py::arg("labels"));

    m.def(
        "gen_responses",
        [](const std::string& preset, std::uint64_t seed) {
            GeneratorConfig g = generator_preset(preset);
            g.seed = seed;
            const auto d = gen_response_data(g);
            py::dict out;
            out["objects"] = to_rows(d.objects.values);
            out["scenes"] = to_rows(d.scenes.values);
            out["labels"] = d.labels.labels;
            out["num_events"] = d.labels.num_events;
            out["object_signatures"] = d.truth.object_signatures;
            return out;
        },
        py::arg("preset") = "responses", py::arg("seed") = 0);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
