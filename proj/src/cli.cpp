#include "os2e/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "os2e/io.hpp"
#include "os2e/subset_select.hpp"

namespace os2e::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string path_str(const fs::path& p) { return p.string(); }

json transfer_json(const TransferConfig& t) { return io::to_json(t); }

void require_file(const fs::path& p, const std::string& what) {
    if (p.empty()) throw Error("missing required input: " + what);
    if (!fs::exists(p)) throw Error("missing file: " + p.string());
}

// Flags bound to side storage; only the ones actually given are applied.
class Overrides {
public:
    template <typename T>
    CLI::Option* add(CLI::App* app, const std::string& name, const std::string& desc,
                     std::function<void(RunConfig&, const T&)> set) {
        auto value = std::make_shared<T>();
        auto* opt = app->add_option(name, *value, desc);
        items_.push_back({opt, [value, set](RunConfig& rc) { set(rc, *value); }});
        return opt;
    }

    CLI::Option* add_flag(CLI::App* app, const std::string& name, const std::string& desc,
                          std::function<void(RunConfig&, std::size_t)> set) {
        auto* opt = app->add_flag(name, desc);
        items_.push_back({opt, [opt, set](RunConfig& rc) { set(rc, opt->count()); }});
        return opt;
    }

    void apply(RunConfig& rc) const {
        for (const auto& [opt, fn] : items_) {
            if (opt->count() > 0) fn(rc);
        }
    }

private:
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> items_;
};

class Runner {
public:
    Runner(RunConfig rc, std::ostream& err) : rc_(std::move(rc)), err_(err) {}

    void dispatch() {
        const auto& s = rc_.subcommand;
        if (s == "stats") stats();
        else if (s == "select") select();
        else if (s == "train") train();
        else if (s == "infer") infer();
        else if (s == "gen") gen();
        else if (s == "report") report();
        else throw Error("unknown subcommand: " + s);
    }

private:
    RunConfig rc_;
    std::ostream& err_;

    void note(const fs::path& p) {
        if (rc_.verbosity > 0) err_ << "wrote " << p.string() << '\n';
    }

    void write_resolved() {
        const auto p = rc_.out / "resolved_config.json";
        io::write_json(p, to_json(rc_));
        note(p);
    }

    void stats() {
        require_file(rc_.responses, "--responses");
        require_file(rc_.labels, "--labels");
        const auto responses = io::read_response_csv(rc_.responses, rc_.kind);
        std::vector<std::string> label_ids;
        const auto raw = io::read_labels_csv(rc_.labels, std::nullopt, &label_ids);

        std::map<std::string, std::size_t> by_id;
        for (std::size_t i = 0; i < label_ids.size(); ++i) by_id[label_ids[i]] = raw.labels[i];
        EventLabels labels;
        labels.num_events = raw.num_events;
        for (const auto& id : responses.image_ids) {
            const auto it = by_id.find(id);
            if (it == by_id.end()) throw Error("no event label for image " + id);
            labels.labels.push_back(it->second);
        }

        const auto table = estimate_conditional(responses, labels);
        const auto post = bayes_posterior(table);
        const std::string kind = to_string(rc_.kind);

        fs::create_directories(rc_.out);
        io::write_json(rc_.out / ("conditional_" + kind + ".json"), io::to_json(table));
        io::write_json(rc_.out / ("posterior_" + kind + ".json"), io::to_json(post));

        std::ostringstream csv;
        csv << "class_id,entropy_bits,marginal,masked\n";
        for (std::size_t o = 0; o < table.num_classes(); ++o) {
            csv << table.class_ids[o] << ',' << io::format_double(conditional_entropy(post.post.row(o))) << ','
                << io::format_double(post.marginal[o]) << ',' << (post.undefined_mask[o] ? 1 : 0) << '\n';
        }
        io::write_text(rc_.out / ("entropy_" + kind + ".csv"), csv.str());
        note(rc_.out / ("conditional_" + kind + ".json"));
        write_resolved();
    }

    void select() {
        require_file(rc_.table, "--table");
        const auto table = io::conditional_table_from_json(io::read_json(rc_.table));
        auto problem = make_selection_problem(bayes_posterior(table), rc_.k, rc_.lambda);
        const auto result = greedy_select(problem);

        json j = io::to_json(result, table.class_ids);
        j["lambda"] = problem.lambda;
        j["k"] = problem.k;
        if (rc_.oracle) {
            const auto best = exhaustive_select(problem);
            j["oracle"] = {{"subset", best.subset}, {"energy", best.energy}};
        }
        io::write_json(rc_.out / "selection.json", j);
        io::write_selection_report_csv(rc_.out / "selection.csv", result, problem, table.class_ids);
        note(rc_.out / "selection.json");
        write_resolved();
    }

    void train() {
        require_file(rc_.train_data, "--train");
        require_file(rc_.test_data, "--test");
        auto train = io::read_dataset_csv(rc_.train_data, std::nullopt, Split::train);
        auto test = io::read_dataset_csv(rc_.test_data, std::nullopt, Split::test);
        const std::size_t m = std::max(train.num_classes, test.num_classes);
        train.num_classes = test.num_classes = m;

        Matrix soft;
        Dataset aux;
        const Matrix* soft_ptr = nullptr;
        const Dataset* aux_ptr = nullptr;
        if (rc_.transfer.mode == TransferMode::knowledge) {
            require_file(rc_.soft_targets, "--soft-targets");
            soft = io::read_matrix_csv(rc_.soft_targets);
            soft_ptr = &soft;
        } else if (rc_.transfer.mode == TransferMode::data) {
            require_file(rc_.aux_data, "--aux");
            aux = io::read_dataset_csv(rc_.aux_data, std::nullopt, Split::train);
            aux_ptr = &aux;
        }

        Checkpoint source;
        if (!rc_.source.empty()) {
            require_file(rc_.source, "--source");
            source = io::read_checkpoint(rc_.source);
        } else {
            source = random_checkpoint(train.features.cols, rc_.hidden, m, rc_.seed);
        }

        const auto report = transfer_train(source, train, test, soft_ptr, aux_ptr, rc_.transfer);
        io::write_checkpoint(rc_.out / "checkpoint.json", report.checkpoint);
        io::write_json(rc_.out / "report.json", io::to_json(report));
        io::write_curve_csv(rc_.out / "curve.csv", report);
        if (rc_.verbosity > 0) {
            const auto& p = report.final_point();
            err_ << "iter " << p.iteration << " test_acc " << p.test_accuracy << " test_map " << p.test_map << '\n';
        }
        note(rc_.out / "checkpoint.json");
        write_resolved();
    }

    void infer() {
        require_file(rc_.checkpoint_o, "--checkpoint-o");
        require_file(rc_.checkpoint_s, "--checkpoint-s");
        if (rc_.image_dir.empty() || !fs::is_directory(rc_.image_dir)) {
            throw Error("missing image directory: " + rc_.image_dir.string());
        }
        const auto scorer_o = network_scorer(io::read_checkpoint(rc_.checkpoint_o));
        const auto scorer_s = network_scorer(io::read_checkpoint(rc_.checkpoint_s));

        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(rc_.image_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".img") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw Error("no .img files in " + rc_.image_dir.string());

        std::vector<std::string> ids;
        Matrix scores;
        json audit = json::object();
        for (std::size_t i = 0; i < files.size(); ++i) {
            const auto image = io::read_image(files[i]);
            const auto regions = score_regions(image, rc_.crop, scorer_o, scorer_s, rc_.fusion);
            const auto fused = fuse_regions(regions);
            if (scores.empty()) scores = Matrix(files.size(), fused.size());
            if (fused.size() != scores.cols) throw Error("score length changed between images");
            std::copy(fused.begin(), fused.end(), scores.row(i).begin());
            ids.push_back(files[i].stem().string());

            json specs = json::array();
            for (const auto& r : regions) {
                auto s = io::to_json(r.spec);
                s["fused"] = r.fused;
                specs.push_back(std::move(s));
            }
            audit[ids.back()] = std::move(specs);
        }
        io::write_scores_csv(rc_.out / "scores.csv", ids, scores);
        io::write_json(rc_.out / "regions.json", audit);
        note(rc_.out / "scores.csv");
        write_resolved();
    }

    void gen() {
        const auto& g = rc_.generator;
        const auto truth = plant_truth(g);
        std::vector<std::string> files;
        auto put = [&](const fs::path& rel) {
            files.push_back(rel.generic_string());
            note(rc_.out / rel);
        };

        if (rc_.preset == "responses" || rc_.preset == "recovery") {
            const auto data = gen_response_data(g);
            io::write_response_csv(rc_.out / "objects.csv", data.objects);
            put("objects.csv");
            io::write_response_csv(rc_.out / "scenes.csv", data.scenes);
            put("scenes.csv");
            io::write_labels_csv(rc_.out / "labels.csv", data.labels, data.objects.image_ids);
            put("labels.csv");
        } else if (rc_.preset == "vectors") {
            const auto bench = gen_vector_dataset(g, truth);
            io::write_dataset_csv(rc_.out / "train.csv", bench.train);
            put("train.csv");
            io::write_dataset_csv(rc_.out / "test.csv", bench.test);
            put("test.csv");
            io::write_dataset_csv(rc_.out / "aux.csv", bench.aux);
            put("aux.csv");
            io::write_matrix_csv(rc_.out / "soft_targets.csv", bench.soft_targets, "sample_id", "t_");
            put("soft_targets.csv");
            io::write_checkpoint(rc_.out / "teacher.json", truth.teacher);
            put("teacher.json");
        } else if (rc_.preset == "images") {
            const auto images = gen_image_dataset(g, truth, g.train_count + g.test_count);
            EventLabels labels;
            labels.num_events = g.num_events;
            std::vector<std::string> ids;
            for (std::size_t i = 0; i < images.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "img_%05zu", i);
                ids.emplace_back(name);
                const fs::path rel = fs::path("images") / (ids.back() + ".img");
                io::write_image(rc_.out / rel, images[i].image);
                files.push_back(rel.generic_string());
                labels.labels.push_back(images[i].label);
            }
            io::write_labels_csv(rc_.out / "labels.csv", labels, ids);
            put("labels.csv");
        } else {
            throw Error("unknown generator preset: " + rc_.preset);
        }

        json manifest = {{"preset", rc_.preset},
                         {"seed", g.seed},
                         {"generator", io::to_json(g)},
                         {"files", files},
                         {"truth", io::to_json(truth)}};
        io::write_json(rc_.out / "manifest.json", manifest);
        note(rc_.out / "manifest.json");
        write_resolved();
    }

    struct TrainRun {
        fs::path dir;
        json report;
    };

    void report() {
        std::vector<std::string> warnings;
        std::vector<std::pair<std::string, PosteriorTable>> posts;
        std::vector<std::pair<std::string, ConditionalTable>> conds;
        std::vector<TrainRun> runs;

        for (const auto& dir : rc_.inputs) {
            if (!fs::is_directory(dir)) {
                warnings.push_back("missing artifact directory: " + dir.string());
                continue;
            }
            bool found = false;
            for (const std::string kind : {"object", "scene"}) {
                const auto cp = dir / ("conditional_" + kind + ".json");
                const auto pp = dir / ("posterior_" + kind + ".json");
                if (fs::exists(cp) && fs::exists(pp)) {
                    conds.emplace_back(kind, io::conditional_table_from_json(io::read_json(cp)));
                    posts.emplace_back(kind, io::posterior_table_from_json(io::read_json(pp)));
                    found = true;
                } else if (fs::exists(cp) || fs::exists(pp)) {
                    warnings.push_back("incomplete " + kind + " stats in " + dir.string());
                }
            }
            if (fs::exists(dir / "report.json")) {
                runs.push_back({dir, io::read_json(dir / "report.json")});
                found = true;
            }
            if (!found) warnings.push_back("no artifacts in " + dir.string());
        }
        for (const auto& w : warnings) err_ << "warning: " << w << '\n';
        if (conds.empty() && runs.empty()) return;

        std::ostringstream summary;
        for (std::size_t t = 0; t < conds.size(); ++t) {
            const auto& [kind, table] = conds[t];
            const auto& post = posts[t].second;
            const std::string tag = kind + (t >= 2 ? "_" + std::to_string(t) : "");

            std::ostringstream top;
            top << "event,rank,class_id,p_given_event\n";
            const std::size_t k = std::min(rc_.top_k, table.num_classes());
            summary << kind << " concepts: " << table.num_classes() << " classes, " << table.num_events()
                    << " events\n";
            for (std::size_t e = 0; e < table.num_events(); ++e) {
                std::vector<std::size_t> order(table.num_classes());
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) { return table.cond(a, e) > table.cond(b, e); });
                summary << "  event " << e << ":";
                for (std::size_t r = 0; r < k; ++r) {
                    const auto o = order[r];
                    top << e << ',' << r + 1 << ',' << table.class_ids[o] << ','
                        << io::format_double(table.cond(o, e)) << '\n';
                    if (r < 3) summary << ' ' << table.class_ids[o];
                }
                summary << '\n';
            }
            io::write_text(rc_.out / ("topk_" + tag + ".csv"), top.str());

            constexpr std::size_t bins = 20;
            const double hi = *std::max_element(post.marginal.begin(), post.marginal.end());
            std::vector<std::size_t> counts(bins, 0);
            for (double v : post.marginal) {
                const auto b = hi > 0 ? std::min(bins - 1, static_cast<std::size_t>(v / hi * bins)) : 0;
                ++counts[b];
            }
            std::ostringstream hist;
            hist << "bin_lo,bin_hi,count\n";
            for (std::size_t b = 0; b < bins; ++b) {
                hist << io::format_double(hi * b / bins) << ',' << io::format_double(hi * (b + 1) / bins) << ','
                     << counts[b] << '\n';
            }
            io::write_text(rc_.out / ("marginal_hist_" + tag + ".csv"), hist.str());
        }

        if (!runs.empty()) {
            std::ostringstream cmp;
            cmp << "mode,run,final_iter,train_loss,test_loss,generalization_gap,test_acc,test_map\n";
            for (std::size_t r = 0; r < runs.size(); ++r) {
                const auto& rep = runs[r].report;
                const auto& points = rep.at("points");
                if (points.empty()) {
                    err_ << "warning: empty curve in " << runs[r].dir.string() << '\n';
                    continue;
                }
                const auto& last = points.back();
                const std::string mode = rep.at("mode").get<std::string>();
                const double train_loss = last.at("train_loss").get<double>();
                const double test_loss = last.at("test_loss").get<double>();
                cmp << mode << ',' << runs[r].dir.filename().string() << ',' << last.at("iter").get<std::size_t>()
                    << ',' << io::format_double(train_loss) << ',' << io::format_double(test_loss) << ','
                    << io::format_double(test_loss - train_loss) << ','
                    << io::format_double(last.at("test_acc").get<double>()) << ','
                    << io::format_double(last.at("test_map").get<double>()) << '\n';

                std::ostringstream curve;
                curve << "iter,train_loss,test_loss,test_acc,test_map\n";
                for (const auto& p : points) {
                    curve << p.at("iter").get<std::size_t>() << ',' << io::format_double(p.at("train_loss").get<double>())
                          << ',' << io::format_double(p.at("test_loss").get<double>()) << ','
                          << io::format_double(p.at("test_acc").get<double>()) << ','
                          << io::format_double(p.at("test_map").get<double>()) << '\n';
                }
                io::write_text(rc_.out / ("curve_" + mode + "_" + std::to_string(r) + ".csv"), curve.str());
                summary << mode << " run " << runs[r].dir.filename().string() << ": test_acc "
                        << last.at("test_acc").get<double>() << ", test_map " << last.at("test_map").get<double>()
                        << '\n';
            }
            io::write_text(rc_.out / "comparison.csv", cmp.str());
        }
        io::write_text(rc_.out / "summary.txt", summary.str());
        write_resolved();
    }
};

std::string one_line(std::string msg) {
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    while (!msg.empty() && msg.back() == ' ') msg.pop_back();
    return msg;
}

}  // namespace

void RunConfig::resolve() {
    if (k == 0) k = kind == ConceptKind::object ? kDefaultObjectK : kDefaultSceneK;
    transfer.seed = seed;
    generator.seed = seed;
    crop.validate();
    transfer.validate();
    generator.validate();
}

json to_json(const RunConfig& c) {
    std::vector<std::string> inputs;
    for (const auto& p : c.inputs) inputs.push_back(path_str(p));
    return json{{"subcommand", c.subcommand},
                {"seed", c.seed},
                {"verbosity", c.verbosity},
                {"out", path_str(c.out)},
                {"stats", {{"responses", path_str(c.responses)}, {"labels", path_str(c.labels)}, {"kind", to_string(c.kind)}}},
                {"select", {{"table", path_str(c.table)}, {"k", c.k}, {"lambda", c.lambda}, {"oracle", c.oracle}}},
                {"train",
                 {{"train", path_str(c.train_data)},
                  {"test", path_str(c.test_data)},
                  {"soft_targets", path_str(c.soft_targets)},
                  {"aux", path_str(c.aux_data)},
                  {"source", path_str(c.source)},
                  {"hidden", c.hidden}}},
                {"transfer", transfer_json(c.transfer)},
                {"infer",
                 {{"checkpoint_o", path_str(c.checkpoint_o)},
                  {"checkpoint_s", path_str(c.checkpoint_s)},
                  {"image_dir", path_str(c.image_dir)},
                  {"alpha_o", c.fusion.object},
                  {"alpha_s", c.fusion.scene}}},
                {"crop", io::to_json(c.crop)},
                {"gen", {{"preset", c.preset}}},
                {"generator", io::to_json(c.generator)},
                {"report", {{"inputs", inputs}, {"top_k", c.top_k}}}};
}

void apply_json(RunConfig& c, const json& j) {
    auto path = [](const json& obj, const char* key, fs::path& dst) {
        if (obj.contains(key)) dst = obj.at(key).get<std::string>();
    };
    c.subcommand = j.value("subcommand", c.subcommand);
    c.seed = j.value("seed", c.seed);
    c.verbosity = j.value("verbosity", c.verbosity);
    path(j, "out", c.out);
    if (j.contains("stats")) {
        const auto& s = j.at("stats");
        path(s, "responses", c.responses);
        path(s, "labels", c.labels);
        if (s.contains("kind")) c.kind = concept_kind_from_string(s.at("kind").get<std::string>());
    }
    if (j.contains("select")) {
        const auto& s = j.at("select");
        path(s, "table", c.table);
        c.k = s.value("k", c.k);
        c.lambda = s.value("lambda", c.lambda);
        c.oracle = s.value("oracle", c.oracle);
    }
    if (j.contains("train")) {
        const auto& s = j.at("train");
        path(s, "train", c.train_data);
        path(s, "test", c.test_data);
        path(s, "soft_targets", c.soft_targets);
        path(s, "aux", c.aux_data);
        path(s, "source", c.source);
        c.hidden = s.value("hidden", c.hidden);
    }
    if (j.contains("transfer")) c.transfer = io::transfer_config_from_json(j.at("transfer"), c.transfer);
    if (j.contains("infer")) {
        const auto& s = j.at("infer");
        path(s, "checkpoint_o", c.checkpoint_o);
        path(s, "checkpoint_s", c.checkpoint_s);
        path(s, "image_dir", c.image_dir);
        c.fusion.object = s.value("alpha_o", c.fusion.object);
        c.fusion.scene = s.value("alpha_s", c.fusion.scene);
    }
    if (j.contains("crop")) c.crop = io::crop_config_from_json(j.at("crop"), c.crop);
    if (j.contains("gen")) c.preset = j.at("gen").value("preset", c.preset);
    if (j.contains("generator")) c.generator = io::generator_config_from_json(j.at("generator"), c.generator);
    if (j.contains("report")) {
        const auto& s = j.at("report");
        if (s.contains("inputs")) {
            c.inputs.clear();
            for (const auto& p : s.at("inputs")) c.inputs.emplace_back(p.get<std::string>());
        }
        c.top_k = s.value("top_k", c.top_k);
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"os2e: concept statistics, selection, transfer training and multi-crop inference", "os2e"};
    app.require_subcommand(1);

    Overrides flags;
    std::string config_path;
    std::string preset_flag;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
        flags.add<std::uint64_t>(sub, "--seed", "global seed", [](RunConfig& c, const std::uint64_t& v) { c.seed = v; });
        flags.add<std::string>(sub, "--out", "output directory", [](RunConfig& c, const std::string& v) { c.out = v; });
        flags.add_flag(sub, "-v,--verbose", "progress on stderr",
                       [](RunConfig& c, std::size_t n) { c.verbosity = static_cast<int>(n); });
    };
    auto kind_flag = [&](CLI::App* sub) {
        flags.add<std::string>(sub, "--kind", "object|scene",
                               [](RunConfig& c, const std::string& v) { c.kind = concept_kind_from_string(v); });
    };
    using P = std::string;

    auto* stats = app.add_subcommand("stats", "conditional and posterior tables from concept responses");
    common(stats);
    kind_flag(stats);
    flags.add<P>(stats, "--responses", "response CSV", [](RunConfig& c, const P& v) { c.responses = v; });
    flags.add<P>(stats, "--labels", "event label CSV", [](RunConfig& c, const P& v) { c.labels = v; });

    auto* select = app.add_subcommand("select", "greedy concept subset selection");
    common(select);
    kind_flag(select);
    flags.add<P>(select, "--table", "conditional table JSON", [](RunConfig& c, const P& v) { c.table = v; });
    flags.add<std::size_t>(select, "--k", "subset size", [](RunConfig& c, const std::size_t& v) { c.k = v; });
    flags.add<double>(select, "--lambda", "diversity weight", [](RunConfig& c, const double& v) { c.lambda = v; });
    flags.add_flag(select, "--oracle", "also solve exactly (small tables only)",
                   [](RunConfig& c, std::size_t) { c.oracle = true; });

    auto* train = app.add_subcommand("train", "transfer fine-tuning");
    common(train);
    flags.add<P>(train, "--mode", "init|knowledge|data",
                 [](RunConfig& c, const P& v) { c.transfer.mode = transfer_mode_from_string(v); });
    flags.add<std::string>(train, "--teacher", "object|scene: picks the default alpha", [](RunConfig& c, const std::string& v) {
        c.transfer.alpha = default_alpha(concept_kind_from_string(v));
    });
    flags.add<double>(train, "--alpha", "soft target loss weight",
                      [](RunConfig& c, const double& v) { c.transfer.alpha = v; });
    flags.add<double>(train, "--beta", "aux loss weight", [](RunConfig& c, const double& v) { c.transfer.beta = v; });
    flags.add<std::size_t>(train, "--schedule", "decay period K (stops at 2.5K)",
                           [](RunConfig& c, const std::size_t& v) { c.transfer.decay_period = v; });
    flags.add<double>(train, "--learning-rate", "base learning rate",
                      [](RunConfig& c, const double& v) { c.transfer.learning_rate = v; });
    flags.add<double>(train, "--momentum", "SGD momentum",
                      [](RunConfig& c, const double& v) { c.transfer.momentum = v; });
    flags.add<std::size_t>(train, "--batch-size", "batch size",
                           [](RunConfig& c, const std::size_t& v) { c.transfer.batch_size = v; });
    flags.add<double>(train, "--dropout-rate", "dropout rate",
                      [](RunConfig& c, const double& v) { c.transfer.dropout_rate = v; });
    flags.add<std::size_t>(train, "--eval-every", "evaluation interval",
                           [](RunConfig& c, const std::size_t& v) { c.transfer.eval_every = v; });
    flags.add<P>(train, "--soft-direction", "target_as_distribution|prediction_as_distribution",
                 [](RunConfig& c, const P& v) { c.transfer.soft_direction = soft_direction_from_string(v); });
    flags.add<P>(train, "--train", "training dataset CSV", [](RunConfig& c, const P& v) { c.train_data = v; });
    flags.add<P>(train, "--test", "test dataset CSV", [](RunConfig& c, const P& v) { c.test_data = v; });
    flags.add<P>(train, "--soft-targets", "soft target CSV (knowledge mode)",
                 [](RunConfig& c, const P& v) { c.soft_targets = v; });
    flags.add<P>(train, "--aux", "auxiliary dataset CSV (data mode)", [](RunConfig& c, const P& v) { c.aux_data = v; });
    flags.add<P>(train, "--source", "source checkpoint JSON", [](RunConfig& c, const P& v) { c.source = v; });
    flags.add<std::vector<std::size_t>>(train, "--hidden", "trunk widths when no source is given",
                                        [](RunConfig& c, const std::vector<std::size_t>& v) { c.hidden = v; });

    auto* infer = app.add_subcommand("infer", "multi-crop two-stream recognition");
    common(infer);
    flags.add<P>(infer, "--checkpoint-o", "object stream checkpoint", [](RunConfig& c, const P& v) { c.checkpoint_o = v; });
    flags.add<P>(infer, "--checkpoint-s", "scene stream checkpoint", [](RunConfig& c, const P& v) { c.checkpoint_s = v; });
    flags.add<P>(infer, "--image-dir", "directory of .img files", [](RunConfig& c, const P& v) { c.image_dir = v; });
    flags.add<P>(infer, "--crop-config", "CropConfig JSON", [](RunConfig& c, const P& v) {
        c.crop = io::crop_config_from_json(io::read_json(v), c.crop);
    });
    flags.add<double>(infer, "--alpha-o", "object stream weight", [](RunConfig& c, const double& v) { c.fusion.object = v; });
    flags.add<double>(infer, "--alpha-s", "scene stream weight", [](RunConfig& c, const double& v) { c.fusion.scene = v; });

    auto* gen = app.add_subcommand("gen", "synthetic planted-concept data");
    common(gen);
    gen->add_option("--preset", preset_flag, "responses|recovery|vectors|images");
    flags.add<P>(gen, "--out-dir", "output directory", [](RunConfig& c, const P& v) { c.out = v; });
    flags.add<std::size_t>(gen, "--num-events", "event classes",
                           [](RunConfig& c, const std::size_t& v) { c.generator.num_events = v; });
    flags.add<double>(gen, "--concentration", "signature logit boost",
                      [](RunConfig& c, const double& v) { c.generator.concentration = v; });
    flags.add<double>(gen, "--noise-sigma", "noise scale",
                      [](RunConfig& c, const double& v) { c.generator.noise_sigma = v; });
    flags.add<std::size_t>(gen, "--train-count", "training samples",
                           [](RunConfig& c, const std::size_t& v) { c.generator.train_count = v; });
    flags.add<std::size_t>(gen, "--test-count", "test samples",
                           [](RunConfig& c, const std::size_t& v) { c.generator.test_count = v; });

    auto* report = app.add_subcommand("report", "summaries and plot-ready tables from run directories");
    common(report);
    flags.add<std::vector<std::string>>(report, "--in", "artifact directories", [](RunConfig& c, const std::vector<std::string>& v) {
        c.inputs.assign(v.begin(), v.end());
    });
    flags.add<std::size_t>(report, "--top-k", "concepts per event", [](RunConfig& c, const std::size_t& v) { c.top_k = v; });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "os2e: error: " << one_line(e.what()) << '\n';
        return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
    }

    try {
        RunConfig rc;
        rc.subcommand = app.get_subcommands().front()->get_name();
        json file;
        if (!config_path.empty()) {
            require_file(config_path, "--config");
            file = io::read_json(config_path);
        }
        rc.preset = !preset_flag.empty() ? preset_flag : file.is_object() ? file.value("gen", json::object()).value("preset", rc.preset) : rc.preset;
        rc.generator = generator_preset(rc.preset);
        if (file.is_object()) apply_json(rc, file);
        rc.subcommand = app.get_subcommands().front()->get_name();
        rc.preset = !preset_flag.empty() ? preset_flag : rc.preset;
        flags.apply(rc);
        rc.resolve();

        Runner(std::move(rc), err).dispatch();
        return 0;
    } catch (const std::exception& e) {
        err << "os2e: error: " << one_line(e.what()) << '\n';
        return 1;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace os2e::cli
