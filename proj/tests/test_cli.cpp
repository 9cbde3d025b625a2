#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "os2e/cli.hpp"
#include "os2e/io.hpp"
#include "test_util.hpp"

using namespace os2e;
using os2e::testing::scratch_dir;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures{OS2E_FIXTURE_DIR};

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome os2e_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Outcome o;
    o.code = cli::run(args, out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        rows.push_back(fields);
    }
    return rows;
}

// Small vector benchmark plus a short training schedule.
fs::path vector_data(const std::string& name) {
    const auto dir = scratch_dir(name);
    const auto r = os2e_run({"gen", "--preset", "vectors", "--seed", "3", "--train-count", "32", "--test-count", "40",
                             "--out-dir", (dir / "data").string()});
    REQUIRE(r.code == 0);
    return dir;
}

std::vector<std::string> train_args(const fs::path& dir, const std::string& mode, const fs::path& out) {
    return {"train",      "--mode",   mode,         "--seed",   "7",
            "--train",    (dir / "data/train.csv").string(),
            "--test",     (dir / "data/test.csv").string(),
            "--soft-targets", (dir / "data/soft_targets.csv").string(),
            "--aux",      (dir / "data/aux.csv").string(),
            "--schedule", "20",       "--hidden",   "16",       "--eval-every", "10",
            "--out",      out.string()};
}

}  // namespace

TEST_CASE("select on the bundled fixture") {
    const auto dir = scratch_dir("cli_select");
    const auto r = os2e_run({"select", "--table", (fixtures / "three_class_table.json").string(), "--k", "2", "--out",
                             dir.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto j = io::read_json(dir / "selection.json");
    CHECK(j.at("selected") == io::json::array({0, 1}));
    CHECK(j.at("energy").get<double>() == 0.0);
    CHECK(fs::exists(dir / "selection.csv"));
    CHECK(fs::exists(dir / "resolved_config.json"));
}

TEST_CASE("stats rejects off-simplex responses") {
    const auto dir = scratch_dir("cli_stats_bad");
    const auto r = os2e_run({"stats", "--responses", (fixtures / "off_simplex_responses.csv").string(), "--labels",
                             (fixtures / "off_simplex_labels.csv").string(), "--out", dir.string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("unnormalized scores") != std::string::npos);
    CHECK(r.err.find("off_simplex_responses.csv:3") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("usage errors") {
    CHECK(os2e_run({}).code != 0);
    CHECK(os2e_run({"frobnicate"}).code != 0);
    const auto unknown = os2e_run({"select", "--no-such-flag", "1"});
    CHECK(unknown.code != 0);
    CHECK(unknown.err.rfind("os2e: error:", 0) == 0);
    const auto missing = os2e_run({"select", "--table", "/nonexistent/table.json"});
    CHECK(missing.code != 0);
    CHECK(missing.err.find("/nonexistent/table.json") != std::string::npos);

    // The installed binary behaves the same way.
    const std::string cmd = std::string("\"") + OS2E_CLI_PATH + "\" select --no-such-flag 1 2>/dev/null";
    CHECK(std::system(cmd.c_str()) != 0);
}

TEST_CASE("gen writes a manifest and stats + report produce sorted top-k tables") {
    const auto dir = scratch_dir("cli_stats");
    REQUIRE(os2e_run({"gen", "--preset", "responses", "--seed", "2", "--out-dir", (dir / "data").string()}).code == 0);
    const auto manifest = io::read_json(dir / "data/manifest.json");
    CHECK(manifest.contains("files"));
    CHECK(manifest.contains("truth"));

    const auto s = os2e_run({"stats", "--kind", "object", "--responses", (dir / "data/objects.csv").string(), "--labels",
                             (dir / "data/labels.csv").string(), "--out", (dir / "stats").string()});
    REQUIRE_MESSAGE(s.code == 0, s.err);
    CHECK(fs::exists(dir / "stats/conditional_object.json"));
    CHECK(fs::exists(dir / "stats/posterior_object.json"));

    const auto sel = os2e_run({"select", "--table", (dir / "stats/conditional_object.json").string(), "--k", "6",
                               "--oracle", "--out", (dir / "select").string()});
    REQUIRE_MESSAGE(sel.code == 0, sel.err);
    CHECK(io::read_json(dir / "select/selection.json").at("selected").size() == 6);

    const auto rep = os2e_run({"report", "--in", (dir / "stats").string(), "--top-k", "5", "--out",
                               (dir / "report").string()});
    REQUIRE_MESSAGE(rep.code == 0, rep.err);
    const auto rows = csv_rows(dir / "report/topk_object.csv");
    REQUIRE(rows.size() == 1 + 4 * 5);
    CHECK(rows[0] == std::vector<std::string>{"event", "rank", "class_id", "p_given_event"});
    for (std::size_t i = 2; i < rows.size(); ++i) {
        if (rows[i][0] != rows[i - 1][0]) continue;
        CHECK(std::stod(rows[i][3]) <= std::stod(rows[i - 1][3]));
    }
    CHECK(fs::exists(dir / "report/marginal_hist_object.csv"));
    CHECK(fs::exists(dir / "report/summary.txt"));
}

TEST_CASE("train is deterministic and reproducible from its resolved config") {
    const auto dir = vector_data("cli_train");
    REQUIRE(os2e_run(train_args(dir, "init", dir / "a")).code == 0);
    REQUIRE(os2e_run(train_args(dir, "init", dir / "b")).code == 0);
    CHECK(slurp(dir / "a/checkpoint.json") == slurp(dir / "b/checkpoint.json"));
    CHECK(fs::exists(dir / "a/report.json"));
    CHECK(csv_rows(dir / "a/curve.csv")[0] ==
          std::vector<std::string>{"iter", "train_loss", "test_loss", "test_acc", "test_map"});

    const auto replay = os2e_run({"train", "--config", (dir / "a/resolved_config.json").string(), "--out",
                                  (dir / "c").string()});
    REQUIRE_MESSAGE(replay.code == 0, replay.err);
    CHECK(slurp(dir / "c/checkpoint.json") == slurp(dir / "a/checkpoint.json"));

    // flags override the config file
    auto other = os2e_run({"train", "--config", (dir / "a/resolved_config.json").string(), "--seed", "8", "--out",
                           (dir / "d").string()});
    REQUIRE(other.code == 0);
    CHECK(slurp(dir / "d/checkpoint.json") != slurp(dir / "a/checkpoint.json"));
    CHECK(io::read_json(dir / "d/resolved_config.json").at("seed") == 8);

    auto scene = train_args(dir, "knowledge", dir / "e");
    scene.insert(scene.end(), {"--teacher", "scene"});
    REQUIRE(os2e_run(scene).code == 0);
    CHECK(io::read_json(dir / "e/resolved_config.json").at("transfer").at("alpha") == 0.25);
    auto both = train_args(dir, "knowledge", dir / "f");
    both.insert(both.end(), {"--teacher", "scene", "--alpha", "0.3"});
    REQUIRE(os2e_run(both).code == 0);
    CHECK(io::read_json(dir / "f/resolved_config.json").at("transfer").at("alpha") == 0.3);
}

TEST_CASE("report compares transfer modes") {
    const auto dir = vector_data("cli_report");
    std::vector<std::string> ins;
    for (std::string mode : {"init", "knowledge", "data"}) {
        const auto r = os2e_run(train_args(dir, mode, dir / mode));
        REQUIRE_MESSAGE(r.code == 0, r.err);
        ins.push_back((dir / mode).string());
    }
    std::vector<std::string> args{"report", "--out", (dir / "report").string(), "--in"};
    args.insert(args.end(), ins.begin(), ins.end());
    args.push_back((dir / "missing").string());
    const auto rep = os2e_run(args);
    REQUIRE_MESSAGE(rep.code == 0, rep.err);
    CHECK(rep.err.find("warning:") != std::string::npos);
    const auto rows = csv_rows(dir / "report/comparison.csv");
    REQUIRE(rows.size() == 4);
    CHECK(rows[0][0] == "mode");
    CHECK(rows[1][0] == "init");
    CHECK(rows[2][0] == "knowledge");
    CHECK(rows[3][0] == "data");
    CHECK(fs::exists(dir / "report/curve_init_0.csv"));
}

TEST_CASE("report on an empty directory emits nothing") {
    const auto dir = scratch_dir("cli_empty");
    fs::create_directories(dir / "in");
    const auto r = os2e_run({"report", "--in", (dir / "in").string(), "--out", (dir / "out").string()});
    CHECK(r.code == 0);
    CHECK(r.err.find("warning:") != std::string::npos);
    CHECK((!fs::exists(dir / "out") || fs::is_empty(dir / "out")));
}

TEST_CASE("infer scores images with two checkpoints") {
    const auto dir = scratch_dir("cli_infer");
    REQUIRE(os2e_run({"gen", "--preset", "images", "--seed", "1", "--train-count", "3", "--test-count", "2",
                      "--out-dir", (dir / "data").string()})
                .code == 0);
    // 16 x 16 crops flattened: a random network per stream
    io::write_checkpoint(dir / "o.json", random_checkpoint(256, {8}, 4, 1));
    io::write_checkpoint(dir / "s.json", random_checkpoint(256, {8}, 4, 2));
    const auto r = os2e_run({"infer", "--checkpoint-o", (dir / "o.json").string(), "--checkpoint-s",
                             (dir / "s.json").string(), "--image-dir", (dir / "data/images").string(),
                             "--crop-config", (fixtures / "small_crop.json").string(), "--out",
                             (dir / "out").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto rows = csv_rows(dir / "out/scores.csv");
    REQUIRE(rows.size() == 6);
    CHECK(rows[0] == std::vector<std::string>{"image_id", "score_0", "score_1", "score_2", "score_3"});
    const auto regions = io::read_json(dir / "out/regions.json");
    CHECK(regions.dump().find("\"top\"") != std::string::npos);
    CHECK(fs::exists(dir / "out/resolved_config.json"));
}
