#pragma once
// Command-line front end: stats, select, train, infer, gen, report.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "os2e/datagen.hpp"
#include "os2e/infer_pipeline.hpp"
#include "os2e/transfer_train.hpp"

namespace os2e::cli {

struct RunConfig {
    std::string subcommand;
    std::uint64_t seed = 0;
    int verbosity = 0;
    std::filesystem::path out = "out";

    // stats
    std::filesystem::path responses;
    std::filesystem::path labels;
    ConceptKind kind = ConceptKind::object;
    // select
    std::filesystem::path table;
    std::size_t k = 0;  // 0 resolves to the per-kind default
    double lambda = 0.5;
    bool oracle = false;
    // train
    std::filesystem::path train_data;
    std::filesystem::path test_data;
    std::filesystem::path soft_targets;
    std::filesystem::path aux_data;
    std::filesystem::path source;
    std::vector<std::size_t> hidden{64};
    TransferConfig transfer;
    // infer
    std::filesystem::path checkpoint_o;
    std::filesystem::path checkpoint_s;
    std::filesystem::path image_dir;
    CropConfig crop;
    FusionWeights fusion;
    // gen
    std::string preset = "responses";
    GeneratorConfig generator = generator_preset("responses");
    // report
    std::vector<std::filesystem::path> inputs;
    std::size_t top_k = 10;

    /// Fills per-kind defaults and copies the global seed into module configs.
    void resolve();
};

nlohmann::json to_json(const RunConfig& c);
/// Overlays the fields present in `j` on top of `c`.
void apply_json(RunConfig& c, const nlohmann::json& j);

/// args excludes the program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace os2e::cli
