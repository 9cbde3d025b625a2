#pragma once
// Readers and writers for every exchanged file.
//
//   responses CSV     image_id,<class id>...          one row per image
//   labels CSV        image_id,event_index
//   dataset CSV       sample_id,label,f_0,...,f_{d-1}
//   soft targets CSV  sample_id,t_0,...,t_{K-1}
//   scores CSV        image_id,score_0,...,score_{M-1}
//   selection CSV     rank,class_id,entropy_bits,step_cost
//   curve CSV         iter,train_loss,test_loss,test_acc,test_map
//   image file        "H W C" header line, then H*W*C row-major floats
//   JSON              tables, selections, checkpoints, reports, configs
//
// Parse errors name the file and 1-based line number.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "os2e/concept_stats.hpp"
#include "os2e/datagen.hpp"
#include "os2e/infer_pipeline.hpp"
#include "os2e/neural_core.hpp"
#include "os2e/subset_select.hpp"
#include "os2e/transfer_train.hpp"

namespace os2e::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& where);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);
void write_text(const fs::path& path, const std::string& text);

// -----------------------------
// concept responses and labels
// -----------------------------
void write_response_csv(const fs::path& path, const ResponseMatrix& responses);
/// Rows are checked against the simplex with the ingestion tolerance.
ResponseMatrix read_response_csv(const fs::path& path, ConceptKind kind = ConceptKind::object);

void write_labels_csv(const fs::path& path, const EventLabels& labels, const std::vector<std::string>& image_ids);
/// With no event count, M = max label + 1.
EventLabels read_labels_csv(const fs::path& path, std::optional<std::size_t> num_events = std::nullopt,
                            std::vector<std::string>* image_ids = nullptr);

// -----------------------------
// tables and selection
// -----------------------------
json to_json(const ConditionalTable& t);
ConditionalTable conditional_table_from_json(const json& j);
json to_json(const PosteriorTable& t);
PosteriorTable posterior_table_from_json(const json& j);

json to_json(const SelectionResult& r, const std::vector<std::string>& class_ids);
SelectionResult selection_result_from_json(const json& j);
void write_selection_report_csv(const fs::path& path, const SelectionResult& r, const SelectionProblem& problem,
                                const std::vector<std::string>& class_ids);

// -----------------------------
// networks and training
// -----------------------------
json to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const json& j);
json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const json& j);
void write_checkpoint(const fs::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const fs::path& path);

json to_json(const TransferConfig& c);
TransferConfig transfer_config_from_json(const json& j, TransferConfig base = {});
json to_json(const TrainReport& r);
void write_curve_csv(const fs::path& path, const TrainReport& r);

void write_dataset_csv(const fs::path& path, const Dataset& d);
Dataset read_dataset_csv(const fs::path& path, std::optional<std::size_t> num_classes = std::nullopt,
                         Split split = Split::train);
void write_matrix_csv(const fs::path& path, const Matrix& m, const std::string& id_column,
                      const std::string& value_prefix);
Matrix read_matrix_csv(const fs::path& path);

// -----------------------------
// images and inference
// -----------------------------
void write_image(const fs::path& path, const ImageBuffer& image);
ImageBuffer read_image(const fs::path& path);

json to_json(const CropConfig& c);
CropConfig crop_config_from_json(const json& j, CropConfig base = {});
json to_json(const RegionSpec& s);
void write_scores_csv(const fs::path& path, const std::vector<std::string>& image_ids, const Matrix& scores);

json to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(const json& j, GeneratorConfig base = {});
json to_json(const PlantedTruth& t);

}  // namespace os2e::io
