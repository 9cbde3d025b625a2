#pragma once
// Transfer-learning drivers: initialization-based, knowledge-based (soft-target
// imitation head) and data-based (shared trunk, auxiliary dataset head), plus a
// softmax linear probe and the accuracy / mAP evaluation protocol.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "os2e/common.hpp"
#include "os2e/concept_stats.hpp"
#include "os2e/infer_pipeline.hpp"
#include "os2e/neural_core.hpp"

namespace os2e {

enum class TransferMode { init, knowledge, data };
enum class Split { train, test };

std::string to_string(TransferMode m);
TransferMode transfer_mode_from_string(const std::string& s);
std::string to_string(Split s);

struct Dataset {
    Matrix features;
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;
    Split split = Split::train;
    std::string name;
    // When non-empty, training batches are built from augmented crops of these
    // images; `features` then holds the evaluation (centre crop) features.
    std::vector<ImageBuffer> images;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

struct TransferConfig {
    TransferMode mode = TransferMode::init;
    double alpha = kDefaultAlphaObjectTeacher;
    double beta = kDefaultBeta;
    double learning_rate = kDefaultLearningRate;
    double lr_decay = 0.1;
    std::size_t decay_period = 300;  // K: lr decays every K iterations, training stops at 2.5K
    double momentum = kDefaultMomentum;
    std::size_t batch_size = 32;
    double dropout_rate = kDefaultDropout;
    std::uint64_t seed = 0;
    SoftDirection soft_direction = SoftDirection::target_as_distribution;
    std::size_t eval_every = 50;
    NormConfig norm;
    double norm_momentum = 0.1;  // running-statistics update when the norm layer is not frozen
    CropConfig crop;             // used only for image-fed datasets
    TrainCropConfig train_crops = default_train_crops(256);

    void validate() const;
    std::size_t total_iterations() const { return decay_period * 5 / 2; }
    double lr_at(std::size_t iteration) const;
};

/// Soft-target loss weight for an object teacher (0.125) or a scene teacher (0.25).
double default_alpha(ConceptKind teacher);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> average_precision;  // NaN for classes without positives
    std::vector<bool> has_positives;
    double mean_ap = 0.0;
};

/// Non-interpolated AP of one class: mean precision at the ranks of its positives, ranked
/// by descending score with ties broken by ascending sample index. NaN with no positives.
double average_precision(std::span<const double> scores, std::span<const bool> positive);

/// accuracy by argmax (lowest index on ties); mAP over classes with >= 1 positive.
EvalResult evaluate(const Matrix& scores, std::span<const std::size_t> labels);

struct EvalPoint {
    std::size_t iteration = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    double test_map = 0.0;
};

struct TrainReport {
    TransferMode mode = TransferMode::init;
    std::vector<EvalPoint> points;
    Checkpoint checkpoint;
    double wall_clock_seconds = 0.0;
    // Digest of the trunk + event head parameters after every update.
    std::vector<std::uint64_t> event_path_digests;

    const EvalPoint& final_point() const { return points.back(); }
};

/// Builds the network config for a transfer run from the source trunk.
NetworkConfig transfer_network(const NetworkConfig& source, std::size_t num_events,
                               std::optional<std::size_t> aux_classes, const TransferConfig& config);

TrainReport init_transfer_train(const Checkpoint& source, const Dataset& train, const Dataset& test,
                                const TransferConfig& config);

/// `soft_targets` has one row per training sample.
TrainReport knowledge_transfer_train(const Checkpoint& source, const Dataset& train, const Dataset& test,
                                     const Matrix& soft_targets, const TransferConfig& config);

TrainReport data_transfer_train(const Checkpoint& source, const Dataset& train, const Dataset& test,
                                const Dataset& aux, const TransferConfig& config);

/// Dispatches on config.mode.
TrainReport transfer_train(const Checkpoint& source, const Dataset& train, const Dataset& test,
                           const Matrix* soft_targets, const Dataset* aux, const TransferConfig& config);

/// Single affine + softmax layer on frozen features (rows are l2-normalized first).
TrainReport linear_probe_train(const Matrix& train_features, std::span<const std::size_t> train_labels,
                               const Matrix& test_features, std::span<const std::size_t> test_labels,
                               std::size_t num_classes, const TransferConfig& config);

/// Random network with the given trunk; a head over `num_classes`.
Checkpoint random_checkpoint(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t num_classes,
                             std::uint64_t seed);

/// Trains a source network from random initialization on `data` (plain cross entropy),
/// then stores its trunk-output statistics for a frozen norm layer.
Checkpoint train_source_model(const Dataset& data, std::vector<std::size_t> hidden, const TransferConfig& config);

/// Event-head softmax scores in eval mode.
Matrix predict(const Checkpoint& checkpoint, const Matrix& features);

/// Event-head cross entropy in eval mode.
double dataset_loss(const Checkpoint& checkpoint, const Dataset& data);

}  // namespace os2e
