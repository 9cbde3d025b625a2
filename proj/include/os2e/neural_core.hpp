#pragma once
// Small differentiable network used by every transfer mode.
//
//   input -> [affine -> relu] x L -> (standardize) -> dropout -> head_0 softmax
//                                                            \-> head_1 softmax ...
//
// Head 0 is always the event head. Head 1, when present, is the imitation head
// (knowledge transfer) or the auxiliary-dataset head (data transfer).
// Losses use natural log and are averaged over the batch.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "os2e/common.hpp"

namespace os2e {

inline constexpr double kDefaultDropout = 0.7;
inline constexpr double kDefaultLearningRate = 0.01;
inline constexpr double kDefaultMomentum = 0.9;
inline constexpr double kDefaultAlphaObjectTeacher = 0.125;
inline constexpr double kDefaultAlphaSceneTeacher = 0.25;
inline constexpr double kDefaultBeta = 0.5;
inline constexpr double kSoftTargetFloor = 1e-12;

enum class Mode { train, eval };
enum class SoftDirection { target_as_distribution, prediction_as_distribution };

std::string to_string(SoftDirection d);
SoftDirection soft_direction_from_string(const std::string& s);

struct NormConfig {
    bool enabled = false;
    bool frozen = true;  // frozen: stored statistics in train mode too
    double epsilon = 1e-5;

    bool operator==(const NormConfig&) const = default;
};

struct NetworkConfig {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden;
    NormConfig norm;
    double dropout_rate = kDefaultDropout;
    std::vector<std::size_t> heads{1};

    void validate() const;
    std::size_t feature_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
    bool operator==(const NetworkConfig&) const = default;
};

struct LayerSlot {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
    bool operator==(const LayerSlot&) const = default;
};

/// Flat learnable parameters plus the stored standardization statistics.
/// Layout order: trunk.{l}.weight, trunk.{l}.bias for each layer, then head.{h}.weight,
/// head.{h}.bias for each head. Weights are (out x in), row-major.
struct ParamStore {
    std::vector<double> values;
    std::vector<LayerSlot> layout;
    std::uint64_t seed = 0;
    std::vector<double> norm_mean;
    std::vector<double> norm_var;

    const LayerSlot& slot(const std::string& name) const;
    std::span<const double> view(const std::string& name) const;
    std::span<double> view(const std::string& name);
    /// Number of leading values belonging to the trunk.
    std::size_t trunk_size() const;

    bool operator==(const ParamStore&) const = default;
};

struct Checkpoint {
    NetworkConfig config;
    ParamStore params;

    bool operator==(const Checkpoint&) const = default;
};

std::vector<LayerSlot> build_layout(const NetworkConfig& config);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases. Each layer draws
/// from its own stream, so head h is initialized identically regardless of how many
/// heads follow it.
ParamStore init_params(const NetworkConfig& config, std::uint64_t seed);

/// Trunk weights and stored statistics copied from `source`; heads freshly initialized.
ParamStore init_from_source(const NetworkConfig& config, const NetworkConfig& source_config,
                            const ParamStore& source, std::uint64_t seed);

std::uint64_t digest(std::span<const double> values);

struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;   // affine outputs per trunk layer
    std::vector<Matrix> act;   // rectified outputs per trunk layer
    Matrix normalized;         // trunk output after standardization (or the trunk output itself)
    std::vector<double> norm_mean;
    std::vector<double> norm_inv_std;
    bool batch_stats = false;
    Matrix dropout_mask;       // empty when dropout was not applied
    Matrix head_input;
    std::vector<Matrix> logits;
    std::vector<Matrix> log_probs;
    std::vector<Matrix> probs;
    std::uint64_t trunk_digest = 0;
    std::uint64_t param_digest = 0;

    std::size_t batch_size() const { return input.rows; }
};

/// `rng` is required only when mode is train and dropout_rate > 0.
ForwardCache forward(const NetworkConfig& config, const ParamStore& params, const Matrix& inputs,
                     Mode mode, Rng* rng = nullptr);

/// Trunk output (before standardization) in eval mode.
Matrix trunk_features(const NetworkConfig& config, const ParamStore& params, const Matrix& inputs);

/// Sets the stored statistics to the per-feature mean and (biased) variance of the trunk output.
void estimate_norm_statistics(const NetworkConfig& config, ParamStore& params, const Matrix& inputs);

/// Per-head gradients w.r.t. head pre-activations; absent heads receive nothing.
using HeadGradients = std::vector<std::optional<Matrix>>;

struct LossResult {
    double loss = 0.0;
    HeadGradients grads;
};

LossResult cross_entropy_loss(const ForwardCache& cache, std::span<const std::size_t> labels,
                              std::size_t head = 0);

LossResult soft_target_loss(const ForwardCache& cache, const Matrix& targets,
                            SoftDirection direction = SoftDirection::target_as_distribution,
                            std::size_t head = 1);

/// l_C + alpha * l_soft. With alpha == 0 the imitation head gets no gradient at all.
LossResult knowledge_loss(const ForwardCache& cache, std::span<const std::size_t> labels,
                          const Matrix& targets, double alpha,
                          SoftDirection direction = SoftDirection::target_as_distribution);

struct DataLossResult {
    double loss = 0.0;
    HeadGradients event_grads;  // for the event-branch cache, head 0
    HeadGradients aux_grads;    // for the auxiliary-branch cache, head 1 (already scaled by beta)
};

/// l_C(event batch) + beta * l_C(aux batch); both caches must come from the same trunk.
DataLossResult data_loss(const ForwardCache& event_cache, std::span<const std::size_t> event_labels,
                         const ForwardCache& aux_cache, std::span<const std::size_t> aux_labels,
                         double beta);

/// Exact gradient of the loss whose head gradients are given, in ParamStore layout.
std::vector<double> backward(const NetworkConfig& config, const ParamStore& params,
                             const ForwardCache& cache, const HeadGradients& head_grads);

/// Event-branch gradient first, auxiliary branch added second.
std::vector<double> data_loss_gradient(const NetworkConfig& config, const ParamStore& params,
                                       const DataLossResult& result, const ForwardCache& event_cache,
                                       const ForwardCache& aux_cache);

// -----------------------------
// Gradient checking
// -----------------------------
enum class LossKind { cross_entropy, knowledge, data };

struct LossSpec {
    LossKind kind = LossKind::cross_entropy;
    Matrix inputs;
    std::vector<std::size_t> labels;
    Matrix targets;  // knowledge
    Matrix aux_inputs;
    std::vector<std::size_t> aux_labels;
    double alpha = kDefaultAlphaObjectTeacher;
    double beta = kDefaultBeta;
    SoftDirection direction = SoftDirection::target_as_distribution;
    Mode mode = Mode::train;
    std::uint64_t dropout_seed = 0;  // re-seeded per evaluation so the mask stays fixed
};

struct LossEvaluation {
    double loss = 0.0;
    std::vector<double> gradient;
};

LossEvaluation evaluate_loss(const NetworkConfig& config, const ParamStore& params, const LossSpec& spec,
                             bool with_gradient = true);

/// Max of |g_a - g_n| / max(1e-8, |g_a| + |g_n|) against central differences. Checks every
/// parameter when there are at most `max_checked`, otherwise a seeded subset of that size.
double grad_check(const NetworkConfig& config, const ParamStore& params, const LossSpec& spec,
                  double epsilon = 1e-5, std::size_t max_checked = 400, std::uint64_t subset_seed = 0);

// -----------------------------
// Optimization
// -----------------------------

/// v <- momentum * v - lr * g; params <- params + v. Throws "divergence" on non-finite g.
void sgd_momentum_step(std::span<double> params, std::span<const double> gradient,
                       std::span<double> velocity, double lr, double momentum);

}  // namespace os2e
