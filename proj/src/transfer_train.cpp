#include "os2e/transfer_train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "os2e/concept_stats.hpp"

namespace os2e {

namespace {

// Stream ids for the trainer's independent random sequences.
constexpr std::uint64_t kBatchStream = 11;
constexpr std::uint64_t kAuxBatchStream = 12;
constexpr std::uint64_t kDropoutStream = 13;
constexpr std::uint64_t kAugmentStream = 14;

// Epoch-wise shuffled index stream.
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::size_t batch, Rng rng) : n_(n), batch_(std::min(batch, n)), rng_(rng) {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), 0);
        pos_ = n_;
    }

    std::vector<std::size_t> next() {
        std::vector<std::size_t> out;
        out.reserve(batch_);
        while (out.size() < batch_) {
            if (pos_ == n_) {
                std::iota(order_.begin(), order_.end(), 0);
                rng_.shuffle(order_);
                pos_ = 0;
            }
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    std::size_t n_;
    std::size_t batch_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_;
};

std::vector<std::size_t> gather_labels(const std::vector<std::size_t>& labels, std::span<const std::size_t> idx) {
    std::vector<std::size_t> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(labels[i]);
    return out;
}

Matrix batch_features(const Dataset& data, std::span<const std::size_t> idx, const TransferConfig& config,
                      Rng& augment_rng) {
    if (data.images.empty()) return gather_rows(data.features, idx);
    Matrix out(idx.size(), data.features.cols);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const ImageBuffer crop = subtract_mean(
            training_crop_sample(data.images[idx[b]], config.crop, config.train_crops, augment_rng),
            config.crop.mean_pixel);
        if (crop.pixels.size() != out.cols) throw Error("augmented crop size does not match feature width");
        std::copy(crop.pixels.begin(), crop.pixels.end(), out.row(b).begin());
    }
    return out;
}

std::size_t event_path_size(const ParamStore& params) {
    const auto& bias = params.slot("head.0.bias");
    return bias.offset + bias.size();
}

struct TrainInputs {
    const Checkpoint* source = nullptr;
    const Dataset* train = nullptr;
    const Dataset* test = nullptr;
    const Matrix* soft_targets = nullptr;
    const Dataset* aux = nullptr;
    // Probe runs start from a fresh random network rather than a source trunk.
    std::optional<NetworkConfig> fresh_network;
};

EvalPoint evaluate_point(std::size_t iteration, const Checkpoint& ckpt, const Dataset& train, const Dataset& test) {
    EvalPoint p;
    p.iteration = iteration;
    p.train_loss = dataset_loss(ckpt, train);
    p.test_loss = dataset_loss(ckpt, test);
    const Matrix scores = predict(ckpt, test.features);
    const EvalResult er = evaluate(scores, test.labels);
    p.test_accuracy = er.accuracy;
    p.test_map = er.mean_ap;
    return p;
}

TrainReport run_training(const TrainInputs& in, const TransferConfig& config) {
    config.validate();
    const Dataset& train = *in.train;
    const Dataset& test = *in.test;
    train.validate();
    test.validate();
    if (train.size() == 0) throw Error("empty training set");
    if (test.size() == 0) throw Error("empty test set");
    if (train.features.cols != test.features.cols) throw Error("train/test feature widths differ");
    if (test.num_classes != train.num_classes) throw Error("train/test class counts differ");

    const auto start = std::chrono::steady_clock::now();
    std::optional<std::size_t> aux_classes;
    if (config.mode == TransferMode::knowledge) {
        if (!in.soft_targets) throw Error("knowledge transfer needs soft targets");
        if (in.soft_targets->rows != train.size()) {
            throw Error("missing soft target rows: have " + std::to_string(in.soft_targets->rows) + ", need " +
                        std::to_string(train.size()));
        }
        aux_classes = in.soft_targets->cols;
    } else if (config.mode == TransferMode::data) {
        if (!in.aux || in.aux->size() == 0) throw Error("empty aux dataset");
        in.aux->validate();
        if (in.aux->features.cols != train.features.cols) throw Error("aux feature width does not match target");
        aux_classes = in.aux->num_classes;
    }

    TrainReport report;
    report.mode = config.mode;
    Checkpoint& ckpt = report.checkpoint;
    if (in.fresh_network) {
        ckpt.config = *in.fresh_network;
        ckpt.params = init_params(ckpt.config, config.seed);
    } else {
        ckpt.config = transfer_network(in.source->config, train.num_classes, aux_classes, config);
        if (ckpt.config.input_dim != train.features.cols) throw Error("source input_dim does not match dataset");
        ckpt.params = init_from_source(ckpt.config, in.source->config, in.source->params, config.seed);
    }
    const NetworkConfig& net = ckpt.config;
    ParamStore& params = ckpt.params;

    BatchSampler sampler(train.size(), config.batch_size, Rng::stream(config.seed, kBatchStream));
    std::optional<BatchSampler> aux_sampler;
    if (in.aux && config.mode == TransferMode::data) {
        aux_sampler.emplace(in.aux->size(), config.batch_size, Rng::stream(config.seed, kAuxBatchStream));
    }
    Rng dropout_rng = Rng::stream(config.seed, kDropoutStream);
    Rng augment_rng = Rng::stream(config.seed, kAugmentStream);
    std::vector<double> velocity(params.values.size(), 0.0);

    const std::size_t total = config.total_iterations();
    const std::size_t path = event_path_size(params);
    report.event_path_digests.reserve(total);

    for (std::size_t it = 0;; ++it) {
        if (it % config.eval_every == 0 || it == total) report.points.push_back(evaluate_point(it, ckpt, train, test));
        if (it == total) break;

        const auto idx = sampler.next();
        const auto labels = gather_labels(train.labels, idx);
        const Matrix x = batch_features(train, idx, config, augment_rng);
        const ForwardCache cache = forward(net, params, x, Mode::train, &dropout_rng);

        double loss = 0.0;
        std::vector<double> grad;
        if (config.mode == TransferMode::knowledge) {
            const Matrix targets = gather_rows(*in.soft_targets, idx);
            const LossResult r = knowledge_loss(cache, labels, targets, config.alpha, config.soft_direction);
            loss = r.loss;
            grad = backward(net, params, cache, r.grads);
        } else if (config.mode == TransferMode::data && config.beta != 0.0) {
            const auto aux_idx = aux_sampler->next();
            const auto aux_labels = gather_labels(in.aux->labels, aux_idx);
            const Matrix ax = batch_features(*in.aux, aux_idx, config, augment_rng);
            const ForwardCache aux_cache = forward(net, params, ax, Mode::train, &dropout_rng);
            const DataLossResult r = data_loss(cache, labels, aux_cache, aux_labels, config.beta);
            loss = r.loss;
            grad = data_loss_gradient(net, params, r, cache, aux_cache);
        } else {
            // init mode, and data mode with the auxiliary branch disabled (beta == 0)
            const LossResult r = cross_entropy_loss(cache, labels, 0);
            loss = r.loss;
            grad = backward(net, params, cache, r.grads);
        }
        if (!std::isfinite(loss)) throw Error("divergence at iteration " + std::to_string(it));
        try {
            sgd_momentum_step(params.values, grad, velocity, config.lr_at(it), config.momentum);
        } catch (const Error&) {
            throw Error("divergence at iteration " + std::to_string(it));
        }

        if (net.norm.enabled && !net.norm.frozen) {
            // Running statistics follow the batch statistics used in this step.
            const Matrix h = trunk_features(net, params, x);
            for (std::size_t j = 0; j < h.cols; ++j) {
                double mean = 0.0, var = 0.0;
                for (std::size_t r = 0; r < h.rows; ++r) mean += h(r, j);
                mean /= static_cast<double>(h.rows);
                for (std::size_t r = 0; r < h.rows; ++r) var += (h(r, j) - mean) * (h(r, j) - mean);
                var /= static_cast<double>(h.rows);
                params.norm_mean[j] += config.norm_momentum * (mean - params.norm_mean[j]);
                params.norm_var[j] += config.norm_momentum * (var - params.norm_var[j]);
            }
        }
        report.event_path_digests.push_back(digest(std::span<const double>(params.values.data(), path)));
    }

    for (const auto& p : report.points) {
        if (!std::isfinite(p.train_loss) || !std::isfinite(p.test_loss)) throw Error("non-finite evaluation metric");
    }
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace

std::string to_string(TransferMode m) {
    switch (m) {
        case TransferMode::init: return "init";
        case TransferMode::knowledge: return "knowledge";
        case TransferMode::data: return "data";
    }
    return "init";
}

TransferMode transfer_mode_from_string(const std::string& s) {
    if (s == "init") return TransferMode::init;
    if (s == "knowledge") return TransferMode::knowledge;
    if (s == "data") return TransferMode::data;
    throw Error("unknown transfer mode: " + s);
}

std::string to_string(Split s) {
    return s == Split::train ? "train" : "test";
}

void Dataset::validate() const {
    if (features.rows != labels.size()) throw Error("dataset " + name + ": feature rows do not match labels");
    if (num_classes == 0) throw Error("dataset " + name + ": class count must be positive");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes) throw Error("dataset " + name + ": label out of range at " + std::to_string(i));
    }
    if (!images.empty() && images.size() != labels.size()) throw Error("dataset " + name + ": image count mismatch");
}

void TransferConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (!(lr_decay > 0.0)) throw Error("lr decay must be positive");
    if (eval_every == 0) throw Error("eval_every must be >= 1");
    if (batch_size == 0) throw Error("batch size must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must be in [0, 1)");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout_rate must be in [0, 1)");
    if (mode == TransferMode::knowledge && !(alpha >= 0.0)) throw Error("knowledge mode needs alpha >= 0");
    if (mode == TransferMode::data && !(beta >= 0.0)) throw Error("data mode needs beta >= 0");
}

double default_alpha(ConceptKind teacher) {
    return teacher == ConceptKind::scene ? kDefaultAlphaSceneTeacher : kDefaultAlphaObjectTeacher;
}

double TransferConfig::lr_at(std::size_t iteration) const {
    if (decay_period == 0) return learning_rate;
    return learning_rate * std::pow(lr_decay, static_cast<double>(iteration / decay_period));
}

double average_precision(std::span<const double> scores, std::span<const bool> positive) {
    if (scores.size() != positive.size()) throw Error("score/label length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    // long double keeps hand-computable cases (e.g. 5/6) correctly rounded.
    long double sum = 0.0L;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (!positive[order[rank]]) continue;
        ++hits;
        sum += static_cast<long double>(hits) / static_cast<long double>(rank + 1);
    }
    if (hits == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(sum / static_cast<long double>(hits));
}

EvalResult evaluate(const Matrix& scores, std::span<const std::size_t> labels) {
    if (scores.rows != labels.size()) throw Error("one score row per test sample required");
    if (scores.rows == 0) throw Error("no test samples");
    const std::size_t m = scores.cols;
    EvalResult out;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        if (labels[i] >= m) throw Error("label out of range");
        const auto row = scores.row(i);
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == labels[i]) ++correct;
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(scores.rows);

    out.average_precision.resize(m);
    out.has_positives.assign(m, false);
    long double sum = 0.0L;
    std::size_t counted = 0;
    std::vector<double> col(scores.rows);
    std::unique_ptr<bool[]> pos(new bool[scores.rows]);
    for (std::size_t k = 0; k < m; ++k) {
        bool any = false;
        for (std::size_t i = 0; i < scores.rows; ++i) {
            col[i] = scores(i, k);
            pos[i] = labels[i] == k;
            any = any || pos[i];
        }
        out.average_precision[k] = average_precision(col, std::span<const bool>(pos.get(), scores.rows));
        out.has_positives[k] = any;
        if (any) {
            sum += out.average_precision[k];
            ++counted;
        }
    }
    out.mean_ap = static_cast<double>(sum / static_cast<long double>(counted));
    return out;
}

NetworkConfig transfer_network(const NetworkConfig& source, std::size_t num_events,
                               std::optional<std::size_t> aux_classes, const TransferConfig& config) {
    NetworkConfig net;
    net.input_dim = source.input_dim;
    net.hidden = source.hidden;
    net.norm = config.norm;
    net.dropout_rate = config.dropout_rate;
    net.heads = {num_events};
    if (aux_classes) net.heads.push_back(*aux_classes);
    net.validate();
    return net;
}

TrainReport init_transfer_train(const Checkpoint& source, const Dataset& train, const Dataset& test,
                                const TransferConfig& config) {
    TransferConfig c = config;
    c.mode = TransferMode::init;
    TrainInputs in{&source, &train, &test, nullptr, nullptr, std::nullopt};
    return run_training(in, c);
}

TrainReport knowledge_transfer_train(const Checkpoint& source, const Dataset& train, const Dataset& test,
                                     const Matrix& soft_targets, const TransferConfig& config) {
    TransferConfig c = config;
    c.mode = TransferMode::knowledge;
    TrainInputs in{&source, &train, &test, &soft_targets, nullptr, std::nullopt};
    return run_training(in, c);
}

TrainReport data_transfer_train(const Checkpoint& source, const Dataset& train, const Dataset& test,
                                const Dataset& aux, const TransferConfig& config) {
    TransferConfig c = config;
    c.mode = TransferMode::data;
    TrainInputs in{&source, &train, &test, nullptr, &aux, std::nullopt};
    return run_training(in, c);
}

TrainReport transfer_train(const Checkpoint& source, const Dataset& train, const Dataset& test,
                           const Matrix* soft_targets, const Dataset* aux, const TransferConfig& config) {
    switch (config.mode) {
        case TransferMode::init: return init_transfer_train(source, train, test, config);
        case TransferMode::knowledge:
            if (!soft_targets) throw Error("knowledge transfer needs soft targets");
            return knowledge_transfer_train(source, train, test, *soft_targets, config);
        case TransferMode::data:
            if (!aux) throw Error("empty aux dataset");
            return data_transfer_train(source, train, test, *aux, config);
    }
    throw Error("unknown transfer mode");
}

TrainReport linear_probe_train(const Matrix& train_features, std::span<const std::size_t> train_labels,
                               const Matrix& test_features, std::span<const std::size_t> test_labels,
                               std::size_t num_classes, const TransferConfig& config) {
    Dataset train{l2_normalize_rows(train_features), {train_labels.begin(), train_labels.end()}, num_classes,
                  Split::train, "probe-train", {}};
    Dataset test{l2_normalize_rows(test_features), {test_labels.begin(), test_labels.end()}, num_classes,
                 Split::test, "probe-test", {}};
    NetworkConfig net;
    net.input_dim = train.features.cols;
    net.dropout_rate = 0.0;
    net.heads = {num_classes};
    TransferConfig c = config;
    c.mode = TransferMode::init;
    c.dropout_rate = 0.0;
    TrainInputs in{nullptr, &train, &test, nullptr, nullptr, net};
    return run_training(in, c);
}

Checkpoint random_checkpoint(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t num_classes,
                             std::uint64_t seed) {
    Checkpoint c;
    c.config.input_dim = input_dim;
    c.config.hidden = std::move(hidden);
    c.config.heads = {num_classes};
    c.params = init_params(c.config, seed);
    return c;
}

Checkpoint train_source_model(const Dataset& data, std::vector<std::size_t> hidden, const TransferConfig& config) {
    NetworkConfig net;
    net.input_dim = data.features.cols;
    net.hidden = std::move(hidden);
    net.dropout_rate = config.dropout_rate;
    net.norm = config.norm;
    net.heads = {data.num_classes};
    TransferConfig c = config;
    c.mode = TransferMode::init;
    // The source is evaluated on its own training data; only the checkpoint matters.
    TrainInputs in{nullptr, &data, &data, nullptr, nullptr, net};
    TrainReport r = run_training(in, c);
    estimate_norm_statistics(r.checkpoint.config, r.checkpoint.params, data.features);
    return std::move(r.checkpoint);
}

Matrix predict(const Checkpoint& checkpoint, const Matrix& features) {
    const ForwardCache cache = forward(checkpoint.config, checkpoint.params, features, Mode::eval);
    return cache.probs[0];
}

double dataset_loss(const Checkpoint& checkpoint, const Dataset& data) {
    const ForwardCache cache = forward(checkpoint.config, checkpoint.params, data.features, Mode::eval);
    return cross_entropy_loss(cache, data.labels, 0).loss;
}

}  // namespace os2e
