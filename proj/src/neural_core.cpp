#include "os2e/neural_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace os2e {

namespace {

std::string trunk_name(std::size_t l, const char* part) {
    return "trunk." + std::to_string(l) + "." + part;
}

std::string head_name(std::size_t h, const char* part) {
    return "head." + std::to_string(h) + "." + part;
}

// Stream ids for per-layer initialization.
constexpr std::uint64_t kTrunkStream = 100;
constexpr std::uint64_t kHeadStream = 200;

void init_uniform(std::span<double> w, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : w) x = rng.uniform(-bound, bound);
}

// out = in * W^T + b, W is (out_dim x in_dim).
Matrix affine(const Matrix& in, std::span<const double> w, std::span<const double> b, std::size_t out_dim) {
    Matrix out(in.rows, out_dim);
    const std::size_t in_dim = in.cols;
    for (std::size_t r = 0; r < in.rows; ++r) {
        const auto x = in.row(r);
        auto y = out.row(r);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* wr = w.data() + o * in_dim;
            double acc = b[o];
            for (std::size_t i = 0; i < in_dim; ++i) acc += wr[i] * x[i];
            y[o] = acc;
        }
    }
    return out;
}

// Accumulates dW += G^T X, db += colsum(G); returns dX = G W.
Matrix affine_backward(const Matrix& grad_out, const Matrix& in, std::span<const double> w,
                       std::span<double> dw, std::span<double> db) {
    const std::size_t out_dim = grad_out.cols, in_dim = in.cols;
    Matrix dx(in.rows, in_dim);
    for (std::size_t r = 0; r < in.rows; ++r) {
        const auto g = grad_out.row(r);
        const auto x = in.row(r);
        auto dxr = dx.row(r);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double go = g[o];
            if (go == 0.0) continue;
            db[o] += go;
            double* dwr = dw.data() + o * in_dim;
            const double* wr = w.data() + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) {
                dwr[i] += go * x[i];
                dxr[i] += go * wr[i];
            }
        }
    }
    return dx;
}

void log_softmax_rows(const Matrix& logits, Matrix& log_probs, Matrix& probs) {
    log_probs = Matrix(logits.rows, logits.cols);
    probs = Matrix(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const auto z = logits.row(r);
        const double m = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double v : z) s += std::exp(v - m);
        const double lse = m + std::log(s);
        for (std::size_t k = 0; k < z.size(); ++k) {
            log_probs(r, k) = z[k] - lse;
            probs(r, k) = std::exp(log_probs(r, k));
        }
    }
}

void check_head(const ForwardCache& cache, std::size_t head) {
    if (head >= cache.probs.size()) throw Error("head " + std::to_string(head) + " not present");
}

void check_labels(std::span<const std::size_t> labels, std::size_t batch, std::size_t classes) {
    if (labels.size() != batch) throw Error("label count does not match batch size");
    for (std::size_t y : labels) {
        if (y >= classes) throw Error("label out of range for head");
    }
}

HeadGradients empty_grads(const ForwardCache& cache) {
    return HeadGradients(cache.probs.size());
}

}  // namespace

std::string to_string(SoftDirection d) {
    return d == SoftDirection::target_as_distribution ? "target_as_distribution" : "prediction_as_distribution";
}

SoftDirection soft_direction_from_string(const std::string& s) {
    if (s == "target_as_distribution") return SoftDirection::target_as_distribution;
    if (s == "prediction_as_distribution") return SoftDirection::prediction_as_distribution;
    throw Error("unknown soft direction: " + s);
}

void NetworkConfig::validate() const {
    if (input_dim == 0) throw Error("input_dim must be >= 1");
    for (std::size_t w : hidden) {
        if (w == 0) throw Error("hidden widths must be >= 1");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout_rate must be in [0, 1)");
    if (heads.empty() || heads.size() > 2) throw Error("network needs one or two heads");
    for (std::size_t k : heads) {
        if (k == 0) throw Error("head dims must be >= 1");
    }
    if (norm.enabled && !(norm.epsilon > 0.0)) throw Error("norm epsilon must be positive");
}

const LayerSlot& ParamStore::slot(const std::string& name) const {
    for (const auto& s : layout) {
        if (s.name == name) return s;
    }
    throw Error("no parameter slot named " + name);
}

std::span<const double> ParamStore::view(const std::string& name) const {
    const auto& s = slot(name);
    return {values.data() + s.offset, s.size()};
}

std::span<double> ParamStore::view(const std::string& name) {
    const auto& s = slot(name);
    return {values.data() + s.offset, s.size()};
}

std::size_t ParamStore::trunk_size() const {
    std::size_t n = 0;
    for (const auto& s : layout) {
        if (s.name.rfind("trunk.", 0) == 0) n = std::max(n, s.offset + s.size());
    }
    return n;
}

std::vector<LayerSlot> build_layout(const NetworkConfig& config) {
    config.validate();
    std::vector<LayerSlot> layout;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
        layout.push_back({std::move(name), offset, rows, cols});
        offset += rows * cols;
    };
    std::size_t in = config.input_dim;
    for (std::size_t l = 0; l < config.hidden.size(); ++l) {
        add(trunk_name(l, "weight"), config.hidden[l], in);
        add(trunk_name(l, "bias"), config.hidden[l], 1);
        in = config.hidden[l];
    }
    for (std::size_t h = 0; h < config.heads.size(); ++h) {
        add(head_name(h, "weight"), config.heads[h], in);
        add(head_name(h, "bias"), config.heads[h], 1);
    }
    return layout;
}

ParamStore init_params(const NetworkConfig& config, std::uint64_t seed) {
    ParamStore p;
    p.layout = build_layout(config);
    p.seed = seed;
    const auto& last = p.layout.back();
    p.values.assign(last.offset + last.size(), 0.0);
    std::size_t in = config.input_dim;
    for (std::size_t l = 0; l < config.hidden.size(); ++l) {
        Rng rng = Rng::stream(seed, kTrunkStream + l);
        init_uniform(p.view(trunk_name(l, "weight")), in, rng);
        in = config.hidden[l];
    }
    for (std::size_t h = 0; h < config.heads.size(); ++h) {
        Rng rng = Rng::stream(seed, kHeadStream + h);
        init_uniform(p.view(head_name(h, "weight")), in, rng);
    }
    p.norm_mean.assign(config.feature_dim(), 0.0);
    p.norm_var.assign(config.feature_dim(), 1.0);
    return p;
}

ParamStore init_from_source(const NetworkConfig& config, const NetworkConfig& source_config,
                            const ParamStore& source, std::uint64_t seed) {
    if (config.input_dim != source_config.input_dim || config.hidden != source_config.hidden) {
        throw Error("source trunk dimensions do not match target config");
    }
    if (source.layout != build_layout(source_config)) throw Error("source checkpoint layout does not match its config");
    ParamStore p = init_params(config, seed);
    const std::size_t n = source.trunk_size();
    std::copy_n(source.values.begin(), n, p.values.begin());
    p.norm_mean = source.norm_mean;
    p.norm_var = source.norm_var;
    return p;
}

std::uint64_t digest(std::span<const double> values) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

namespace {

// Trunk affine/relu stack; fills cache.pre / cache.act and returns the trunk output.
Matrix run_trunk(const NetworkConfig& config, const ParamStore& params, const Matrix& inputs,
                 ForwardCache* cache) {
    Matrix a = inputs;
    for (std::size_t l = 0; l < config.hidden.size(); ++l) {
        Matrix z = affine(a, params.view(trunk_name(l, "weight")), params.view(trunk_name(l, "bias")),
                          config.hidden[l]);
        a = z;
        for (double& v : a.data) v = v > 0.0 ? v : 0.0;
        if (cache) {
            cache->pre.push_back(std::move(z));
            cache->act.push_back(a);
        }
    }
    return a;
}

}  // namespace

ForwardCache forward(const NetworkConfig& config, const ParamStore& params, const Matrix& inputs,
                     Mode mode, Rng* rng) {
    config.validate();
    if (inputs.cols != config.input_dim) throw Error("input width does not match input_dim");
    if (inputs.rows == 0) throw Error("empty batch");
    if (params.layout.empty() || params.layout.back().offset + params.layout.back().size() != params.values.size()) {
        throw Error("parameter store does not match its layout");
    }

    ForwardCache cache;
    cache.input = inputs;
    cache.param_digest = digest(params.values);
    cache.trunk_digest = digest(std::span<const double>(params.values.data(), params.trunk_size()));

    Matrix h = run_trunk(config, params, inputs, &cache);
    const std::size_t b = h.rows, f = h.cols;

    if (config.norm.enabled) {
        cache.norm_mean.assign(f, 0.0);
        cache.norm_inv_std.assign(f, 0.0);
        cache.batch_stats = mode == Mode::train && !config.norm.frozen;
        std::vector<double> var(f, 0.0);
        if (cache.batch_stats) {
            for (std::size_t r = 0; r < b; ++r) {
                for (std::size_t j = 0; j < f; ++j) cache.norm_mean[j] += h(r, j);
            }
            for (double& m : cache.norm_mean) m /= static_cast<double>(b);
            for (std::size_t r = 0; r < b; ++r) {
                for (std::size_t j = 0; j < f; ++j) {
                    const double d = h(r, j) - cache.norm_mean[j];
                    var[j] += d * d;
                }
            }
            for (double& v : var) v /= static_cast<double>(b);
        } else {
            if (params.norm_mean.size() != f || params.norm_var.size() != f) {
                throw Error("stored normalization statistics have the wrong width");
            }
            cache.norm_mean = params.norm_mean;
            var = params.norm_var;
        }
        for (std::size_t j = 0; j < f; ++j) cache.norm_inv_std[j] = 1.0 / std::sqrt(var[j] + config.norm.epsilon);
        cache.normalized = Matrix(b, f);
        for (std::size_t r = 0; r < b; ++r) {
            for (std::size_t j = 0; j < f; ++j) {
                cache.normalized(r, j) = (h(r, j) - cache.norm_mean[j]) * cache.norm_inv_std[j];
            }
        }
    } else {
        cache.normalized = std::move(h);
    }

    cache.head_input = cache.normalized;
    if (mode == Mode::train && config.dropout_rate > 0.0) {
        if (!rng) throw Error("dropout in train mode needs an rng");
        const double keep = 1.0 - config.dropout_rate;
        const double scale = 1.0 / keep;
        cache.dropout_mask = Matrix(b, f);
        for (std::size_t i = 0; i < cache.dropout_mask.data.size(); ++i) {
            const double m = rng->uniform() < keep ? scale : 0.0;
            cache.dropout_mask.data[i] = m;
            cache.head_input.data[i] *= m;
        }
    }

    for (std::size_t hd = 0; hd < config.heads.size(); ++hd) {
        Matrix z = affine(cache.head_input, params.view(head_name(hd, "weight")), params.view(head_name(hd, "bias")),
                          config.heads[hd]);
        Matrix lp, p;
        log_softmax_rows(z, lp, p);
        cache.logits.push_back(std::move(z));
        cache.log_probs.push_back(std::move(lp));
        cache.probs.push_back(std::move(p));
    }
    return cache;
}

Matrix trunk_features(const NetworkConfig& config, const ParamStore& params, const Matrix& inputs) {
    if (inputs.cols != config.input_dim) throw Error("input width does not match input_dim");
    return run_trunk(config, params, inputs, nullptr);
}

void estimate_norm_statistics(const NetworkConfig& config, ParamStore& params, const Matrix& inputs) {
    const Matrix h = trunk_features(config, params, inputs);
    if (h.rows == 0) throw Error("no samples for normalization statistics");
    std::vector<double> mean(h.cols, 0.0), var(h.cols, 0.0);
    for (std::size_t r = 0; r < h.rows; ++r) {
        for (std::size_t j = 0; j < h.cols; ++j) mean[j] += h(r, j);
    }
    for (double& m : mean) m /= static_cast<double>(h.rows);
    for (std::size_t r = 0; r < h.rows; ++r) {
        for (std::size_t j = 0; j < h.cols; ++j) {
            const double d = h(r, j) - mean[j];
            var[j] += d * d;
        }
    }
    for (double& v : var) v /= static_cast<double>(h.rows);
    params.norm_mean = std::move(mean);
    params.norm_var = std::move(var);
}

LossResult cross_entropy_loss(const ForwardCache& cache, std::span<const std::size_t> labels, std::size_t head) {
    check_head(cache, head);
    const Matrix& p = cache.probs[head];
    const Matrix& lp = cache.log_probs[head];
    check_labels(labels, p.rows, p.cols);
    const double inv_b = 1.0 / static_cast<double>(p.rows);

    LossResult out;
    out.grads = empty_grads(cache);
    Matrix g = p;
    double total = 0.0;
    for (std::size_t r = 0; r < p.rows; ++r) {
        total -= lp(r, labels[r]);
        g(r, labels[r]) -= 1.0;
    }
    for (double& v : g.data) v *= inv_b;
    out.loss = total * inv_b;
    out.grads[head] = std::move(g);
    return out;
}

LossResult soft_target_loss(const ForwardCache& cache, const Matrix& targets, SoftDirection direction,
                            std::size_t head) {
    check_head(cache, head);
    const Matrix& q = cache.probs[head];
    const Matrix& lq = cache.log_probs[head];
    if (targets.rows != q.rows || targets.cols != q.cols) throw Error("soft targets do not match imitation head");
    for (std::size_t r = 0; r < targets.rows; ++r) {
        if (!on_simplex(targets.row(r), 1e-6)) throw Error("soft target row " + std::to_string(r) + " off simplex");
    }
    const double inv_b = 1.0 / static_cast<double>(q.rows);

    LossResult out;
    out.grads = empty_grads(cache);
    Matrix g(q.rows, q.cols);
    double total = 0.0;
    if (direction == SoftDirection::target_as_distribution) {
        for (std::size_t r = 0; r < q.rows; ++r) {
            for (std::size_t k = 0; k < q.cols; ++k) {
                const double f = targets(r, k);
                if (f > 0.0) total -= f * lq(r, k);
                g(r, k) = (q(r, k) - f) * inv_b;
            }
        }
    } else {
        // L = -sum_k q_k log f_k; dL/dz_j = q_j (c_j - sum_k q_k c_k) with c_k = -log f_k.
        for (std::size_t r = 0; r < q.rows; ++r) {
            double mean_c = 0.0;
            std::vector<double> c(q.cols);
            for (std::size_t k = 0; k < q.cols; ++k) {
                c[k] = -std::log(std::max(targets(r, k), kSoftTargetFloor));
                total += q(r, k) * c[k];
                mean_c += q(r, k) * c[k];
            }
            for (std::size_t k = 0; k < q.cols; ++k) g(r, k) = q(r, k) * (c[k] - mean_c) * inv_b;
        }
    }
    out.loss = total * inv_b;
    out.grads[head] = std::move(g);
    return out;
}

LossResult knowledge_loss(const ForwardCache& cache, std::span<const std::size_t> labels, const Matrix& targets,
                          double alpha, SoftDirection direction) {
    if (!(alpha >= 0.0)) throw Error("alpha must be non-negative");
    LossResult out = cross_entropy_loss(cache, labels, 0);
    const LossResult soft = soft_target_loss(cache, targets, direction, 1);
    out.loss = out.loss + alpha * soft.loss;
    if (alpha != 0.0) {
        Matrix g = *soft.grads[1];
        for (double& v : g.data) v *= alpha;
        out.grads[1] = std::move(g);
    }
    return out;
}

DataLossResult data_loss(const ForwardCache& event_cache, std::span<const std::size_t> event_labels,
                         const ForwardCache& aux_cache, std::span<const std::size_t> aux_labels, double beta) {
    if (!(beta >= 0.0)) throw Error("beta must be non-negative");
    if (event_cache.trunk_digest != aux_cache.trunk_digest) throw Error("heads not sharing trunk");
    DataLossResult out;
    LossResult ev = cross_entropy_loss(event_cache, event_labels, 0);
    LossResult aux = cross_entropy_loss(aux_cache, aux_labels, 1);
    out.loss = ev.loss + beta * aux.loss;
    out.event_grads = std::move(ev.grads);
    out.aux_grads = empty_grads(aux_cache);
    if (beta != 0.0) {
        Matrix g = *aux.grads[1];
        for (double& v : g.data) v *= beta;
        out.aux_grads[1] = std::move(g);
    }
    return out;
}

std::vector<double> backward(const NetworkConfig& config, const ParamStore& params, const ForwardCache& cache,
                             const HeadGradients& head_grads) {
    if (cache.param_digest != digest(params.values)) {
        throw Error("stale forward cache: parameters changed since forward()");
    }
    if (head_grads.size() > config.heads.size()) throw Error("more head gradients than heads");
    std::vector<double> grad(params.values.size(), 0.0);
    auto grad_view = [&](const std::string& name) {
        const auto& s = params.slot(name);
        return std::span<double>(grad.data() + s.offset, s.size());
    };

    const std::size_t b = cache.batch_size();
    const std::size_t f = cache.head_input.cols;
    Matrix d_in(b, f);
    bool any = false;
    for (std::size_t h = 0; h < head_grads.size(); ++h) {
        if (!head_grads[h]) continue;
        const Matrix& g = *head_grads[h];
        if (g.rows != b || g.cols != config.heads[h]) throw Error("head gradient shape mismatch");
        Matrix dx = affine_backward(g, cache.head_input, params.view(head_name(h, "weight")),
                                    grad_view(head_name(h, "weight")), grad_view(head_name(h, "bias")));
        for (std::size_t i = 0; i < d_in.data.size(); ++i) d_in.data[i] += dx.data[i];
        any = true;
    }
    if (!any || config.hidden.empty()) return grad;

    if (!cache.dropout_mask.empty()) {
        for (std::size_t i = 0; i < d_in.data.size(); ++i) d_in.data[i] *= cache.dropout_mask.data[i];
    }

    Matrix d_trunk(b, f);
    if (config.norm.enabled) {
        if (cache.batch_stats) {
            // Standardization with batch statistics: both mean and variance depend on the input.
            std::vector<double> sum_d(f, 0.0), sum_dx(f, 0.0);
            for (std::size_t r = 0; r < b; ++r) {
                for (std::size_t j = 0; j < f; ++j) {
                    sum_d[j] += d_in(r, j);
                    sum_dx[j] += d_in(r, j) * cache.normalized(r, j);
                }
            }
            const double bb = static_cast<double>(b);
            for (std::size_t r = 0; r < b; ++r) {
                for (std::size_t j = 0; j < f; ++j) {
                    d_trunk(r, j) = cache.norm_inv_std[j] / bb *
                                    (bb * d_in(r, j) - sum_d[j] - cache.normalized(r, j) * sum_dx[j]);
                }
            }
        } else {
            for (std::size_t r = 0; r < b; ++r) {
                for (std::size_t j = 0; j < f; ++j) d_trunk(r, j) = d_in(r, j) * cache.norm_inv_std[j];
            }
        }
    } else {
        d_trunk = std::move(d_in);
    }

    Matrix d_act = std::move(d_trunk);
    for (std::size_t li = config.hidden.size(); li-- > 0;) {
        Matrix dz = std::move(d_act);
        const Matrix& z = cache.pre[li];
        for (std::size_t i = 0; i < dz.data.size(); ++i) {
            if (!(z.data[i] > 0.0)) dz.data[i] = 0.0;
        }
        const Matrix& a_prev = li == 0 ? cache.input : cache.act[li - 1];
        d_act = affine_backward(dz, a_prev, params.view(trunk_name(li, "weight")), grad_view(trunk_name(li, "weight")),
                                grad_view(trunk_name(li, "bias")));
    }
    return grad;
}

std::vector<double> data_loss_gradient(const NetworkConfig& config, const ParamStore& params,
                                       const DataLossResult& result, const ForwardCache& event_cache,
                                       const ForwardCache& aux_cache) {
    std::vector<double> g = backward(config, params, event_cache, result.event_grads);
    const std::vector<double> ga = backward(config, params, aux_cache, result.aux_grads);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ga[i];
    return g;
}

LossEvaluation evaluate_loss(const NetworkConfig& config, const ParamStore& params, const LossSpec& spec,
                             bool with_gradient) {
    Rng rng = Rng::stream(spec.dropout_seed, 1);
    LossEvaluation out;
    const ForwardCache cache = forward(config, params, spec.inputs, spec.mode, &rng);
    switch (spec.kind) {
        case LossKind::cross_entropy: {
            const LossResult r = cross_entropy_loss(cache, spec.labels, 0);
            out.loss = r.loss;
            if (with_gradient) out.gradient = backward(config, params, cache, r.grads);
            break;
        }
        case LossKind::knowledge: {
            const LossResult r = knowledge_loss(cache, spec.labels, spec.targets, spec.alpha, spec.direction);
            out.loss = r.loss;
            if (with_gradient) out.gradient = backward(config, params, cache, r.grads);
            break;
        }
        case LossKind::data: {
            const ForwardCache aux = forward(config, params, spec.aux_inputs, spec.mode, &rng);
            const DataLossResult r = data_loss(cache, spec.labels, aux, spec.aux_labels, spec.beta);
            out.loss = r.loss;
            if (with_gradient) out.gradient = data_loss_gradient(config, params, r, cache, aux);
            break;
        }
    }
    return out;
}

double grad_check(const NetworkConfig& config, const ParamStore& params, const LossSpec& spec, double epsilon,
                  std::size_t max_checked, std::uint64_t subset_seed) {
    const LossEvaluation analytic = evaluate_loss(config, params, spec, true);
    std::vector<std::size_t> idx(params.values.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > max_checked) {
        Rng rng(subset_seed);
        rng.shuffle(idx);
        idx.resize(max_checked);
        std::sort(idx.begin(), idx.end());
    }
    ParamStore probe = params;
    double worst = 0.0;
    for (std::size_t i : idx) {
        const double orig = probe.values[i];
        probe.values[i] = orig + epsilon;
        const double lp = evaluate_loss(config, probe, spec, false).loss;
        probe.values[i] = orig - epsilon;
        const double lm = evaluate_loss(config, probe, spec, false).loss;
        probe.values[i] = orig;
        const double numeric = (lp - lm) / (2.0 * epsilon);
        const double ga = analytic.gradient[i];
        const double rel = std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

void sgd_momentum_step(std::span<double> params, std::span<const double> gradient, std::span<double> velocity,
                       double lr, double momentum) {
    if (params.size() != gradient.size() || params.size() != velocity.size()) {
        throw Error("sgd: shape mismatch");
    }
    for (double g : gradient) {
        if (!std::isfinite(g)) throw Error("divergence");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * gradient[i];
        params[i] += velocity[i];
    }
}

}  // namespace os2e
