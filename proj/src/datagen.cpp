#include "os2e/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace os2e {

namespace {

constexpr std::uint64_t kSignatureStream = 1;
constexpr std::uint64_t kMixingStream = 2;
constexpr std::uint64_t kResponseStream = 3;
constexpr std::uint64_t kVectorStream = 4;
constexpr std::uint64_t kAuxStream = 5;
constexpr std::uint64_t kImageStream = 6;

std::vector<std::vector<std::size_t>> plant_signatures(std::size_t events, std::size_t concepts, std::size_t sparsity,
                                                       Rng& rng) {
    std::vector<std::vector<std::size_t>> sigs(events);
    if (events * sparsity <= concepts) {
        // Disjoint signatures from one shuffled permutation.
        std::vector<std::size_t> perm(concepts);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        for (std::size_t e = 0; e < events; ++e) {
            sigs[e].assign(perm.begin() + static_cast<std::ptrdiff_t>(e * sparsity),
                           perm.begin() + static_cast<std::ptrdiff_t>((e + 1) * sparsity));
            std::sort(sigs[e].begin(), sigs[e].end());
        }
        return sigs;
    }
    std::set<std::vector<std::size_t>> seen;
    for (std::size_t e = 0; e < events; ++e) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 10000) throw Error("cannot plant distinct signatures for this configuration");
            std::vector<std::size_t> perm(concepts);
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            std::vector<std::size_t> s(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sparsity));
            std::sort(s.begin(), s.end());
            if (seen.insert(s).second) {
                sigs[e] = std::move(s);
                break;
            }
        }
    }
    return sigs;
}

// Gaussian columns, Gram-Schmidt orthonormalized while rank allows.
Matrix plant_mixing(std::size_t dim, std::size_t concepts, Rng& rng) {
    Matrix a(dim, concepts);
    for (std::size_t c = 0; c < concepts; ++c) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        if (c < dim) {
            for (std::size_t p = 0; p < c; ++p) {
                double dot = 0.0;
                for (std::size_t i = 0; i < dim; ++i) dot += v[i] * a(i, p);
                for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * a(i, p);
            }
        }
        const auto n = l2_normalize(v);
        for (std::size_t i = 0; i < dim; ++i) a(i, c) = n[i];
    }
    return a;
}

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t classes, Rng& rng) {
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % classes;
    rng.shuffle(labels);
    return labels;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double s = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(logits[k] - m);
        s += p[k];
    }
    for (double& v : p) v /= s;
    return p;
}

std::vector<double> response_row(const std::vector<std::size_t>& signature, std::size_t concepts,
                                 const GeneratorConfig& config, Rng& rng) {
    std::vector<double> logits(concepts, 0.0);
    for (std::size_t c : signature) {
        if (rng.bernoulli(config.presence)) logits[c] += config.concentration;
    }
    for (double& l : logits) l += config.noise_sigma * rng.normal();
    return softmax(logits);
}

// Switches on one pattern slot of concept c.
void activate(std::vector<double>& z, std::size_t c, const GeneratorConfig& config, Rng& rng) {
    const std::size_t p = config.patterns_per_concept;
    z[c * p + (p > 1 ? rng.uniform_index(p) : 0)] = 1.0;
}

// x = A z + sigma * noise
std::vector<double> mix_features(const Matrix& mixing, const std::vector<double>& z, double sigma, Rng& rng) {
    std::vector<double> x(mixing.rows, 0.0);
    for (std::size_t i = 0; i < mixing.rows; ++i) {
        for (std::size_t c = 0; c < mixing.cols; ++c) x[i] += mixing(i, c) * z[c];
    }
    for (double& v : x) v += sigma * rng.normal();
    return x;
}

Dataset make_vector_split(const GeneratorConfig& config, const PlantedTruth& truth, std::size_t n, Split split,
                          Rng& rng) {
    Dataset d;
    d.split = split;
    d.name = to_string(split);
    d.num_classes = config.num_events;
    d.labels = balanced_labels(n, config.num_events, rng);
    d.features = Matrix(n, config.feature_dim);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> z(truth.mixing.cols, 0.0);
        const auto& sig = truth.object_signatures[d.labels[i]];
        for (std::size_t c = 0; c < config.object_concepts; ++c) {
            const bool in_sig = std::binary_search(sig.begin(), sig.end(), c);
            if (rng.bernoulli(in_sig ? config.presence : config.clutter)) activate(z, c, config, rng);
        }
        const auto x = mix_features(truth.mixing, z, config.noise_sigma, rng);
        std::copy(x.begin(), x.end(), d.features.row(i).begin());
    }
    return d;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (num_events == 0 || object_concepts == 0 || scene_concepts == 0 || sparsity == 0) {
        throw Error("generator counts must be >= 1");
    }
    if (sparsity > std::min(object_concepts, scene_concepts)) throw Error("sparsity exceeds concept count");
    if (patterns_per_concept == 0) throw Error("patterns_per_concept must be >= 1");
    if (feature_dim == 0 || image_height == 0 || image_width == 0) throw Error("generator dims must be >= 1");
    if (train_count == 0 || test_count == 0 || aux_count == 0) throw Error("sample counts must be >= 1");
    if (!(concentration >= 0.0) || !(noise_sigma >= 0.0)) throw Error("concentration and noise must be >= 0");
    if (!(presence >= 0.0 && presence <= 1.0) || !(clutter >= 0.0 && clutter <= 1.0)) {
        throw Error("presence and clutter must be probabilities");
    }
    if (blob_side == 0 || blob_side > std::min(image_height, image_width)) throw Error("blob does not fit the image");
}

GeneratorConfig generator_preset(const std::string& name) {
    GeneratorConfig c;
    if (name == "responses") {
        c.concentration = 3.0;
        c.noise_sigma = 1.0;
        c.presence = 0.6;
        c.train_count = 200;
        c.test_count = 400;
    } else if (name == "recovery") {
        c.concentration = 8.0;
        c.noise_sigma = 1.0;
        c.train_count = 200;
        c.test_count = 200;
    } else if (name == "vectors") {
        c.object_concepts = 8;
        c.patterns_per_concept = 4;
        c.noise_sigma = 0.3;
        c.train_count = 64;
        c.test_count = 400;
        c.aux_count = 512;
    } else if (name == "images") {
        c.image_height = 48;
        c.image_width = 64;
        c.blob_side = 12;
        c.image_noise = 0.02;
        c.train_count = 200;
        c.test_count = 200;
    } else {
        throw Error("unknown generator preset: " + name);
    }
    return c;
}

std::vector<std::size_t> PlantedTruth::object_signature_set() const {
    std::set<std::size_t> s;
    for (const auto& sig : object_signatures) s.insert(sig.begin(), sig.end());
    return {s.begin(), s.end()};
}

PlantedTruth plant_truth(const GeneratorConfig& config) {
    config.validate();
    PlantedTruth t;
    Rng sig_rng = Rng::stream(config.seed, kSignatureStream);
    t.object_signatures = plant_signatures(config.num_events, config.object_concepts, config.sparsity, sig_rng);
    t.scene_signatures = plant_signatures(config.num_events, config.scene_concepts, config.sparsity, sig_rng);

    Rng mix_rng = Rng::stream(config.seed, kMixingStream);
    t.mixing = plant_mixing(config.feature_dim, config.object_concepts * config.patterns_per_concept, mix_rng);

    t.teacher.config.input_dim = config.feature_dim;
    t.teacher.config.dropout_rate = 0.0;
    t.teacher.config.heads = {config.object_concepts};
    t.teacher.params = init_params(t.teacher.config, config.seed);
    auto w = t.teacher.params.view("head.0.weight");
    for (std::size_t c = 0; c < config.object_concepts; ++c) {
        for (std::size_t i = 0; i < config.feature_dim; ++i) {
            double sum = 0.0;
            for (std::size_t p = 0; p < config.patterns_per_concept; ++p) {
                sum += t.mixing(i, c * config.patterns_per_concept + p);
            }
            w[c * config.feature_dim + i] = config.teacher_sharpness * sum;
        }
    }

    for (std::size_t e = 0; e < config.num_events; ++e) {
        t.blob_levels.push_back(0.55 + 0.4 * static_cast<double>(e + 1) / static_cast<double>(config.num_events));
    }
    return t;
}

ResponseData gen_response_data(const GeneratorConfig& config) {
    ResponseData out;
    out.truth = plant_truth(config);
    Rng rng = Rng::stream(config.seed, kResponseStream);
    const std::size_t n = config.train_count + config.test_count;
    out.labels.num_events = config.num_events;
    out.labels.labels = balanced_labels(n, config.num_events, rng);

    out.objects.kind = ConceptKind::object;
    out.scenes.kind = ConceptKind::scene;
    out.objects.values = Matrix(n, config.object_concepts);
    out.scenes.values = Matrix(n, config.scene_concepts);
    for (std::size_t c = 0; c < config.object_concepts; ++c) out.objects.class_ids.push_back("object_" + std::to_string(c));
    for (std::size_t c = 0; c < config.scene_concepts; ++c) out.scenes.class_ids.push_back("scene_" + std::to_string(c));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t e = out.labels.labels[i];
        const auto o = response_row(out.truth.object_signatures[e], config.object_concepts, config, rng);
        const auto s = response_row(out.truth.scene_signatures[e], config.scene_concepts, config, rng);
        std::copy(o.begin(), o.end(), out.objects.values.row(i).begin());
        std::copy(s.begin(), s.end(), out.scenes.values.row(i).begin());
        out.objects.image_ids.push_back("img_" + std::to_string(i));
        out.scenes.image_ids.push_back("img_" + std::to_string(i));
    }
    return out;
}

Matrix teacher_soft_targets(const PlantedTruth& truth, const Matrix& features) {
    return forward(truth.teacher.config, truth.teacher.params, features, Mode::eval).probs[0];
}

VectorBenchmark gen_vector_dataset(const GeneratorConfig& config, const PlantedTruth& truth) {
    config.validate();
    VectorBenchmark b;
    Rng rng = Rng::stream(config.seed, kVectorStream);
    b.train = make_vector_split(config, truth, config.train_count, Split::train, rng);
    b.test = make_vector_split(config, truth, config.test_count, Split::test, rng);
    b.soft_targets = teacher_soft_targets(truth, b.train.features);

    Rng aux_rng = Rng::stream(config.seed, kAuxStream);
    b.aux.name = "aux";
    b.aux.split = Split::train;
    b.aux.num_classes = config.object_concepts;
    b.aux.labels = balanced_labels(config.aux_count, config.object_concepts, aux_rng);
    b.aux.features = Matrix(config.aux_count, config.feature_dim);
    for (std::size_t i = 0; i < config.aux_count; ++i) {
        std::vector<double> z(truth.mixing.cols, 0.0);
        for (std::size_t c = 0; c < config.object_concepts; ++c) {
            if (c == b.aux.labels[i] || aux_rng.bernoulli(config.clutter)) activate(z, c, config, aux_rng);
        }
        const auto x = mix_features(truth.mixing, z, config.noise_sigma, aux_rng);
        std::copy(x.begin(), x.end(), b.aux.features.row(i).begin());
    }
    return b;
}

std::vector<BlobImage> gen_image_dataset(const GeneratorConfig& config, const PlantedTruth& truth, std::size_t count) {
    config.validate();
    Rng rng = Rng::stream(config.seed, kImageStream);
    const auto labels = balanced_labels(count, config.num_events, rng);
    std::vector<BlobImage> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        BlobImage b;
        b.label = labels[i];
        b.image = ImageBuffer(config.image_height, config.image_width, 1);
        b.top = rng.uniform_index(config.image_height - config.blob_side + 1);
        b.left = rng.uniform_index(config.image_width - config.blob_side + 1);
        const double level = truth.blob_levels[b.label];
        for (std::size_t r = 0; r < config.image_height; ++r) {
            for (std::size_t c = 0; c < config.image_width; ++c) {
                const bool in_blob = r >= b.top && r < b.top + config.blob_side && c >= b.left &&
                                     c < b.left + config.blob_side;
                const double base = in_blob ? level : 0.5;
                b.image.at(r, c) = std::clamp(base + config.image_noise * rng.normal(), 0.0, 1.0);
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

Scorer blob_intensity_scorer(std::vector<double> levels, double mean_pixel, std::size_t window) {
    if (levels.empty()) throw Error("blob scorer needs class levels");
    if (window == 0) throw Error("window must be >= 1");
    return [levels = std::move(levels), mean_pixel, window](const ImageBuffer& crop) {
        const std::size_t h = crop.height, w = crop.width, ch = crop.channels;
        const std::size_t win = std::min({window, h, w});
        // Integral image of the channel-averaged intensity.
        std::vector<double> integ((h + 1) * (w + 1), 0.0);
        for (std::size_t r = 0; r < h; ++r) {
            double row_sum = 0.0;
            for (std::size_t c = 0; c < w; ++c) {
                double v = 0.0;
                for (std::size_t k = 0; k < ch; ++k) v += crop.at(r, c, k);
                row_sum += v / static_cast<double>(ch) + mean_pixel;
                integ[(r + 1) * (w + 1) + c + 1] = integ[r * (w + 1) + c + 1] + row_sum;
            }
        }
        double peak = -std::numeric_limits<double>::infinity();
        const double area = static_cast<double>(win * win);
        for (std::size_t r = 0; r + win <= h; ++r) {
            for (std::size_t c = 0; c + win <= w; ++c) {
                const double s = integ[(r + win) * (w + 1) + c + win] - integ[r * (w + 1) + c + win] -
                                 integ[(r + win) * (w + 1) + c] + integ[r * (w + 1) + c];
                peak = std::max(peak, s / area);
            }
        }
        constexpr double kWidth = 0.03;
        const std::size_t m = levels.size();
        // log-likelihoods of each class level and of plain background
        std::vector<double> ll(m + 1);
        for (std::size_t k = 0; k < m; ++k) ll[k] = -0.5 * std::pow((peak - levels[k]) / kWidth, 2);
        ll[m] = -0.5 * std::pow((peak - 0.5) / kWidth, 2);
        const auto p = softmax(ll);
        std::vector<double> out(m);
        for (std::size_t k = 0; k < m; ++k) out[k] = p[k] + p[m] / static_cast<double>(m);
        return out;
    };
}

double recovery_rate(const PlantedTruth& truth, const std::vector<std::size_t>& selected) {
    const auto planted = truth.object_signature_set();
    if (planted.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t c : planted) {
        if (std::find(selected.begin(), selected.end(), c) != selected.end()) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(planted.size());
}

}  // namespace os2e
