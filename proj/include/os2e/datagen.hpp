#pragma once
// Planted-concept synthetic data.
//
// Every event owns a small signature of object concepts and of scene concepts.
// Response rows peak on the signature; vector features are noisy mixtures of
// concept directions; images carry a class-coded intensity blob.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "os2e/concept_stats.hpp"
#include "os2e/infer_pipeline.hpp"
#include "os2e/neural_core.hpp"
#include "os2e/transfer_train.hpp"

namespace os2e {

struct GeneratorConfig {
    std::size_t num_events = 4;
    std::size_t object_concepts = 20;
    std::size_t scene_concepts = 10;
    std::size_t sparsity = 2;       // signature size per event
    double concentration = 4.0;     // logit boost of signature concepts
    double noise_sigma = 1.0;       // logit noise (responses) / feature noise (vectors)
    double presence = 1.0;          // probability a signature concept is active in a sample
    double clutter = 0.0;           // probability a non-signature concept is active
    double teacher_sharpness = 4.0;
    std::size_t patterns_per_concept = 1;  // a present concept shows one of these feature patterns
    std::size_t feature_dim = 32;
    std::size_t image_height = 48;
    std::size_t image_width = 64;
    std::size_t blob_side = 12;
    double image_noise = 0.02;
    std::size_t train_count = 64;
    std::size_t test_count = 400;
    std::size_t aux_count = 512;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Named presets: "responses", "recovery" (high concentration), "vectors", "images".
GeneratorConfig generator_preset(const std::string& name);

struct PlantedTruth {
    std::vector<std::vector<std::size_t>> object_signatures;  // per event, ascending
    std::vector<std::vector<std::size_t>> scene_signatures;
    Matrix mixing;          // feature_dim x (object_concepts * patterns), column c * P + p
                            // is pattern p of concept c; orthonormal while rank allows
    Checkpoint teacher;     // frozen concept scorer over object concepts
    std::vector<double> blob_levels;  // per event intensity

    /// Union of all object signature concepts.
    std::vector<std::size_t> object_signature_set() const;
};

PlantedTruth plant_truth(const GeneratorConfig& config);

struct ResponseData {
    ResponseMatrix objects;
    ResponseMatrix scenes;
    EventLabels labels;
    PlantedTruth truth;
};

/// train_count + test_count images with balanced, shuffled labels.
ResponseData gen_response_data(const GeneratorConfig& config);

struct VectorBenchmark {
    Dataset train;
    Dataset test;
    Dataset aux;             // single-concept samples labelled by concept
    Matrix soft_targets;     // teacher outputs on train features
};

VectorBenchmark gen_vector_dataset(const GeneratorConfig& config, const PlantedTruth& truth);

/// Teacher softmax over object concepts for each feature row.
Matrix teacher_soft_targets(const PlantedTruth& truth, const Matrix& features);

struct BlobImage {
    ImageBuffer image;
    std::size_t label = 0;
    std::size_t top = 0;
    std::size_t left = 0;
};

std::vector<BlobImage> gen_image_dataset(const GeneratorConfig& config, const PlantedTruth& truth,
                                         std::size_t count);

/// Toy classifier: peak mean intensity over window x window patches, matched to the
/// class blob levels; near-uniform output when the crop holds only background.
Scorer blob_intensity_scorer(std::vector<double> levels, double mean_pixel, std::size_t window = 3);

/// Fraction of planted object signature concepts present in `selected`.
double recovery_rate(const PlantedTruth& truth, const std::vector<std::size_t>& selected);

}  // namespace os2e
