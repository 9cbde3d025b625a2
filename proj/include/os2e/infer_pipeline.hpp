#pragma once
// Multi-ratio / multi-scale crop-and-fuse recognition.
//
// Every image is resized under each ratio mode and scale, a g x g grid of
// crop_side x crop_side regions is cut from each resized image, every region is
// scored by an object stream and a scene stream, the two streams are mixed per
// region and the mixed vectors are averaged over regions.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "os2e/common.hpp"
#include "os2e/neural_core.hpp"

namespace os2e {

struct ImageBuffer {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<double> pixels;  // row-major, channel-interleaved

    ImageBuffer() = default;
    ImageBuffer(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

    double& at(std::size_t r, std::size_t c, std::size_t ch = 0) { return pixels[(r * width + c) * channels + ch]; }
    double at(std::size_t r, std::size_t c, std::size_t ch = 0) const { return pixels[(r * width + c) * channels + ch]; }

    void validate() const;
    bool operator==(const ImageBuffer&) const = default;
};

enum class RatioMode { aspect_preserving, square };

std::string to_string(RatioMode m);
RatioMode ratio_mode_from_string(const std::string& s);

struct CropConfig {
    std::size_t base_side = 256;
    std::size_t crop_side = 224;
    std::vector<double> scale_factors{1.0, 1.5, 2.0};
    std::vector<RatioMode> ratio_modes{RatioMode::aspect_preserving, RatioMode::square};
    std::size_t grid = 3;
    std::vector<double> mean_pixel{0.5};  // one value, or one per channel

    void validate() const;
    std::size_t region_count() const { return ratio_modes.size() * scale_factors.size() * grid * grid; }
};

struct RegionSpec {
    RatioMode ratio_mode = RatioMode::aspect_preserving;
    double scale_factor = 1.0;
    std::size_t grid_row = 0;
    std::size_t grid_col = 0;
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t resized_height = 0;
    std::size_t resized_width = 0;

    bool operator==(const RegionSpec&) const = default;
};

struct RegionScore {
    RegionSpec spec;
    std::vector<double> object_scores;
    std::vector<double> scene_scores;
    std::vector<double> fused;
};

struct FusionWeights {
    double object = 0.5;
    double scene = 0.5;
};

/// Maps a (mean-subtracted) crop to a distribution over M classes.
using Scorer = std::function<std::vector<double>(const ImageBuffer&)>;

/// Half-pixel-centre bilinear resampling: src = (i + 0.5) * in / out - 0.5, clamped.
ImageBuffer resize_bilinear(const ImageBuffer& image, std::size_t target_height, std::size_t target_width);

/// (height, width) of the image after resizing under `mode` at `scale`.
std::pair<std::size_t, std::size_t> resized_dims(std::size_t height, std::size_t width, RatioMode mode,
                                                 double scale, std::size_t base_side);

/// floor(i * (length - crop) / (g - 1)) for i in [0, g); {0} when g == 1.
std::vector<std::size_t> grid_offsets(std::size_t length, std::size_t crop, std::size_t grid);

/// Ordered by ratio mode, then scale, then grid row, then grid column.
std::vector<RegionSpec> generate_regions(std::size_t height, std::size_t width, const CropConfig& config);

ImageBuffer crop_extract(const ImageBuffer& image, const RegionSpec& spec);

ImageBuffer subtract_mean(const ImageBuffer& image, std::span<const double> mean_pixel);

std::vector<double> fuse_streams(std::span<const double> object_scores, std::span<const double> scene_scores,
                                 double alpha_o, double alpha_s);
std::vector<double> fuse_streams(const RegionScore& region, double alpha_o, double alpha_s);

/// Mean of the regions' fused vectors.
std::vector<double> fuse_regions(std::span<const RegionScore> regions);

/// `threads` == 0 uses worker_threads(). Output order matches generate_regions.
std::vector<RegionScore> score_regions(const ImageBuffer& image, const CropConfig& config, const Scorer& object_scorer,
                                       const Scorer& scene_scorer, FusionWeights weights = {},
                                       std::size_t threads = 0);

/// Full pipeline: score_regions followed by fuse_regions.
std::vector<double> recognize(const ImageBuffer& image, const CropConfig& config, const Scorer& object_scorer,
                              const Scorer& scene_scorer, FusionWeights weights = {}, std::size_t threads = 0);

/// Resize to base_side x base_side and take the centred crop_side x crop_side region.
ImageBuffer center_crop(const ImageBuffer& image, const CropConfig& config);

// -----------------------------
// Training-time augmentation
// -----------------------------
struct TrainCropConfig {
    std::vector<std::size_t> sizes;  // candidate crop widths/heights
    double flip_probability = 0.5;
};

/// {256, 224, 192, 160, 128} scaled by base_side / 256.
TrainCropConfig default_train_crops(std::size_t base_side);

ImageBuffer flip_horizontal(const ImageBuffer& image);

/// Resize to base_side square, crop a random (w, h) drawn independently from `sizes` at a
/// uniform offset, resize the crop to crop_side square, flip with the configured probability.
ImageBuffer training_crop_sample(const ImageBuffer& image, const CropConfig& config, const TrainCropConfig& aug,
                                 Rng& rng);

/// Row-major pixel vector, the network input layout for image crops.
std::vector<double> flatten(const ImageBuffer& image);

/// Scorer running head 0 of a checkpoint in eval mode on the flattened crop.
Scorer network_scorer(Checkpoint checkpoint);

}  // namespace os2e
