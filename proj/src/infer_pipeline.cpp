#include "os2e/infer_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "os2e/concept_stats.hpp"

namespace os2e {

void ImageBuffer::validate() const {
    if (height == 0 || width == 0) throw Error("image dims must be >= 1");
    if (channels != 1 && channels != 3) throw Error("image must have 1 or 3 channels");
    if (pixels.size() != height * width * channels) throw Error("pixel count does not match image dims");
    for (double p : pixels) {
        if (!std::isfinite(p)) throw Error("non-finite pixel");
    }
}

std::string to_string(RatioMode m) {
    return m == RatioMode::aspect_preserving ? "aspect_preserving" : "square";
}

RatioMode ratio_mode_from_string(const std::string& s) {
    if (s == "aspect_preserving") return RatioMode::aspect_preserving;
    if (s == "square") return RatioMode::square;
    throw Error("unknown ratio mode: " + s);
}

void CropConfig::validate() const {
    if (crop_side == 0 || base_side == 0) throw Error("crop sides must be >= 1");
    if (crop_side > base_side) throw Error("crop_side must not exceed base_side");
    if (scale_factors.empty() || ratio_modes.empty()) throw Error("need at least one scale and ratio mode");
    for (double s : scale_factors) {
        if (!(s >= 1.0)) throw Error("scale factors must be >= 1");
    }
    if (grid == 0) throw Error("grid must be >= 1");
    if (mean_pixel.empty()) throw Error("mean_pixel must not be empty");
}

ImageBuffer resize_bilinear(const ImageBuffer& image, std::size_t target_height, std::size_t target_width) {
    if (target_height == 0 || target_width == 0) throw Error("resize target must be >= 1");
    const std::size_t ch = image.channels;
    ImageBuffer out(target_height, target_width, ch);
    const double sy = static_cast<double>(image.height) / static_cast<double>(target_height);
    const double sx = static_cast<double>(image.width) / static_cast<double>(target_width);
    const double max_y = static_cast<double>(image.height - 1);
    const double max_x = static_cast<double>(image.width - 1);

    std::vector<std::size_t> x0(target_width), x1(target_width);
    std::vector<double> fx(target_width);
    for (std::size_t j = 0; j < target_width; ++j) {
        const double src = std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0, max_x);
        x0[j] = static_cast<std::size_t>(std::floor(src));
        x1[j] = std::min(x0[j] + 1, image.width - 1);
        fx[j] = src - static_cast<double>(x0[j]);
    }
    for (std::size_t i = 0; i < target_height; ++i) {
        const double src_y = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0, max_y);
        const std::size_t y0 = static_cast<std::size_t>(std::floor(src_y));
        const std::size_t y1 = std::min(y0 + 1, image.height - 1);
        const double fy = src_y - static_cast<double>(y0);
        for (std::size_t j = 0; j < target_width; ++j) {
            for (std::size_t c = 0; c < ch; ++c) {
                const double top = image.at(y0, x0[j], c) * (1.0 - fx[j]) + image.at(y0, x1[j], c) * fx[j];
                const double bot = image.at(y1, x0[j], c) * (1.0 - fx[j]) + image.at(y1, x1[j], c) * fx[j];
                out.at(i, j, c) = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    return out;
}

std::pair<std::size_t, std::size_t> resized_dims(std::size_t height, std::size_t width, RatioMode mode, double scale,
                                                 std::size_t base_side) {
    if (height == 0 || width == 0) throw Error("image dims must be >= 1");
    const auto target = static_cast<std::size_t>(std::lround(static_cast<double>(base_side) * scale));
    if (mode == RatioMode::square) return {target, target};
    if (height <= width) return {target, width * target / height};
    return {height * target / width, target};
}

std::vector<std::size_t> grid_offsets(std::size_t length, std::size_t crop, std::size_t grid) {
    if (crop > length) throw Error("image too small after resize");
    if (grid == 0) throw Error("grid must be >= 1");
    if (grid == 1) return {0};
    std::vector<std::size_t> out(grid);
    for (std::size_t i = 0; i < grid; ++i) out[i] = i * (length - crop) / (grid - 1);
    return out;
}

std::vector<RegionSpec> generate_regions(std::size_t height, std::size_t width, const CropConfig& config) {
    config.validate();
    std::vector<RegionSpec> specs;
    specs.reserve(config.region_count());
    for (RatioMode mode : config.ratio_modes) {
        for (double scale : config.scale_factors) {
            const auto [rh, rw] = resized_dims(height, width, mode, scale, config.base_side);
            if (rh < config.crop_side || rw < config.crop_side) throw Error("image too small after resize");
            const auto rows = grid_offsets(rh, config.crop_side, config.grid);
            const auto cols = grid_offsets(rw, config.crop_side, config.grid);
            for (std::size_t r = 0; r < config.grid; ++r) {
                for (std::size_t c = 0; c < config.grid; ++c) {
                    specs.push_back({mode, scale, r, c, rows[r], cols[c], config.crop_side, config.crop_side, rh, rw});
                }
            }
        }
    }
    return specs;
}

ImageBuffer crop_extract(const ImageBuffer& image, const RegionSpec& spec) {
    if (spec.height == 0 || spec.width == 0 || spec.top + spec.height > image.height ||
        spec.left + spec.width > image.width) {
        throw Error("crop rect out of bounds");
    }
    ImageBuffer out(spec.height, spec.width, image.channels);
    const std::size_t row_len = spec.width * image.channels;
    for (std::size_t r = 0; r < spec.height; ++r) {
        const auto src = image.pixels.begin() +
                         static_cast<std::ptrdiff_t>(((spec.top + r) * image.width + spec.left) * image.channels);
        std::copy_n(src, row_len, out.pixels.begin() + static_cast<std::ptrdiff_t>(r * row_len));
    }
    return out;
}

ImageBuffer subtract_mean(const ImageBuffer& image, std::span<const double> mean_pixel) {
    if (mean_pixel.size() != 1 && mean_pixel.size() != image.channels) {
        throw Error("mean_pixel needs one value or one per channel");
    }
    ImageBuffer out = image;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] -= mean_pixel.size() == 1 ? mean_pixel[0] : mean_pixel[i % image.channels];
    }
    return out;
}

std::vector<double> fuse_streams(std::span<const double> object_scores, std::span<const double> scene_scores,
                                 double alpha_o, double alpha_s) {
    if (object_scores.size() != scene_scores.size()) throw Error("stream length mismatch");
    if (!(alpha_o >= 0.0 && alpha_s >= 0.0)) throw Error("fusion weights must be non-negative");
    std::vector<double> out(object_scores.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = alpha_o * object_scores[k] + alpha_s * scene_scores[k];
    return out;
}

std::vector<double> fuse_streams(const RegionScore& region, double alpha_o, double alpha_s) {
    return fuse_streams(region.object_scores, region.scene_scores, alpha_o, alpha_s);
}

std::vector<double> fuse_regions(std::span<const RegionScore> regions) {
    if (regions.empty()) throw Error("no regions to fuse");
    std::vector<double> out(regions.front().fused.size(), 0.0);
    for (const auto& r : regions) {
        if (r.fused.size() != out.size()) throw Error("region score length mismatch");
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += r.fused[k];
    }
    const double inv = 1.0 / static_cast<double>(regions.size());
    for (double& v : out) v *= inv;
    return out;
}

std::vector<RegionScore> score_regions(const ImageBuffer& image, const CropConfig& config, const Scorer& object_scorer,
                                       const Scorer& scene_scorer, FusionWeights weights, std::size_t threads) {
    image.validate();
    const auto specs = generate_regions(image.height, image.width, config);

    // One resized image per (ratio mode, scale); specs come in blocks of grid^2.
    const std::size_t per_block = config.grid * config.grid;
    std::vector<ImageBuffer> resized;
    for (std::size_t b = 0; b < specs.size(); b += per_block) {
        resized.push_back(resize_bilinear(image, specs[b].resized_height, specs[b].resized_width));
    }

    std::vector<RegionScore> out(specs.size());
    auto score_one = [&](std::size_t i) {
        const ImageBuffer crop = subtract_mean(crop_extract(resized[i / per_block], specs[i]), config.mean_pixel);
        RegionScore rs;
        rs.spec = specs[i];
        rs.object_scores = object_scorer(crop);
        rs.scene_scores = scene_scorer(crop);
        if (!on_simplex(rs.object_scores, kIngestSimplexTol) || !on_simplex(rs.scene_scores, kIngestSimplexTol)) {
            throw Error("scorer output off simplex");
        }
        rs.fused = fuse_streams(rs.object_scores, rs.scene_scores, weights.object, weights.scene);
        out[i] = std::move(rs);
    };

    const std::size_t n_threads = std::min(threads == 0 ? worker_threads() : threads, specs.size());
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < specs.size(); ++i) score_one(i);
        return out;
    }
    std::vector<std::exception_ptr> errors(n_threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < specs.size(); i += n_threads) score_one(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::vector<double> recognize(const ImageBuffer& image, const CropConfig& config, const Scorer& object_scorer,
                              const Scorer& scene_scorer, FusionWeights weights, std::size_t threads) {
    const auto regions = score_regions(image, config, object_scorer, scene_scorer, weights, threads);
    return fuse_regions(regions);
}

ImageBuffer center_crop(const ImageBuffer& image, const CropConfig& config) {
    config.validate();
    const ImageBuffer base = resize_bilinear(image, config.base_side, config.base_side);
    const std::size_t off = (config.base_side - config.crop_side) / 2;
    RegionSpec spec;
    spec.top = off;
    spec.left = off;
    spec.height = config.crop_side;
    spec.width = config.crop_side;
    return crop_extract(base, spec);
}

TrainCropConfig default_train_crops(std::size_t base_side) {
    TrainCropConfig cfg;
    for (std::size_t s : {256, 224, 192, 160, 128}) {
        cfg.sizes.push_back(std::max<std::size_t>(1, s * base_side / 256));
    }
    return cfg;
}

ImageBuffer flip_horizontal(const ImageBuffer& image) {
    ImageBuffer out(image.height, image.width, image.channels);
    for (std::size_t r = 0; r < image.height; ++r) {
        for (std::size_t c = 0; c < image.width; ++c) {
            for (std::size_t ch = 0; ch < image.channels; ++ch) {
                out.at(r, c, ch) = image.at(r, image.width - 1 - c, ch);
            }
        }
    }
    return out;
}

ImageBuffer training_crop_sample(const ImageBuffer& image, const CropConfig& config, const TrainCropConfig& aug,
                                 Rng& rng) {
    config.validate();
    if (aug.sizes.empty()) throw Error("training crop sizes must not be empty");
    for (std::size_t s : aug.sizes) {
        if (s == 0 || s > config.base_side) throw Error("training crop size must be in [1, base_side]");
    }
    const ImageBuffer base = resize_bilinear(image, config.base_side, config.base_side);
    const std::size_t w = aug.sizes[rng.uniform_index(aug.sizes.size())];
    const std::size_t h = aug.sizes[rng.uniform_index(aug.sizes.size())];
    RegionSpec spec;
    spec.height = h;
    spec.width = w;
    spec.top = rng.uniform_index(config.base_side - h + 1);
    spec.left = rng.uniform_index(config.base_side - w + 1);
    ImageBuffer crop = crop_extract(base, spec);
    if (h != config.crop_side || w != config.crop_side) crop = resize_bilinear(crop, config.crop_side, config.crop_side);
    const bool flip = rng.uniform() < aug.flip_probability;
    return flip ? flip_horizontal(crop) : crop;
}

std::vector<double> flatten(const ImageBuffer& image) {
    return image.pixels;
}

Scorer network_scorer(Checkpoint checkpoint) {
    return [ckpt = std::move(checkpoint)](const ImageBuffer& crop) {
        Matrix x(1, crop.pixels.size());
        std::copy(crop.pixels.begin(), crop.pixels.end(), x.data.begin());
        const ForwardCache cache = forward(ckpt.config, ckpt.params, x, Mode::eval);
        const auto row = cache.probs[0].row(0);
        return std::vector<double>(row.begin(), row.end());
    };
}

}  // namespace os2e
