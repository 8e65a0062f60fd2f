/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/augment.hpp
 *
 * Copyright 2026 The pxt authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <functional>
#include <vector>
#include <numbers>
#include <span>
#include <utility>

#include <json.hpp>

#include "pxt/common.hpp"
#include "pxt/hsicore.hpp"
#include "pxt/hsicore_io.hpp"
#include "pxt/rng.hpp"
#include "pxt/xfer.hpp"

namespace pxt::augment {

struct AffineRanges {
    double probability = 1.0;
    double max_shift_frac = 0.1; // of the canvas dimensions, per axis
    double min_scale = 0.9;
    double max_scale = 1.1;
    double max_rotate_deg = 15.0;
    bool flip = true; // horizontal flip with probability 0.5
};

struct AugmentationConfig {
    double perfusion_probability = 0.8; // p
    int target_organ = static_cast<int>(OrganClass::Kidney);
    AffineRanges affine;
    double transplant_probability = 0.3;

    void validate() const {
        if (perfusion_probability < 0.0 || perfusion_probability > 1.0)
            throw config_error("perfusion probability must be in [0,1]");
        if (transplant_probability < 0.0 || transplant_probability > 1.0)
            throw config_error("transplant probability must be in [0,1]");
        if (affine.probability < 0.0 || affine.probability > 1.0)
            throw config_error("affine probability must be in [0,1]");
        if (affine.min_scale <= 0.0 || affine.max_scale < affine.min_scale)
            throw config_error("affine scale range must be positive and ordered");
    }
};

inline AugmentationConfig augmentation_config_from_json(const nlohmann::json& j) {
    AugmentationConfig cfg;
    try {
        cfg.perfusion_probability = j.value("perfusion_probability", cfg.perfusion_probability);
        if (j.contains("target_organ"))
            cfg.target_organ = organ_class_from_json(j["target_organ"]);
        cfg.transplant_probability = j.value("transplant_probability", cfg.transplant_probability);
        if (j.contains("affine")) {
            const auto& ja = j["affine"];
            cfg.affine.probability = ja.value("probability", cfg.affine.probability);
            cfg.affine.max_shift_frac = ja.value("max_shift_frac", cfg.affine.max_shift_frac);
            cfg.affine.min_scale = ja.value("min_scale", cfg.affine.min_scale);
            cfg.affine.max_scale = ja.value("max_scale", cfg.affine.max_scale);
            cfg.affine.max_rotate_deg = ja.value("max_rotate_deg", cfg.affine.max_rotate_deg);
            cfg.affine.flip = ja.value("flip", cfg.affine.flip);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(std::string("malformed augmentation config: ") + ex.what());
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Perfusion augmentation
// ---------------------------------------------------------------------------

/// Deterministic core: replaces every pixel of `organ_class` by
/// (1 - lambda) * s + lambda * t(s). Other pixels are untouched (bit-exact);
/// lambda = 0 reproduces the input bit-exactly.
inline SpectralCube perfusion_augment_with(const SpectralCube& cube, const SegmentationMask& mask,
                                           int organ_class, const xfer::PerfusionTransform& t,
                                           double lambda) {
    require_paired(cube, mask);
    SpectralCube out = cube;
    for (int p = 0; p < mask.pixel_count(); ++p) {
        if (mask.labels[p] != organ_class) continue;
        const Spectrum original = cube.spectrum(p);
        const Spectrum transformed = xfer::apply_transform(t, original);
        auto dst = out.spectrum(p);
        for (int c = 0; c < kChannels; ++c) {
            dst[c] = static_cast<float>((1.0 - lambda) * static_cast<double>(original[c]) +
                                        lambda * static_cast<double>(transformed[c]));
        }
    }
    return out;
}

/// With probability p, picks a transform uniformly from the set, samples
/// lambda ~ U[0,1] and applies perfusion_augment_with; otherwise returns the
/// cube unchanged so some unaltered organ spectra are seen during training.
inline SpectralCube perfusion_augment(const SpectralCube& cube, const SegmentationMask& mask,
                                      int organ_class, const xfer::TransformSet& set, double p,
                                      Rng& rng) {
    if (set.transforms.empty())
        throw std::invalid_argument("perfusion_augment: empty transform set");
    if (!rng.bernoulli(p)) return cube;
    const auto j = rng.uniform_int(set.transforms.size());
    const double lambda = rng.uniform01();
    return perfusion_augment_with(cube, mask, organ_class, set.transforms[j], lambda);
}

// ---------------------------------------------------------------------------
// Affine augmentation
// ---------------------------------------------------------------------------

struct AffineParams {
    double shift_x = 0.0; // pixels
    double shift_y = 0.0;
    double scale = 1.0;
    double rotate_rad = 0.0;
    bool flip_horizontal = false;
};

inline AffineParams sample_affine(const AffineRanges& ranges, int width, int height, Rng& rng) {
    AffineParams p;
    if (!rng.bernoulli(ranges.probability)) return p;
    p.shift_x = rng.uniform(-ranges.max_shift_frac, ranges.max_shift_frac) * width;
    p.shift_y = rng.uniform(-ranges.max_shift_frac, ranges.max_shift_frac) * height;
    p.scale = rng.uniform(ranges.min_scale, ranges.max_scale);
    p.rotate_rad = rng.uniform(-ranges.max_rotate_deg, ranges.max_rotate_deg) *
                   std::numbers::pi / 180.0;
    p.flip_horizontal = ranges.flip && rng.bernoulli(0.5);
    return p;
}

/// Applies the same geometric transform to cube and mask: rotation and scale
/// about the canvas center, then translation, with optional horizontal flip
/// first. The cube is resampled bilinearly per channel and the mask nearest-
/// neighbor; pixels mapping outside the canvas get the IGNORE label and zero
/// reflectance.
inline std::pair<SpectralCube, SegmentationMask> affine_augment(const SpectralCube& cube,
                                                                const SegmentationMask& mask,
                                                                const AffineParams& params) {
    require_paired(cube, mask);
    const int w = cube.width, h = cube.height;
    SpectralCube out_cube(w, h);
    out_cube.l1_normalized = cube.l1_normalized;
    SegmentationMask out_mask(w, h, kIgnoreLabel);

    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double cos_t = std::cos(-params.rotate_rad), sin_t = std::sin(-params.rotate_rad);
    const double inv_scale = 1.0 / params.scale;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // inverse map: undo shift, rotation and scale, then unflip
            const double dx = x - cx - params.shift_x;
            const double dy = y - cy - params.shift_y;
            double sx = (cos_t * dx - sin_t * dy) * inv_scale + cx;
            const double sy = (sin_t * dx + cos_t * dy) * inv_scale + cy;
            if (params.flip_horizontal) sx = (w - 1) - sx;

            const double rx = std::round(sx), ry = std::round(sy);
            if (rx < 0 || rx > w - 1 || ry < 0 || ry > h - 1) continue; // stays IGNORE / zero
            out_mask.at(x, y) = mask.at(static_cast<int>(rx), static_cast<int>(ry));

            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 1);
            const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double fx = std::clamp(sx - x0, 0.0, 1.0);
            const double fy = std::clamp(sy - y0, 0.0, 1.0);

            auto dst = out_cube.at(x, y);
            const auto s00 = cube.at(x0, y0), s10 = cube.at(x1, y0);
            const auto s01 = cube.at(x0, y1), s11 = cube.at(x1, y1);
            for (int c = 0; c < kChannels; ++c) {
                const double top = s00[c] + fx * (static_cast<double>(s10[c]) - s00[c]);
                const double bottom = s01[c] + fx * (static_cast<double>(s11[c]) - s01[c]);
                dst[c] = static_cast<float>(top + fy * (bottom - top));
            }
        }
    }
    return {std::move(out_cube), std::move(out_mask)};
}

inline std::pair<SpectralCube, SegmentationMask> affine_augment(const SpectralCube& cube,
                                                                const SegmentationMask& mask,
                                                                const AffineRanges& ranges,
                                                                Rng& rng) {
    return affine_augment(cube, mask, sample_affine(ranges, cube.width, cube.height, rng));
}

// ---------------------------------------------------------------------------
// Organ transplantation
// ---------------------------------------------------------------------------

struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
};

/// Bounding box of a class in a mask, or w == 0 when absent.
inline Rect class_bbox(const SegmentationMask& mask, int organ_class) {
    int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y) == organ_class) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) return {};
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

/// L1-renormalizes all non-IGNORE pixels in place; IGNORE pixels (typically
/// zero fill from affine resampling) are left untouched.
inline void renormalize_valid(SpectralCube& cube, const SegmentationMask& mask) {
    require_paired(cube, mask);
    for (int p = 0; p < cube.pixel_count(); ++p) {
        if (mask.labels[p] == kIgnoreLabel) continue;
        auto s = cube.spectrum(p);
        double sum = 0.0;
        for (int c = 0; c < kChannels; ++c) sum += s[c];
        if (sum <= 0.0)
            throw numeric_error("degenerate all-zero spectrum at pixel " + std::to_string(p));
        const float inv = static_cast<float>(1.0 / sum);
        for (int c = 0; c < kChannels; ++c) s[c] *= inv;
    }
    cube.l1_normalized = true;
}

/// Deterministic core: copies the donor class pixels of image b (spectra and
/// labels, within the class bounding box) into image a with the box placed at
/// (dst_x, dst_y), then L1-renormalizes the result.
inline std::pair<SpectralCube, SegmentationMask> organ_transplant_at(
    const SpectralCube& cube_a, const SegmentationMask& mask_a, const SpectralCube& cube_b,
    const SegmentationMask& mask_b, int organ_class, int dst_x, int dst_y) {
    require_paired(cube_a, mask_a);
    require_paired(cube_b, mask_b);
    const Rect box = class_bbox(mask_b, organ_class);
    if (box.w == 0)
        throw std::invalid_argument("transplant: class " + std::to_string(organ_class) +
                                    " absent from donor");
    if (box.w > cube_a.width || box.h > cube_a.height)
        throw std::invalid_argument("transplant: donor region larger than target canvas");
    if (dst_x < 0 || dst_y < 0 || dst_x + box.w > cube_a.width || dst_y + box.h > cube_a.height)
        throw std::invalid_argument("transplant: placement outside target canvas");

    SpectralCube out_cube = cube_a;
    SegmentationMask out_mask = mask_a;
    for (int dy = 0; dy < box.h; ++dy) {
        for (int dx = 0; dx < box.w; ++dx) {
            if (mask_b.at(box.x + dx, box.y + dy) != organ_class) continue;
            out_mask.at(dst_x + dx, dst_y + dy) = static_cast<std::uint8_t>(organ_class);
            auto dst = out_cube.at(dst_x + dx, dst_y + dy);
            const auto src = cube_b.at(box.x + dx, box.y + dy);
            for (int c = 0; c < kChannels; ++c) dst[c] = src[c];
        }
    }
    renormalize_valid(out_cube, out_mask);
    return {std::move(out_cube), std::move(out_mask)};
}

/// Random placement fully inside the canvas.
inline std::pair<SpectralCube, SegmentationMask> organ_transplant(
    const SpectralCube& cube_a, const SegmentationMask& mask_a, const SpectralCube& cube_b,
    const SegmentationMask& mask_b, int organ_class, Rng& rng) {
    const Rect box = class_bbox(mask_b, organ_class);
    if (box.w == 0)
        throw std::invalid_argument("transplant: class " + std::to_string(organ_class) +
                                    " absent from donor");
    if (box.w > cube_a.width || box.h > cube_a.height)
        throw std::invalid_argument("transplant: donor region larger than target canvas");
    const int dst_x = static_cast<int>(rng.uniform_int(cube_a.width - box.w + 1));
    const int dst_y = static_cast<int>(rng.uniform_int(cube_a.height - box.h + 1));
    return organ_transplant_at(cube_a, mask_a, cube_b, mask_b, organ_class, dst_x, dst_y);
}

// ---------------------------------------------------------------------------
// Training-time pipeline: affine -> perfusion -> transplantation -> L1 renorm
// ---------------------------------------------------------------------------

/// One donor candidate for the transplantation stage.
struct DonorImage {
    const SpectralCube* cube = nullptr;
    const SegmentationMask* mask = nullptr;
};

/// The three augmentation stages, replaceable for instrumentation. Defaults
/// are the real implementations.
struct StageHooks {
    std::function<std::pair<SpectralCube, SegmentationMask>(
        const SpectralCube&, const SegmentationMask&, const AugmentationConfig&, Rng&)>
        affine;
    std::function<SpectralCube(const SpectralCube&, const SegmentationMask&,
                               const AugmentationConfig&, const xfer::TransformSet&, Rng&)>
        perfusion;
    std::function<std::pair<SpectralCube, SegmentationMask>(
        const SpectralCube&, const SegmentationMask&, const AugmentationConfig&,
        std::span<const DonorImage>, Rng&)>
        transplant;
};

namespace detail {

inline std::pair<SpectralCube, SegmentationMask> default_affine(const SpectralCube& cube,
                                                                const SegmentationMask& mask,
                                                                const AugmentationConfig& cfg,
                                                                Rng& rng) {
    return affine_augment(cube, mask, cfg.affine, rng);
}

inline SpectralCube default_perfusion(const SpectralCube& cube, const SegmentationMask& mask,
                                      const AugmentationConfig& cfg,
                                      const xfer::TransformSet& set, Rng& rng) {
    return perfusion_augment(cube, mask, cfg.target_organ, set, cfg.perfusion_probability, rng);
}

inline std::pair<SpectralCube, SegmentationMask> default_transplant(
    const SpectralCube& cube, const SegmentationMask& mask, const AugmentationConfig& cfg,
    std::span<const DonorImage> donors, Rng& rng) {
    if (donors.empty() || !rng.bernoulli(cfg.transplant_probability)) return {cube, mask};
    const DonorImage& donor = donors[rng.uniform_int(donors.size())];
    std::vector<int> classes;
    for (int cls = 1; cls < kNumClasses; ++cls) {
        const Rect box = class_bbox(*donor.mask, cls);
        if (box.w > 0 && box.w <= cube.width && box.h <= cube.height) classes.push_back(cls);
    }
    if (classes.empty()) return {cube, mask};
    const int cls = classes[rng.uniform_int(classes.size())];
    return organ_transplant(cube, mask, *donor.cube, *donor.mask, cls, rng);
}

} // namespace detail

/// Full training-time augmentation of one image. The stage order is fixed:
/// affine, then perfusion (only when `transforms` is non-null), then organ
/// transplantation, then L1 renormalization of all valid pixels. Each stage
/// consumes an independent random stream derived from `seed`, so disabling
/// one stage never shifts the randomness of another.
inline std::pair<SpectralCube, SegmentationMask> augment_image(
    const SpectralCube& cube, const SegmentationMask& mask, const AugmentationConfig& cfg,
    const xfer::TransformSet* transforms, std::span<const DonorImage> donors, std::uint64_t seed,
    const StageHooks& hooks = {}) {
    Rng affine_rng(mix_seed(seed, 1));
    Rng perfusion_rng(mix_seed(seed, 2));
    Rng transplant_rng(mix_seed(seed, 3));

    auto [c1, m1] = hooks.affine ? hooks.affine(cube, mask, cfg, affine_rng)
                                 : detail::default_affine(cube, mask, cfg, affine_rng);

    SpectralCube c2 = std::move(c1);
    if (transforms) {
        c2 = hooks.perfusion ? hooks.perfusion(c2, m1, cfg, *transforms, perfusion_rng)
                             : detail::default_perfusion(c2, m1, cfg, *transforms, perfusion_rng);
    }

    auto [c3, m3] = hooks.transplant
                        ? hooks.transplant(c2, m1, cfg, donors, transplant_rng)
                        : detail::default_transplant(c2, m1, cfg, donors, transplant_rng);

    renormalize_valid(c3, m3);
    return {std::move(c3), std::move(m3)};
}

} // namespace pxt::augment
