/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/hsicore.hpp
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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pxt/common.hpp"

namespace pxt {

/// One pixel's reflectance spectrum: 100 nonnegative samples on the fixed
/// 500..995 nm grid (5 nm spacing).
using Spectrum = Eigen::Matrix<float, kChannels, 1>;
using SpectrumMap = Eigen::Map<Spectrum>;
using ConstSpectrumMap = Eigen::Map<const Spectrum>;

/// Spectral raster. Storage is row-major over pixels, channel-fastest, so the
/// spectrum of one pixel is contiguous.
struct SpectralCube {
    int width = 0;
    int height = 0;
    bool l1_normalized = false;
    std::vector<float> data;

    SpectralCube() = default;
    SpectralCube(int w, int h)
        : width(w), height(h), data(static_cast<size_t>(w) * h * kChannels, 0.0f) {
        if (w < 1 || h < 1) throw std::invalid_argument("cube dimensions must be >= 1");
    }

    int pixel_count() const { return width * height; }

    ConstSpectrumMap spectrum(int pixel) const {
        return ConstSpectrumMap(data.data() + static_cast<size_t>(pixel) * kChannels);
    }
    SpectrumMap spectrum(int pixel) {
        return SpectrumMap(data.data() + static_cast<size_t>(pixel) * kChannels);
    }
    ConstSpectrumMap at(int x, int y) const { return spectrum(y * width + x); }
    SpectrumMap at(int x, int y) { return spectrum(y * width + x); }
};

/// Per-pixel class labels paired with a cube. Values are class ids 0..11 or
/// kIgnoreLabel for pixels excluded from losses and metrics.
struct SegmentationMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;

    SegmentationMask() = default;
    SegmentationMask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), labels(static_cast<size_t>(w) * h, fill) {
        if (w < 1 || h < 1) throw std::invalid_argument("mask dimensions must be >= 1");
    }

    int pixel_count() const { return width * height; }
    std::uint8_t at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return labels[static_cast<size_t>(y) * width + x]; }
};

inline void require_paired(const SpectralCube& cube, const SegmentationMask& mask) {
    if (cube.width != mask.width || cube.height != mask.height)
        throw std::invalid_argument("cube and mask dimensions do not match");
}

enum class Species { Pig, Rat, Human };
enum class Perfusion { Physiological, Malperfused };
enum class Annotation { Semantic, Polygon };
enum class Angle { Perpendicular, SideA25, SideB25 };

inline const char* to_string(Species s) {
    switch (s) {
        case Species::Pig: return "pig";
        case Species::Rat: return "rat";
        case Species::Human: return "human";
    }
    throw std::invalid_argument("bad species value");
}
inline const char* to_string(Perfusion p) {
    return p == Perfusion::Physiological ? "physiological" : "malperfused";
}
inline const char* to_string(Annotation a) { return a == Annotation::Semantic ? "semantic" : "polygon"; }
inline const char* to_string(Angle a) {
    switch (a) {
        case Angle::Perpendicular: return "perpendicular";
        case Angle::SideA25: return "25deg-side-a";
        case Angle::SideB25: return "25deg-side-b";
    }
    throw std::invalid_argument("bad angle value");
}

inline Species species_from_string(const std::string& s) {
    if (s == "pig") return Species::Pig;
    if (s == "rat") return Species::Rat;
    if (s == "human") return Species::Human;
    throw config_error("unknown species: " + s);
}
inline Perfusion perfusion_from_string(const std::string& s) {
    if (s == "physiological") return Perfusion::Physiological;
    if (s == "malperfused") return Perfusion::Malperfused;
    throw config_error("unknown perfusion state: " + s);
}
inline Annotation annotation_from_string(const std::string& s) {
    if (s == "semantic") return Annotation::Semantic;
    if (s == "polygon") return Annotation::Polygon;
    throw config_error("unknown annotation kind: " + s);
}
inline Angle angle_from_string(const std::string& s) {
    if (s == "perpendicular") return Angle::Perpendicular;
    if (s == "25deg-side-a") return Angle::SideA25;
    if (s == "25deg-side-b") return Angle::SideB25;
    throw config_error("unknown angle: " + s);
}

/// One image of a dataset manifest.
struct DatasetEntry {
    std::string image_id;
    std::string subject_id;
    Species species = Species::Pig;
    Perfusion perfusion = Perfusion::Physiological;
    Annotation annotation = Annotation::Semantic;
    std::optional<Angle> angle;
    std::string cube_path;
    std::string mask_path;
};

/// Manifest of subjects and images; drives fold generation and hierarchical
/// metric aggregation.
struct DatasetIndex {
    std::vector<DatasetEntry> entries;

    /// Enforces unique image ids and a single species per subject.
    void validate() const {
        std::set<std::string> ids;
        std::map<std::string, Species> subject_species;
        for (const auto& e : entries) {
            if (!ids.insert(e.image_id).second)
                throw config_error("duplicate image id in manifest: " + e.image_id);
            auto [it, inserted] = subject_species.emplace(e.subject_id, e.species);
            if (!inserted && it->second != e.species)
                throw config_error("subject mapped to two species: " + e.subject_id);
        }
    }

    const DatasetEntry& find(const std::string& image_id) const {
        for (const auto& e : entries)
            if (e.image_id == image_id) return e;
        throw std::invalid_argument("unknown image id: " + image_id);
    }

    bool contains(const std::string& image_id) const {
        for (const auto& e : entries)
            if (e.image_id == image_id) return true;
        return false;
    }

    /// Subject ids in first-appearance order.
    std::vector<std::string> subjects() const {
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& e : entries)
            if (seen.insert(e.subject_id).second) out.push_back(e.subject_id);
        return out;
    }
};

/// Angle/repetition replicates of one base image share the id prefix before
/// "#r"; this key groups them into the image unit used by variance analysis.
inline std::string replicate_group_of(const std::string& image_id) {
    const auto pos = image_id.rfind("#r");
    return pos == std::string::npos ? image_id : image_id.substr(0, pos);
}

/// Per-region spectral summary: channel-wise median and standard deviation
/// over the region's pixels.
struct RegionSummary {
    int organ_class = 0;
    Spectrum median = Spectrum::Zero();
    Spectrum sd = Spectrum::Zero();
    int pixel_count = 0;
    std::string subject_id;
    std::string image_id;
};

namespace detail {

inline void check_spectrum_finite(const float* s, int pixel) {
    for (int c = 0; c < kChannels; ++c) {
        if (!std::isfinite(s[c]) || s[c] < 0.0f)
            throw numeric_error("non-finite or negative reflectance at pixel " +
                                std::to_string(pixel) + ", channel " + std::to_string(c));
    }
}

} // namespace detail

/// L1-normalizes every pixel spectrum so its channels sum to 1, removing
/// multiplicative illumination effects. A cube already flagged l1_normalized
/// is returned unchanged (bitwise). Throws numeric_error on an all-zero pixel.
inline SpectralCube l1_normalize(const SpectralCube& cube) {
    SpectralCube out = cube;
    if (cube.l1_normalized) return out;
    for (int p = 0; p < cube.pixel_count(); ++p) {
        auto s = out.spectrum(p);
        detail::check_spectrum_finite(s.data(), p);
        double sum = 0.0;
        for (int c = 0; c < kChannels; ++c) sum += s[c];
        if (sum <= 0.0)
            throw numeric_error("degenerate all-zero spectrum at pixel " + std::to_string(p) +
                                " (x=" + std::to_string(p % cube.width) +
                                ", y=" + std::to_string(p / cube.width) + ")");
        const float inv = static_cast<float>(1.0 / sum);
        for (int c = 0; c < kChannels; ++c) s[c] *= inv;
    }
    out.l1_normalized = true;
    return out;
}

/// Channel-wise median and standard deviation of all pixels of `organ_class`.
/// Median of an even-sized region is the lower of the two middle values, so
/// results never depend on float averaging. Standard deviation is the
/// population SD. Throws std::invalid_argument if the class is absent.
inline RegionSummary region_median_spectrum(const SpectralCube& cube, const SegmentationMask& mask,
                                            int organ_class, std::string subject_id = {},
                                            std::string image_id = {}) {
    require_paired(cube, mask);
    std::vector<int> pixels;
    for (int p = 0; p < mask.pixel_count(); ++p)
        if (mask.labels[p] == organ_class) pixels.push_back(p);
    if (pixels.empty())
        throw std::invalid_argument("empty region: class " + std::to_string(organ_class) +
                                    " absent from mask");

    RegionSummary out;
    out.organ_class = organ_class;
    out.pixel_count = static_cast<int>(pixels.size());
    out.subject_id = std::move(subject_id);
    out.image_id = std::move(image_id);

    std::vector<float> values(pixels.size());
    const size_t mid = (pixels.size() - 1) / 2; // lower-of-two-middles
    for (int c = 0; c < kChannels; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (size_t i = 0; i < pixels.size(); ++i) {
            const float v = cube.spectrum(pixels[i])[c];
            values[i] = v;
            sum += v;
            sumsq += static_cast<double>(v) * v;
        }
        std::nth_element(values.begin(), values.begin() + mid, values.end());
        out.median[c] = values[mid];
        const double n = static_cast<double>(pixels.size());
        const double var = std::max(0.0, sumsq / n - (sum / n) * (sum / n));
        out.sd[c] = static_cast<float>(std::sqrt(var));
    }
    return out;
}

// Band-ratio oxygenation proxy. The two bands bracket spectral regions whose
// reflectance responds with opposite relative strength to hemoglobin
// deoxygenation, so the ratio moves monotonically with the perfusion state.
// This is a documented stand-in index, not the camera vendor's StO2 value.
inline constexpr int kIndexBandALoChannel = channel_of_nm(570);
inline constexpr int kIndexBandAHiChannel = channel_of_nm(590); // inclusive
inline constexpr int kIndexBandBLoChannel = channel_of_nm(740);
inline constexpr int kIndexBandBHiChannel = channel_of_nm(780); // inclusive

/// Scalar oxygenation proxy in [0, 1]. With band means a = mean(570-590 nm)
/// and b = mean(740-780 nm), returns a / (a + b): the squashing r / (1 + r)
/// of the band ratio r = a/b, which is 0.5 at r = 1, increases monotonically
/// in r, and clamps to 1.0 when the 740-780 nm band is zero.
inline double perfusion_index(const Spectrum& s) {
    double a = 0.0, b = 0.0;
    for (int c = kIndexBandALoChannel; c <= kIndexBandAHiChannel; ++c) a += s[c];
    for (int c = kIndexBandBLoChannel; c <= kIndexBandBHiChannel; ++c) b += s[c];
    a /= kIndexBandAHiChannel - kIndexBandALoChannel + 1;
    b /= kIndexBandBHiChannel - kIndexBandBLoChannel + 1;
    if (b <= 0.0) return 1.0;
    return a / (a + b);
}

/// Mean perfusion index over all pixels of a class.
inline double mean_region_perfusion_index(const SpectralCube& cube, const SegmentationMask& mask,
                                          int organ_class) {
    require_paired(cube, mask);
    double sum = 0.0;
    int n = 0;
    for (int p = 0; p < mask.pixel_count(); ++p) {
        if (mask.labels[p] != organ_class) continue;
        sum += perfusion_index(cube.spectrum(p));
        ++n;
    }
    if (n == 0)
        throw std::invalid_argument("empty region: class " + std::to_string(organ_class) +
                                    " absent from mask");
    return sum / n;
}

} // namespace pxt
