/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/synthgen.hpp
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

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pxt/common.hpp"
#include "pxt/hsicore.hpp"
#include "pxt/hsicore_io.hpp"
#include "pxt/rng.hpp"

namespace pxt::synthgen {

// ---------------------------------------------------------------------------
// Coarse chromophore extinction shapes on the 100-channel grid. These are
// hand-placed anchor curves, not literature tables: they reproduce the
// qualitative oxy/deoxy hemoglobin features that matter here (strong
// absorption below 600 nm, a deoxy bump near 757 nm, oxy dominating beyond
// 850 nm) and nothing more.
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::VectorXd interpolate_anchors(const std::vector<std::pair<double, double>>& anchors) {
    Eigen::VectorXd out(kChannels);
    size_t seg = 0;
    for (int c = 0; c < kChannels; ++c) {
        const double wl = wavelength_nm(c);
        while (seg + 2 < anchors.size() && anchors[seg + 1].first < wl) ++seg;
        const auto [x0, y0] = anchors[seg];
        const auto [x1, y1] = anchors[seg + 1];
        const double t = std::clamp((wl - x0) / (x1 - x0), 0.0, 1.0);
        out[c] = y0 + t * (y1 - y0);
    }
    return out;
}

} // namespace detail

inline const Eigen::VectorXd& oxy_extinction() {
    static const Eigen::VectorXd table = detail::interpolate_anchors({
        {500, 16.0}, {520, 12.0}, {530, 14.0}, {542, 26.0}, {550, 20.0}, {560, 16.0},
        {569, 22.0}, {577, 30.0}, {585, 11.0}, {590, 6.0},  {600, 1.8},  {620, 0.6},
        {650, 0.35}, {680, 0.30}, {700, 0.28}, {720, 0.32}, {740, 0.38}, {760, 0.45},
        {780, 0.55}, {800, 0.68}, {850, 0.95}, {900, 1.10}, {950, 1.15}, {995, 1.10},
    });
    return table;
}

inline const Eigen::VectorXd& deoxy_extinction() {
    static const Eigen::VectorXd table = detail::interpolate_anchors({
        {500, 21.0}, {520, 17.0}, {535, 22.0}, {545, 25.0}, {555, 30.0}, {565, 26.0},
        {577, 23.0}, {585, 21.5}, {590, 19.0}, {600, 8.0},  {620, 3.0},  {650, 2.0},
        {680, 1.8},  {700, 1.7},  {720, 1.7},  {740, 2.2},  {757, 3.2},  {770, 2.6},
        {780, 1.9},  {800, 1.15}, {850, 0.80}, {900, 0.72}, {950, 0.66}, {995, 0.60},
    });
    return table;
}

/// Global absorption scaling applied to blood-weighted extinction sums.
inline constexpr double kAbsorptionScale = 0.05;

// ---------------------------------------------------------------------------
// Profiles and ground-truth shifts
// ---------------------------------------------------------------------------

/// Chromophore mixture of one organ in one species.
struct OrganMixture {
    double oxy_weight = 0.0;       // blood volume x oxygenation
    double deoxy_weight = 0.0;     // blood volume x (1 - oxygenation)
    double scatter_weight = 1.0;   // exponent of the (lambda/750)^-w scatter slope
    Eigen::VectorXd species_offset = Eigen::VectorXd::Zero(kChannels);
};

struct SpeciesProfile {
    Species species = Species::Pig;
    std::map<int, OrganMixture> organs; // keyed by class id
    double sigma_subject = 0.0;
    double sigma_image = 0.0;
    double sigma_pixel = 0.0;
};

/// The generative truth mapping physiological to malperfused raw spectra of
/// one species: s_mal = A * s_phys + c with A = I minus a rank-1 term along
/// the deoxygenation direction. Serves as the oracle for transform recovery.
struct GroundTruthShift {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(kChannels, kChannels);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(kChannels);

    Eigen::VectorXd apply(const Eigen::VectorXd& s) const { return A * s + c; }
};

/// Rectangular organ regions tiled over the canvas; everything else is
/// background (class 0).
struct OrganLayoutSpec {
    std::vector<int> organ_classes = {static_cast<int>(OrganClass::Kidney),
                                      static_cast<int>(OrganClass::Liver),
                                      static_cast<int>(OrganClass::Spleen),
                                      static_cast<int>(OrganClass::SmallBowel)};
    int region_width = 12;
    int region_height = 10;
    int margin = 4;
};

struct SpeciesSpec {
    Species species = Species::Pig;
    int subjects = 4;
    int images_per_subject = 6;
    double malperfused_fraction = 0.5;
};

struct GenerationSpec {
    std::uint64_t seed = 1;
    int cube_width = 64;
    int cube_height = 48;
    std::vector<SpeciesSpec> species = {SpeciesSpec{}};
    OrganLayoutSpec layout;
    double sigma_subject = 0.08; // all sigmas are relative to the 0.01 mean channel value
    double sigma_image = 0.05;
    double sigma_pixel = 0.08;
    double species_offset_magnitude = 1.0;
    double shift_strength = 1.2;
    int target_organ = static_cast<int>(OrganClass::Kidney);
};

/// Everything one generation run produces, kept in memory. entries[i] pairs
/// with cubes[i] and masks[i].
struct GeneratedDataset {
    DatasetIndex index;
    std::vector<SpectralCube> cubes;
    std::vector<SegmentationMask> masks;
    std::map<Species, GroundTruthShift> shifts;
};

namespace detail {

/// Smooth zero-mean unit-RMS channel vector: white noise convolved with a
/// Gaussian kernel (sigma = 2 channels) and standardized.
inline Eigen::VectorXd smooth_unit_vector(Rng& rng) {
    Eigen::VectorXd white(kChannels);
    for (int c = 0; c < kChannels; ++c) white[c] = rng.normal();
    Eigen::VectorXd smooth = Eigen::VectorXd::Zero(kChannels);
    constexpr int kHalf = 5;
    static const auto kernel = [] {
        std::array<double, 2 * kHalf + 1> k{};
        double sum = 0.0;
        for (int i = -kHalf; i <= kHalf; ++i) {
            k[i + kHalf] = std::exp(-0.5 * (i / 2.0) * (i / 2.0));
            sum += k[i + kHalf];
        }
        for (auto& v : k) v /= sum;
        return k;
    }();
    for (int c = 0; c < kChannels; ++c) {
        for (int i = -kHalf; i <= kHalf; ++i) {
            const int src = std::clamp(c + i, 0, kChannels - 1);
            smooth[c] += kernel[i + kHalf] * white[src];
        }
    }
    smooth.array() -= smooth.mean();
    const double rms = std::sqrt(smooth.squaredNorm() / kChannels);
    if (rms > 0.0) smooth /= rms;
    return smooth;
}

struct OrganOptics {
    double blood;
    double oxygenation;
    double scatter_power;
};

inline OrganOptics organ_optics(int cls) {
    static constexpr OrganOptics table[kNumClasses] = {
        {0.20, 0.50, 0.60}, // background
        {0.70, 0.75, 1.00}, // stomach
        {0.85, 0.80, 1.45}, // small bowel
        {0.60, 0.68, 1.10}, // colon
        {1.60, 0.70, 1.20}, // liver
        {0.95, 0.74, 0.85}, // pancreas
        {1.30, 0.80, 1.00}, // kidney
        {2.10, 0.62, 1.40}, // spleen
        {0.45, 0.82, 0.75}, // omentum
        {1.10, 0.88, 1.55}, // lung
        {0.55, 0.85, 0.65}, // skin
        {0.75, 0.78, 0.92}, // peritoneum
    };
    if (cls < 0 || cls >= kNumClasses) throw std::invalid_argument("organ class id out of range");
    return table[cls];
}

inline std::uint64_t species_stream(Species s) { return static_cast<std::uint64_t>(s) + 11; }

} // namespace detail

/// Unit-sum baseline spectrum of a mixture, before the species offset.
inline Eigen::VectorXd mixture_shape(const OrganMixture& mix) {
    const auto& eo = oxy_extinction();
    const auto& ed = deoxy_extinction();
    Eigen::VectorXd shape(kChannels);
    for (int c = 0; c < kChannels; ++c) {
        const double wl = wavelength_nm(c);
        const double scatter = std::pow(wl / 750.0, -mix.scatter_weight);
        const double absorption = kAbsorptionScale * (mix.oxy_weight * eo[c] + mix.deoxy_weight * ed[c]);
        shape[c] = scatter * std::exp(-absorption);
    }
    return shape / shape.sum();
}

/// Baseline spectrum including the species offset, clamped at zero.
inline Eigen::VectorXd baseline_spectrum(const OrganMixture& mix) {
    return (mixture_shape(mix) + mix.species_offset).cwiseMax(0.0);
}

/// Reference spectrum of a blood-only tissue at the given oxygenation level,
/// L1-normalized. Used to probe the perfusion index against the generator's
/// ground-truth oxygenation parameter.
inline Spectrum reference_spectrum(double oxygenation, double blood = 1.0) {
    OrganMixture mix;
    mix.oxy_weight = blood * oxygenation;
    mix.deoxy_weight = blood * (1.0 - oxygenation);
    mix.scatter_weight = 1.0;
    const Eigen::VectorXd base = mixture_shape(mix);
    return (base / base.sum()).cast<float>();
}

/// Builds the species profile for a generation spec: fixed per-organ optics,
/// plus a smooth species- and organ-specific offset scaled by
/// species_offset_magnitude.
inline SpeciesProfile make_species_profile(const GenerationSpec& spec, Species species) {
    SpeciesProfile profile;
    profile.species = species;
    profile.sigma_subject = spec.sigma_subject;
    profile.sigma_image = spec.sigma_image;
    profile.sigma_pixel = spec.sigma_pixel;

    // One smooth offset direction per species, shared by all its organs: it
    // displaces the species as a whole in spectrum space while leaving the
    // chromophore-driven geometry between organs intact. Per-channel it is
    // proportional to the organ's own baseline (capped at -90%) so no channel
    // is driven to zero.
    Eigen::VectorXd species_dir = Eigen::VectorXd::Zero(kChannels);
    if (spec.species_offset_magnitude != 0.0) {
        Rng rng(mix_seed(spec.seed, detail::species_stream(species), 101));
        species_dir = detail::smooth_unit_vector(rng);
    }

    std::vector<int> classes = spec.layout.organ_classes;
    classes.push_back(static_cast<int>(OrganClass::Background));
    if (spec.target_organ >= 0) classes.push_back(spec.target_organ);
    for (int cls : classes) {
        if (profile.organs.count(cls)) continue;
        const auto optics = detail::organ_optics(cls);
        OrganMixture mix;
        mix.oxy_weight = optics.blood * optics.oxygenation;
        mix.deoxy_weight = optics.blood * (1.0 - optics.oxygenation);
        mix.scatter_weight = optics.scatter_power;
        if (spec.species_offset_magnitude != 0.0) {
            const Eigen::VectorXd shape = mixture_shape(mix);
            mix.species_offset =
                shape.cwiseProduct((spec.species_offset_magnitude * species_dir).cwiseMax(-0.9));
        }
        profile.organs[cls] = std::move(mix);
    }
    return profile;
}

/// Ground-truth perfusion shift of one species: a rank-1 deoxygenation move
///   s_mal = s - u (v^T s) - 0.05 u,
/// where u points along the first-order reflectance change of converting oxy
/// to deoxy hemoglobin at the target organ's operating point and v is a
/// uniform probe scaled so v^T s is ~1 for spectra near that operating point.
inline GroundTruthShift make_ground_truth_shift(const GenerationSpec& spec,
                                                const SpeciesProfile& profile) {
    const auto it = profile.organs.find(spec.target_organ);
    if (it == profile.organs.end())
        throw std::invalid_argument("target organ missing from species profile");
    const OrganMixture& mix = it->second;
    const Eigen::VectorXd base = baseline_spectrum(mix);
    const double blood = mix.oxy_weight + mix.deoxy_weight;

    Eigen::VectorXd u(kChannels);
    const auto& eo = oxy_extinction();
    const auto& ed = deoxy_extinction();
    for (int c = 0; c < kChannels; ++c)
        u[c] = spec.shift_strength * base[c] * (ed[c] - eo[c]) * blood * kAbsorptionScale;
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(kChannels) / base.sum();

    GroundTruthShift shift;
    shift.A = Eigen::MatrixXd::Identity(kChannels, kChannels) - u * v.transpose();
    shift.c = -0.05 * u;
    return shift;
}

/// Organ rectangle placements for a canvas; throws config_error when the
/// layout asks for more organs than fit.
inline std::vector<std::pair<int, std::array<int, 4>>> layout_regions(const OrganLayoutSpec& layout,
                                                                      int width, int height) {
    for (int cls : layout.organ_classes) {
        if (cls <= 0 || cls >= kNumClasses)
            throw config_error("layout organ class out of range: " + std::to_string(cls));
    }
    const int cell_w = layout.region_width + layout.margin;
    const int cell_h = layout.region_height + layout.margin;
    const int nx = (width - layout.margin) / cell_w;
    const int ny = (height - layout.margin) / cell_h;
    if (static_cast<int>(layout.organ_classes.size()) > nx * ny)
        throw config_error("layout error: " + std::to_string(layout.organ_classes.size()) +
                           " organs do not fit a " + std::to_string(nx) + "x" + std::to_string(ny) +
                           " grid");
    std::vector<std::pair<int, std::array<int, 4>>> regions;
    for (size_t i = 0; i < layout.organ_classes.size(); ++i) {
        const int cx = static_cast<int>(i) % nx;
        const int cy = static_cast<int>(i) / nx;
        const int x0 = layout.margin + cx * cell_w;
        const int y0 = layout.margin + cy * cell_h;
        regions.push_back({layout.organ_classes[i],
                           {x0, y0, layout.region_width, layout.region_height}});
    }
    return regions;
}

inline SegmentationMask layout_mask(const OrganLayoutSpec& layout, int width, int height) {
    SegmentationMask mask(width, height, static_cast<std::uint8_t>(OrganClass::Background));
    for (const auto& [cls, rect] : layout_regions(layout, width, height)) {
        for (int y = rect[1]; y < rect[1] + rect[3]; ++y)
            for (int x = rect[0]; x < rect[0] + rect[2]; ++x)
                mask.at(x, y) = static_cast<std::uint8_t>(cls);
    }
    return mask;
}

/// Deterministic multi-species dataset generation. Per-pixel raw spectra are
///   clamp(baseline(organ) + subject effect + image effect [shifted if the
///   image is malperfused and the pixel is the target organ] + pixel noise, 0)
/// followed by per-pixel L1 normalization. All randomness is keyed by
/// mix_seed, so any image can be regenerated independently.
inline GeneratedDataset generate_dataset(const GenerationSpec& spec) {
    if (spec.cube_width < 1 || spec.cube_height < 1) throw config_error("cube size must be >= 1");
    for (const auto& sp : spec.species)
        if (sp.subjects < 1 || sp.images_per_subject < 1)
            throw config_error("species counts must be >= 1");

    GeneratedDataset out;
    const SegmentationMask mask = layout_mask(spec.layout, spec.cube_width, spec.cube_height);

    for (size_t si = 0; si < spec.species.size(); ++si) {
        const SpeciesSpec& sp = spec.species[si];
        const SpeciesProfile profile = make_species_profile(spec, sp.species);
        const GroundTruthShift shift = make_ground_truth_shift(spec, profile);
        out.shifts[sp.species] = shift;
        const std::uint64_t sstream = detail::species_stream(sp.species);

        const int n_mal = static_cast<int>(
            std::lround(sp.malperfused_fraction * sp.images_per_subject));

        for (int subj = 0; subj < sp.subjects; ++subj) {
            const std::string subject_id =
                std::string(to_string(sp.species)) + "-s" + std::to_string(subj);

            // Per-(subject, organ) smooth effects.
            std::map<int, Eigen::VectorXd> subject_effect;
            for (const auto& [cls, mix] : profile.organs) {
                Rng rng(mix_seed(spec.seed, sstream, 1000 + subj, static_cast<std::uint64_t>(cls)));
                subject_effect[cls] =
                    profile.sigma_subject * 0.01 * detail::smooth_unit_vector(rng);
            }

            for (int img = 0; img < sp.images_per_subject; ++img) {
                const bool malperfused = img >= sp.images_per_subject - n_mal;
                const std::string image_id = subject_id + "-i" + std::to_string(img);

                Rng img_rng(mix_seed(spec.seed, sstream, 2000 + subj, 100000 + img));
                const Eigen::VectorXd image_effect =
                    profile.sigma_image * 0.01 * detail::smooth_unit_vector(img_rng);

                // One signal vector per organ, shared by all its pixels.
                std::map<int, Eigen::VectorXd> organ_signal;
                for (const auto& [cls, mix] : profile.organs) {
                    Eigen::VectorXd signal =
                        baseline_spectrum(mix) + subject_effect.at(cls) + image_effect;
                    if (malperfused && cls == spec.target_organ) signal = shift.apply(signal);
                    organ_signal[cls] = std::move(signal);
                }

                SpectralCube cube(spec.cube_width, spec.cube_height);
                Rng noise_rng(mix_seed(spec.seed, sstream, 3000 + subj, 200000 + img));
                for (int p = 0; p < cube.pixel_count(); ++p) {
                    const auto& signal = organ_signal.at(mask.labels[p]);
                    auto s = cube.spectrum(p);
                    for (int cch = 0; cch < kChannels; ++cch) {
                        const double v =
                            signal[cch] + profile.sigma_pixel * 0.01 * noise_rng.normal();
                        s[cch] = static_cast<float>(std::max(v, 0.0));
                    }
                }

                DatasetEntry entry;
                entry.image_id = image_id;
                entry.subject_id = subject_id;
                entry.species = sp.species;
                entry.perfusion = malperfused ? Perfusion::Malperfused : Perfusion::Physiological;
                entry.annotation = Annotation::Semantic;
                entry.cube_path = "cubes/" + image_id + ".hsc";
                entry.mask_path = "masks/" + image_id + ".msk";
                out.index.entries.push_back(std::move(entry));
                out.cubes.push_back(l1_normalize(cube));
                out.masks.push_back(mask);
            }
        }
    }
    out.index.validate();
    return out;
}

struct AngleReplicateSpec {
    int n_angles = 3;              // 1..3, in the fixed order perpendicular / side A / side B
    int repetitions = 3;
    double angle_effect = 0.5;     // relative magnitude of the per-angle additive effect
    double sigma_repetition = 0.1; // relative per-pixel recording noise between repetitions
};

/// Expands every image into n_angles x repetitions replicate images. The
/// perpendicular angle is the reference (zero effect); side angles add a
/// fixed smooth channel effect of opposite signs. Repetition noise is white
/// per pixel. Replicate ids follow "<base>#a<angle>#r<rep>", and replicates
/// of one base image share its mask.
inline GeneratedDataset generate_angle_replicates(const GeneratedDataset& base,
                                                  const AngleReplicateSpec& rep_spec,
                                                  std::uint64_t seed) {
    if (rep_spec.n_angles < 1 || rep_spec.n_angles > 3)
        throw config_error("angle count must be in 1..3");
    if (rep_spec.repetitions < 1) throw config_error("repetitions must be >= 1");

    Rng shape_rng(mix_seed(seed, 7001));
    const Eigen::VectorXd angle_shape = detail::smooth_unit_vector(shape_rng);
    static constexpr Angle kAngles[3] = {Angle::Perpendicular, Angle::SideA25, Angle::SideB25};
    static constexpr double kAngleSign[3] = {0.0, 1.0, -1.0};

    GeneratedDataset out;
    out.shifts = base.shifts;
    for (size_t i = 0; i < base.index.entries.size(); ++i) {
        const DatasetEntry& e = base.index.entries[i];
        const SpectralCube& cube = base.cubes[i];
        for (int a = 0; a < rep_spec.n_angles; ++a) {
            const Eigen::VectorXd effect =
                rep_spec.angle_effect * 0.01 * kAngleSign[a] * angle_shape;
            for (int r = 0; r < rep_spec.repetitions; ++r) {
                DatasetEntry re = e;
                re.image_id = e.image_id + "#a" + std::to_string(a) + "#r" + std::to_string(r);
                re.angle = kAngles[a];
                re.cube_path = "cubes/" + re.image_id + ".hsc";
                // replicate masks are identical to the base mask
                out.index.entries.push_back(std::move(re));
                out.masks.push_back(base.masks[i]);

                if (kAngleSign[a] == 0.0 && rep_spec.sigma_repetition == 0.0) {
                    out.cubes.push_back(cube); // bit-identical reference replicate
                    continue;
                }
                SpectralCube rc = cube;
                rc.l1_normalized = false;
                Rng noise(mix_seed(seed, 7100 + i, static_cast<std::uint64_t>(a),
                                   static_cast<std::uint64_t>(r)));
                for (int p = 0; p < rc.pixel_count(); ++p) {
                    auto s = rc.spectrum(p);
                    for (int c = 0; c < kChannels; ++c) {
                        const double v = s[c] + effect[c] +
                                         rep_spec.sigma_repetition * 0.01 * noise.normal();
                        s[c] = static_cast<float>(std::max(v, 0.0));
                    }
                }
                out.cubes.push_back(l1_normalize(rc));
            }
        }
    }
    out.index.validate();
    return out;
}

// ---------------------------------------------------------------------------
// JSON config parsing
// ---------------------------------------------------------------------------

inline GenerationSpec generation_spec_from_json(const nlohmann::json& j) {
    GenerationSpec spec;
    try {
        spec.seed = j.value("seed", spec.seed);
        spec.cube_width = j.value("cube_width", spec.cube_width);
        spec.cube_height = j.value("cube_height", spec.cube_height);
        spec.sigma_subject = j.value("sigma_subject", spec.sigma_subject);
        spec.sigma_image = j.value("sigma_image", spec.sigma_image);
        spec.sigma_pixel = j.value("sigma_pixel", spec.sigma_pixel);
        spec.species_offset_magnitude =
            j.value("species_offset_magnitude", spec.species_offset_magnitude);
        spec.shift_strength = j.value("shift_strength", spec.shift_strength);
        if (j.contains("target_organ")) spec.target_organ = organ_class_from_json(j["target_organ"]);
        if (j.contains("layout")) {
            const auto& jl = j["layout"];
            if (jl.contains("organs")) {
                spec.layout.organ_classes.clear();
                for (const auto& o : jl["organs"])
                    spec.layout.organ_classes.push_back(organ_class_from_json(o));
            }
            spec.layout.region_width = jl.value("region_width", spec.layout.region_width);
            spec.layout.region_height = jl.value("region_height", spec.layout.region_height);
            spec.layout.margin = jl.value("margin", spec.layout.margin);
        }
        if (j.contains("species")) {
            spec.species.clear();
            for (const auto& js : j["species"]) {
                SpeciesSpec sp;
                sp.species = species_from_string(js.at("name").get<std::string>());
                sp.subjects = js.value("subjects", sp.subjects);
                sp.images_per_subject = js.value("images_per_subject", sp.images_per_subject);
                sp.malperfused_fraction = js.value("malperfused_fraction", sp.malperfused_fraction);
                spec.species.push_back(sp);
            }
        }
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(std::string("malformed generation spec: ") + ex.what());
    }
    if (spec.species.empty()) throw config_error("generation spec lists no species");
    return spec;
}

inline nlohmann::json shift_to_json(const GroundTruthShift& shift) {
    nlohmann::json jw = nlohmann::json::array();
    for (int r = 0; r < kChannels; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < kChannels; ++c) row.push_back(shift.A(r, c));
        jw.push_back(std::move(row));
    }
    nlohmann::json jc = nlohmann::json::array();
    for (int c = 0; c < kChannels; ++c) jc.push_back(shift.c[c]);
    return nlohmann::json{{"A", std::move(jw)}, {"c", std::move(jc)}};
}

} // namespace pxt::synthgen
