/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/xfer.hpp
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
#include <atomic>
#include <cmath>
#include <limits>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <string>
#include <vector>

#include <json.hpp>

#include "pxt/common.hpp"
#include "pxt/hsicore.hpp"
#include "pxt/hsicore_io.hpp"
#include "pxt/optim.hpp"
#include "pxt/rng.hpp"

namespace pxt::xfer {

/// Learned affine map from physiological to malperfused spectra of one image
/// pair: s -> W s + b. 100*100 + 100 = 10100 parameters.
struct PerfusionTransform {
    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(kChannels, kChannels);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(kChannels);

    // provenance
    Species source_species = Species::Pig;
    std::string physiological_id;
    std::string malperfused_id;
    double final_loss = 0.0;
};

struct TransformSet {
    Species source_species = Species::Pig;
    std::vector<PerfusionTransform> transforms;
};

/// Applies a transform to one spectrum. Negative output channels are clamped
/// at zero unless `clamp` is false; the result is not renormalized.
inline Spectrum apply_transform(const PerfusionTransform& t, const Spectrum& s, bool clamp = true) {
    Eigen::VectorXd out = t.W * s.cast<double>() + t.b;
    if (clamp) out = out.cwiseMax(0.0);
    return out.cast<float>();
}

/// All spectra of one organ class as a dense row-per-pixel matrix (n x 100).
inline Eigen::MatrixXd organ_spectra(const SpectralCube& cube, const SegmentationMask& mask,
                                     int organ_class) {
    require_paired(cube, mask);
    std::vector<int> pixels;
    for (int p = 0; p < mask.pixel_count(); ++p)
        if (mask.labels[p] == organ_class) pixels.push_back(p);
    if (pixels.empty())
        throw std::invalid_argument("empty region: class " + std::to_string(organ_class) +
                                    " absent from mask");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(pixels.size()), kChannels);
    for (size_t i = 0; i < pixels.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = cube.spectrum(pixels[i]).cast<double>().transpose();
    return out;
}

// ---------------------------------------------------------------------------
// Composite distribution-matching loss
// ---------------------------------------------------------------------------

/// 50-bin histogram over the fixed reflectance range [0, 0.1]. Values are
/// soft-assigned to bins with a Gaussian kernel of width `temperature`
/// (default: half a bin width); as temperature -> 0 the soft histogram
/// converges to hard nearest-center binning. Out-of-range values are clamped
/// to the range, i.e. their mass lands in the edge bins.
struct HistogramConfig {
    int bins = 50;
    double lo = 0.0;
    double hi = 0.1;
    double temperature = 0.001;

    double bin_width() const { return (hi - lo) / bins; }
    double center(int k) const { return lo + (k + 0.5) * bin_width(); }
};

namespace detail {

/// Bin window with non-negligible kernel mass around a clamped value.
inline std::pair<int, int> kernel_window(const HistogramConfig& cfg, double x) {
    const double radius = 8.0 * cfg.temperature;
    int k0 = static_cast<int>(std::floor((x - radius - cfg.lo) / cfg.bin_width()));
    int k1 = static_cast<int>(std::floor((x + radius - cfg.lo) / cfg.bin_width()));
    k0 = std::clamp(k0, 0, cfg.bins - 1);
    k1 = std::clamp(k1, 0, cfg.bins - 1);
    return {k0, k1};
}

} // namespace detail

/// Soft histogram of all entries of `values`, normalized to sum to 1.
inline Eigen::VectorXd soft_histogram(const Eigen::Ref<const Eigen::MatrixXd>& values,
                                      const HistogramConfig& cfg) {
    if (values.size() == 0) throw std::invalid_argument("soft_histogram: empty value set");
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg.bins);
    const double inv_n = 1.0 / static_cast<double>(values.size());
    const double inv_2t2 = 1.0 / (2.0 * cfg.temperature * cfg.temperature);
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index col = 0; col < values.cols(); ++col) {
            const double x = std::clamp(values(r, col), cfg.lo, cfg.hi);
            const auto [k0, k1] = detail::kernel_window(cfg, x);
            // shift exponents by the max to avoid 0/0 in fully-truncated tails
            double best = -std::numeric_limits<double>::infinity();
            for (int k = k0; k <= k1; ++k) {
                const double d = x - cfg.center(k);
                best = std::max(best, -d * d * inv_2t2);
            }
            double norm = 0.0;
            for (int k = k0; k <= k1; ++k) {
                const double d = x - cfg.center(k);
                norm += std::exp(-d * d * inv_2t2 - best);
            }
            for (int k = k0; k <= k1; ++k) {
                const double d = x - cfg.center(k);
                h[k] += inv_n * std::exp(-d * d * inv_2t2 - best) / norm;
            }
        }
    }
    return h;
}

/// Hard nearest-center binning; the reporting-mode counterpart of
/// soft_histogram, also normalized to sum to 1.
inline Eigen::VectorXd hard_histogram(const Eigen::Ref<const Eigen::MatrixXd>& values,
                                      const HistogramConfig& cfg) {
    if (values.size() == 0) throw std::invalid_argument("hard_histogram: empty value set");
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg.bins);
    const double inv_n = 1.0 / static_cast<double>(values.size());
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index col = 0; col < values.cols(); ++col) {
            const double x = std::clamp(values(r, col), cfg.lo, cfg.hi);
            const int k =
                std::clamp(static_cast<int>((x - cfg.lo) / cfg.bin_width()), 0, cfg.bins - 1);
            h[k] += inv_n;
        }
    }
    return h;
}

struct CompositeLossReport {
    double histogram_term = 0.0;
    double mean_term = 0.0;
    double sd_term = 0.0;
    double total = 0.0;
};

namespace detail {

struct SetMoments {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd; // population SD per channel
};

inline SetMoments moments(const Eigen::MatrixXd& spectra) {
    SetMoments m;
    m.mean = spectra.colwise().mean();
    const Eigen::MatrixXd centered = spectra.rowwise() - m.mean.transpose();
    m.sd = (centered.array().square().colwise().mean()).sqrt();
    return m;
}

} // namespace detail

/// The three-term distribution-matching loss between a target spectra set and
/// a transformed spectra set: MSE of the two pooled-reflectance histograms,
/// MSE of the mean spectra, and MSE of the per-channel SD spectra, summed
/// with equal weights. Optionally accumulates d(total)/d(transformed) into
/// `grad` (same shape as `transformed`).
inline CompositeLossReport composite_loss(const Eigen::MatrixXd& target,
                                          const Eigen::MatrixXd& transformed,
                                          const HistogramConfig& cfg = {},
                                          Eigen::MatrixXd* grad = nullptr) {
    if (target.rows() == 0 || transformed.rows() == 0)
        throw std::invalid_argument("composite_loss: empty spectra set");
    if (target.cols() != kChannels || transformed.cols() != kChannels)
        throw std::invalid_argument("composite_loss: spectra must have 100 channels");

    CompositeLossReport report;
    if (grad) grad->setZero(transformed.rows(), transformed.cols());

    // term 1: histograms of all pooled reflectance values
    const Eigen::VectorXd h_target = soft_histogram(target, cfg);
    const Eigen::VectorXd h_trans = soft_histogram(transformed, cfg);
    const Eigen::VectorXd h_diff = h_trans - h_target;
    report.histogram_term = h_diff.squaredNorm() / cfg.bins;

    // term 2 + 3: mean and SD spectra
    const auto m_target = detail::moments(target);
    const auto m_trans = detail::moments(transformed);
    const Eigen::VectorXd mean_diff = m_trans.mean - m_target.mean;
    const Eigen::VectorXd sd_diff = m_trans.sd - m_target.sd;
    report.mean_term = mean_diff.squaredNorm() / kChannels;
    report.sd_term = sd_diff.squaredNorm() / kChannels;
    report.total = report.histogram_term + report.mean_term + report.sd_term;

    if (!grad) return report;

    const double n = static_cast<double>(transformed.rows());
    const double n_values = n * kChannels;
    const double inv_t2 = 1.0 / (cfg.temperature * cfg.temperature);

    for (Eigen::Index i = 0; i < transformed.rows(); ++i) {
        for (int c = 0; c < kChannels; ++c) {
            const double raw = transformed(i, c);
            double g = 0.0;

            // histogram term; clamped values carry no gradient
            if (raw >= cfg.lo && raw <= cfg.hi) {
                const auto [k0, k1] = detail::kernel_window(cfg, raw);
                double best = -std::numeric_limits<double>::infinity();
                for (int k = k0; k <= k1; ++k) {
                    const double d = raw - cfg.center(k);
                    best = std::max(best, -0.5 * d * d * inv_t2);
                }
                double norm = 0.0;
                for (int k = k0; k <= k1; ++k) {
                    const double d = raw - cfg.center(k);
                    norm += std::exp(-0.5 * d * d * inv_t2 - best);
                }
                double cbar = 0.0;
                for (int k = k0; k <= k1; ++k) {
                    const double d = raw - cfg.center(k);
                    cbar += cfg.center(k) * std::exp(-0.5 * d * d * inv_t2 - best) / norm;
                }
                for (int k = k0; k <= k1; ++k) {
                    const double d = raw - cfg.center(k);
                    const double w = std::exp(-0.5 * d * d * inv_t2 - best) / norm;
                    const double dwdx = w * inv_t2 * (cfg.center(k) - cbar);
                    g += (2.0 / cfg.bins) * h_diff[k] * dwdx / n_values;
                }
            }

            // mean term
            g += (2.0 / kChannels) * mean_diff[c] / n;

            // SD term; at sd == 0 all deviations vanish and so does the gradient
            if (m_trans.sd[c] > 0.0) {
                g += (2.0 / kChannels) * sd_diff[c] * (raw - m_trans.mean[c]) /
                     (m_trans.sd[c] * n);
            }

            (*grad)(i, c) += g;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Transform learning
// ---------------------------------------------------------------------------

struct LearnConfig {
    int steps = 100;
    AdamConfig adam{};      // lr 0.001, beta1 0.9, beta2 0.999
    HistogramConfig hist{};
};

struct LearnOutcome {
    PerfusionTransform transform;
    CompositeLossReport initial_report;
    CompositeLossReport final_report;
    bool loss_decreased = true;
};

namespace detail {

inline Eigen::VectorXd pack(const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
    Eigen::VectorXd p(kChannels * kChannels + kChannels);
    for (int r = 0; r < kChannels; ++r)
        p.segment(static_cast<Eigen::Index>(r) * kChannels, kChannels) = W.row(r).transpose();
    p.tail(kChannels) = b;
    return p;
}

inline void unpack(const Eigen::VectorXd& p, Eigen::MatrixXd& W, Eigen::VectorXd& b) {
    for (int r = 0; r < kChannels; ++r)
        W.row(r) = p.segment(static_cast<Eigen::Index>(r) * kChannels, kChannels).transpose();
    b = p.tail(kChannels);
}

} // namespace detail

/// Composite loss of the affine map (W, b) applied to `phys` against `mal`,
/// with analytic gradients with respect to W (row-major) and b packed into
/// `grad` when given. The map is evaluated unclamped: optimization sees the
/// raw affine outputs, clamping happens only at application time.
inline CompositeLossReport transform_loss(const Eigen::MatrixXd& phys, const Eigen::MatrixXd& mal,
                                          const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                                          const HistogramConfig& cfg,
                                          Eigen::VectorXd* grad = nullptr) {
    const Eigen::MatrixXd transformed =
        (phys * W.transpose()).rowwise() + b.transpose();
    Eigen::MatrixXd d_transformed;
    const CompositeLossReport report =
        composite_loss(mal, transformed, cfg, grad ? &d_transformed : nullptr);
    if (grad) {
        const Eigen::MatrixXd dW = d_transformed.transpose() * phys;
        const Eigen::VectorXd db = d_transformed.colwise().sum();
        *grad = detail::pack(dW, db);
    }
    return report;
}

/// Learns one perfusion transform from an image pair by running `steps` Adam
/// iterations on the composite loss between the malperfused organ spectra and
/// the transformed physiological organ spectra. W starts at the identity and
/// b at zero, so the initial transform is a no-op.
inline LearnOutcome learn_transform(const SpectralCube& phys_cube, const SegmentationMask& phys_mask,
                                    const SpectralCube& mal_cube, const SegmentationMask& mal_mask,
                                    int organ_class, const LearnConfig& cfg = {}) {
    if (!phys_cube.l1_normalized || !mal_cube.l1_normalized)
        throw std::invalid_argument("learn_transform requires L1-normalized cubes");
    const Eigen::MatrixXd phys = organ_spectra(phys_cube, phys_mask, organ_class);
    const Eigen::MatrixXd mal = organ_spectra(mal_cube, mal_mask, organ_class);

    LearnOutcome out;
    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(kChannels, kChannels);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(kChannels);

    out.initial_report = transform_loss(phys, mal, W, b, cfg.hist);

    if (cfg.steps > 0) {
        Eigen::VectorXd params = detail::pack(W, b);
        Eigen::VectorXd grad(params.size());
        Adam adam(cfg.adam, params.size());
        for (int step = 0; step < cfg.steps; ++step) {
            detail::unpack(params, W, b);
            const CompositeLossReport r = transform_loss(phys, mal, W, b, cfg.hist, &grad);
            if (!std::isfinite(r.total)) throw numeric_error("transform optimization diverged");
            adam.step(params, grad);
        }
        detail::unpack(params, W, b);
    }

    out.final_report = transform_loss(phys, mal, W, b, cfg.hist);
    out.loss_decreased = out.final_report.total <= out.initial_report.total;
    out.transform.W = std::move(W);
    out.transform.b = std::move(b);
    out.transform.final_loss = out.final_report.total;
    return out;
}

/// Loads the cube/mask pair of a manifest entry; lets transform-set learning
/// run on in-memory datasets or straight from disk.
using PairLoader = std::function<std::pair<SpectralCube, SegmentationMask>(const DatasetEntry&)>;

/// Learns a set of `n_pairs` transforms from seeded random (physiological,
/// malperfused) image pairings. Pairs are drawn uniformly and independently
/// and may cross subjects. Pair optimizations are independent; with
/// `threads > 1` they run concurrently, assembled in pair order.
inline TransformSet learn_transform_set(const DatasetIndex& index, const PairLoader& load,
                                        int organ_class, int n_pairs, std::uint64_t seed,
                                        const LearnConfig& cfg = {}, int threads = 1) {
    if (n_pairs < 1) throw std::invalid_argument("n_pairs must be >= 1");
    if (index.entries.empty()) throw std::invalid_argument("empty manifest");
    std::vector<const DatasetEntry*> phys, mal;
    for (const auto& e : index.entries) {
        if (e.species != index.entries.front().species)
            throw config_error("transform learning expects a single-species manifest");
        (e.perfusion == Perfusion::Physiological ? phys : mal).push_back(&e);
    }
    if (phys.empty()) throw std::invalid_argument("unsatisfiable: no physiological images");
    if (mal.empty()) throw std::invalid_argument("unsatisfiable: no malperfused images");

    Rng rng(mix_seed(seed, 501));
    std::vector<std::pair<const DatasetEntry*, const DatasetEntry*>> pairs(n_pairs);
    for (int k = 0; k < n_pairs; ++k) {
        pairs[k] = {phys[rng.uniform_int(phys.size())], mal[rng.uniform_int(mal.size())]};
    }

    TransformSet set;
    set.source_species = index.entries.front().species;
    set.transforms.resize(n_pairs);

    auto learn_one = [&](int k) {
        const auto [pe, me] = pairs[k];
        const auto [pc, pm] = load(*pe);
        const auto [mc, mm] = load(*me);
        LearnOutcome outcome = learn_transform(pc, pm, mc, mm, organ_class, cfg);
        outcome.transform.source_species = pe->species;
        outcome.transform.physiological_id = pe->image_id;
        outcome.transform.malperfused_id = me->image_id;
        set.transforms[k] = std::move(outcome.transform);
    };

    if (threads <= 1 || n_pairs == 1) {
        for (int k = 0; k < n_pairs; ++k) learn_one(k);
    } else {
        std::vector<std::future<void>> futures;
        std::atomic<int> next{0};
        const int workers = std::min(threads, n_pairs);
        for (int w = 0; w < workers; ++w) {
            futures.push_back(std::async(std::launch::async, [&] {
                for (int k = next.fetch_add(1); k < n_pairs; k = next.fetch_add(1)) learn_one(k);
            }));
        }
        for (auto& f : futures) f.get();
    }
    return set;
}

// ---------------------------------------------------------------------------
// TransformSet file format (.pxt.json)
// ---------------------------------------------------------------------------

inline constexpr int kTransformSetSchemaVersion = 1;

inline nlohmann::json transform_set_to_json(const TransformSet& set) {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : set.transforms) {
        nlohmann::json jw = nlohmann::json::array();
        for (int r = 0; r < kChannels; ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < kChannels; ++c) row.push_back(t.W(r, c));
            jw.push_back(std::move(row));
        }
        nlohmann::json jb = nlohmann::json::array();
        for (int c = 0; c < kChannels; ++c) jb.push_back(t.b[c]);
        jt.push_back(nlohmann::json{{"physiological_id", t.physiological_id},
                                    {"malperfused_id", t.malperfused_id},
                                    {"final_loss", t.final_loss},
                                    {"W", std::move(jw)},
                                    {"b", std::move(jb)}});
    }
    return nlohmann::json{{"schema_version", kTransformSetSchemaVersion},
                          {"source_species", to_string(set.source_species)},
                          {"transforms", std::move(jt)}};
}

inline void write_transform_set(const std::filesystem::path& path, const TransformSet& set) {
    atomic_write_text(path, transform_set_to_json(set).dump(2) + "\n");
}

inline TransformSet transform_set_from_json(const nlohmann::json& j) {
    TransformSet set;
    try {
        if (j.at("schema_version").get<int>() != kTransformSetSchemaVersion)
            throw config_error("unsupported transform set schema version");
        set.source_species = species_from_string(j.at("source_species").get<std::string>());
        for (const auto& jt : j.at("transforms")) {
            PerfusionTransform t;
            t.source_species = set.source_species;
            t.physiological_id = jt.at("physiological_id").get<std::string>();
            t.malperfused_id = jt.at("malperfused_id").get<std::string>();
            t.final_loss = jt.at("final_loss").get<double>();
            const auto& jw = jt.at("W");
            if (jw.size() != kChannels) throw config_error("transform W must have 100 rows");
            for (int r = 0; r < kChannels; ++r) {
                if (jw[r].size() != kChannels)
                    throw config_error("transform W rows must have 100 entries");
                for (int c = 0; c < kChannels; ++c) t.W(r, c) = jw[r][c].get<double>();
            }
            const auto& jb = jt.at("b");
            if (jb.size() != kChannels) throw config_error("transform b must have 100 entries");
            for (int c = 0; c < kChannels; ++c) t.b[c] = jb[c].get<double>();
            set.transforms.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(std::string("malformed transform set: ") + ex.what());
    }
    return set;
}

inline TransformSet read_transform_set(const std::filesystem::path& path) {
    auto in = pxt::detail::open_in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw config_error("transform set is not valid JSON: " + path.string() + ": " + ex.what());
    }
    return transform_set_from_json(j);
}

} // namespace pxt::xfer
