/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/specan.hpp
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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pxt/common.hpp"
#include "pxt/evalx.hpp"
#include "pxt/hsicore.hpp"
#include "pxt/rng.hpp"

namespace pxt::specan {

// ---------------------------------------------------------------------------
// PCA on median spectra
// ---------------------------------------------------------------------------

struct PcaModel {
    Eigen::VectorXd mean;                      // 100
    Eigen::MatrixXd components;                // k x 100, orthonormal rows
    Eigen::VectorXd explained_variance_ratio;  // k entries, non-increasing

    Eigen::VectorXd project(const Eigen::VectorXd& s) const { return components * (s - mean); }
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& coords) const {
        return mean + components.transpose() * coords;
    }
};

/// PCA via eigendecomposition of the sample covariance of the input rows.
/// Components are the top-k eigenvectors, each signed so its
/// largest-magnitude entry is positive. Throws when k exceeds the numeric
/// rank of the covariance.
inline PcaModel fit_pca(const Eigen::MatrixXd& rows, int k) {
    const Eigen::Index n = rows.rows();
    if (k < 1) throw std::invalid_argument("fit_pca: k must be >= 1");
    if (n < k + 1) throw std::invalid_argument("fit_pca: need at least k+1 spectra");

    PcaModel model;
    model.mean = rows.colwise().mean();
    const Eigen::MatrixXd centered = rows.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw numeric_error("fit_pca: eigensolver failed");
    const Eigen::VectorXd eigenvalues = solver.eigenvalues(); // ascending
    const double total = std::max(eigenvalues.cwiseMax(0.0).sum(), 0.0);
    const double rank_tol = 1e-12 * std::max(eigenvalues.maxCoeff(), 1.0);
    int rank = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
        if (eigenvalues[i] > rank_tol) ++rank;
    if (k > rank)
        throw std::invalid_argument("fit_pca: k exceeds numeric rank " + std::to_string(rank));

    model.components.resize(k, rows.cols());
    model.explained_variance_ratio.resize(k);
    for (int i = 0; i < k; ++i) {
        const Eigen::Index src = eigenvalues.size() - 1 - i; // descending order
        Eigen::VectorXd comp = solver.eigenvectors().col(src);
        int arg = 0;
        for (Eigen::Index c = 1; c < comp.size(); ++c)
            if (std::abs(comp[c]) > std::abs(comp[arg])) arg = static_cast<int>(c);
        if (comp[arg] < 0.0) comp = -comp;
        model.components.row(i) = comp.transpose();
        model.explained_variance_ratio[i] = total > 0.0 ? eigenvalues[src] / total : 0.0;
    }
    return model;
}

// ---------------------------------------------------------------------------
// Nearest-neighbor organ agreement
// ---------------------------------------------------------------------------

struct NnAgreementMatrix {
    Eigen::MatrixXd matrix = Eigen::MatrixXd::Zero(kNumClasses, kNumClasses); // row-normalized
    std::vector<int> row_counts = std::vector<int>(kNumClasses, 0);

    /// Mean of diagonal entries over rows that received queries.
    double mean_diagonal() const {
        double sum = 0.0;
        int n = 0;
        for (int c = 0; c < kNumClasses; ++c) {
            if (row_counts[c] == 0) continue;
            sum += matrix(c, c);
            ++n;
        }
        return n > 0 ? sum / n : 0.0;
    }
};

/// For every query median spectrum, finds the Euclidean nearest neighbor
/// among the neighbor summaries from a different subject and accumulates the
/// (query organ, neighbor organ) pair; rows are normalized to sum to 1.
/// Distance ties break to the lexicographically lowest neighbor image id.
inline NnAgreementMatrix nn_agreement(const std::vector<RegionSummary>& queries,
                                      const std::vector<RegionSummary>& neighbors) {
    if (queries.empty() || neighbors.empty())
        throw std::invalid_argument("nn_agreement: empty summary set");
    NnAgreementMatrix out;
    for (const auto& q : queries) {
        const RegionSummary* best = nullptr;
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& n : neighbors) {
            if (n.subject_id == q.subject_id) continue;
            const double d = (n.median.cast<double>() - q.median.cast<double>()).squaredNorm();
            if (d < best_d || (d == best_d && best && n.image_id < best->image_id)) {
                best_d = d;
                best = &n;
            }
        }
        if (!best)
            throw std::invalid_argument("nn_agreement: no different-subject neighbor for query " +
                                        q.image_id);
        out.matrix(q.organ_class, best->organ_class) += 1.0;
        out.row_counts[q.organ_class] += 1;
    }
    for (int r = 0; r < kNumClasses; ++r)
        if (out.row_counts[r] > 0) out.matrix.row(r) /= static_cast<double>(out.row_counts[r]);
    return out;
}

// ---------------------------------------------------------------------------
// Linear mixed model: value = intercept + species + angle + subject + image
// + residual, with REML variance components
// ---------------------------------------------------------------------------

struct LmmObservation {
    double value = 0.0;
    int species_level = 0; // fixed factor levels; the smallest level is the reference
    int angle_level = 0;
    std::string subject_id;
    std::string image_id; // grouping unit below subject
};

struct LmmOptions {
    double rel_tol = 1e-8;
    int max_iterations = 500;
};

struct LmmFit {
    double sigma_subject_sq = 0.0;
    double sigma_image_sq = 0.0;
    double sigma_residual_sq = 0.0;
    Eigen::VectorXd fixed_effects; // [intercept, species dummies, angle dummies]
    std::vector<std::string> fixed_names;
    bool converged = false;
    int iterations = 0;
    double reml_loglik = 0.0;
    // population variance of the fitted fixed-factor contributions over the
    // observed design
    double species_contribution_var = 0.0;
    double angle_contribution_var = 0.0;
};

namespace detail {

/// Immutable design of one model: fixed-effect matrix and the nested
/// subject/image grouping. Reused across bootstrap refits.
struct LmmDesign {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::vector<std::vector<int>>> groups; // subject -> image -> obs rows
    std::vector<int> species_cols; // columns of x belonging to the species factor
    std::vector<int> angle_cols;
    std::vector<std::string> names;

    Eigen::Index n() const { return x.rows(); }
    Eigen::Index p() const { return x.cols(); }
};

inline LmmDesign build_design(const std::vector<LmmObservation>& obs) {
    if (obs.empty()) throw std::invalid_argument("fit_lmm: no observations");

    std::map<std::string, std::map<std::string, std::vector<int>>> nested;
    std::vector<int> species_levels, angle_levels;
    for (size_t i = 0; i < obs.size(); ++i) {
        nested[obs[i].subject_id][obs[i].image_id].push_back(static_cast<int>(i));
        species_levels.push_back(obs[i].species_level);
        angle_levels.push_back(obs[i].angle_level);
    }
    if (nested.size() < 2)
        throw std::invalid_argument("fit_lmm: degenerate design (single subject)");
    bool some_multi_image = false, some_multi_rep = false;
    for (const auto& [_, images] : nested) {
        if (images.size() >= 2) some_multi_image = true;
        for (const auto& [_, rows] : images)
            if (rows.size() >= 2) some_multi_rep = true;
    }
    if (!some_multi_image)
        throw std::invalid_argument("fit_lmm: no subject has two images");
    if (!some_multi_rep)
        throw std::invalid_argument("fit_lmm: no image has two repetitions");

    std::sort(species_levels.begin(), species_levels.end());
    species_levels.erase(std::unique(species_levels.begin(), species_levels.end()),
                         species_levels.end());
    std::sort(angle_levels.begin(), angle_levels.end());
    angle_levels.erase(std::unique(angle_levels.begin(), angle_levels.end()), angle_levels.end());

    LmmDesign d;
    const int p = 1 + static_cast<int>(species_levels.size() - 1) +
                  static_cast<int>(angle_levels.size() - 1);
    d.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), p);
    d.y.resize(static_cast<Eigen::Index>(obs.size()));
    d.names.push_back("intercept");
    int col = 1;
    for (size_t l = 1; l < species_levels.size(); ++l) {
        d.species_cols.push_back(col++);
        d.names.push_back("species_" + std::to_string(species_levels[l]));
    }
    for (size_t l = 1; l < angle_levels.size(); ++l) {
        d.angle_cols.push_back(col++);
        d.names.push_back("angle_" + std::to_string(angle_levels[l]));
    }
    for (size_t i = 0; i < obs.size(); ++i) {
        d.x(static_cast<Eigen::Index>(i), 0) = 1.0;
        d.y[static_cast<Eigen::Index>(i)] = obs[i].value;
        int c = 1;
        for (size_t l = 1; l < species_levels.size(); ++l, ++c)
            if (obs[i].species_level == species_levels[l]) d.x(static_cast<Eigen::Index>(i), c) = 1.0;
        for (size_t l = 1; l < angle_levels.size(); ++l, ++c)
            if (obs[i].angle_level == angle_levels[l]) d.x(static_cast<Eigen::Index>(i), c) = 1.0;
    }
    for (const auto& [_, images] : nested) {
        std::vector<std::vector<int>> subject_groups;
        for (const auto& [_, rows] : images) subject_groups.push_back(rows);
        d.groups.push_back(std::move(subject_groups));
    }
    return d;
}

/// Profiled REML criterion at variance ratios (rho_subject, rho_image) with
/// the residual variance concentrated out. Exploits the nested structure for
/// an O(n) evaluation. Returns the log-likelihood (up to an additive
/// constant) and, when requested, the profiled estimates.
struct ProfiledReml {
    double loglik = -std::numeric_limits<double>::infinity();
    double sigma_residual_sq = 0.0;
    Eigen::VectorXd beta;
};

inline ProfiledReml reml_at(const LmmDesign& d, double rho_subject, double rho_image,
                            const Eigen::VectorXd& y) {
    const Eigen::Index p = d.p();
    const Eigen::Index n = d.n();
    Eigen::MatrixXd xtv_x = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xtv_y = Eigen::VectorXd::Zero(p);
    double ytv_y = 0.0;
    double logdet_v0 = 0.0;

    Eigen::VectorXd x_colsum(p), x_wsum(p);
    for (const auto& subject : d.groups) {
        x_wsum.setZero();
        double y_wsum = 0.0;
        double s_i = 0.0;
        for (const auto& image : subject) {
            const double m = static_cast<double>(image.size());
            const double denom = 1.0 + m * rho_image;
            const double c = rho_image / denom;
            logdet_v0 += std::log(denom);

            x_colsum.setZero();
            double y_sum = 0.0, y_sq = 0.0;
            for (int row : image) {
                const auto xr = d.x.row(row);
                xtv_x.noalias() += xr.transpose() * xr;
                xtv_y.noalias() += xr.transpose() * y[row];
                y_sq += y[row] * y[row];
                x_colsum += xr.transpose();
                y_sum += y[row];
            }
            xtv_x.noalias() -= c * (x_colsum * x_colsum.transpose());
            xtv_y.noalias() -= c * x_colsum * y_sum;
            ytv_y += y_sq - c * y_sum * y_sum;

            const double din = 1.0 / denom;
            x_wsum += din * x_colsum;
            y_wsum += din * y_sum;
            s_i += m * din;
        }
        const double f = rho_subject / (1.0 + rho_subject * s_i);
        logdet_v0 += std::log(1.0 + rho_subject * s_i);
        xtv_x.noalias() -= f * (x_wsum * x_wsum.transpose());
        xtv_y.noalias() -= f * x_wsum * y_wsum;
        ytv_y -= f * y_wsum * y_wsum;
    }

    ProfiledReml out;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtv_x);
    if (ldlt.info() != Eigen::Success) return out;
    out.beta = ldlt.solve(xtv_y);
    const double y_p_y = ytv_y - xtv_y.dot(out.beta);
    if (!(y_p_y > 0.0)) return out;
    const double dof = static_cast<double>(n - p);
    out.sigma_residual_sq = y_p_y / dof;

    double logdet_a = 0.0;
    const auto& diag = ldlt.vectorD();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (diag[i] <= 0.0) return out;
        logdet_a += std::log(diag[i]);
    }
    out.loglik = -0.5 * (logdet_v0 + logdet_a + dof * std::log(out.sigma_residual_sq) + dof);
    return out;
}

} // namespace detail

/// REML fit of the nested mixed model via Nelder-Mead over the two variance
/// ratios (parametrized as squares so the zero boundary is reachable), with
/// the residual variance profiled out in closed form. The best criterion
/// value is non-decreasing over accepted iterations by construction.
inline LmmFit fit_lmm_design(const detail::LmmDesign& d, const Eigen::VectorXd& y,
                             const LmmOptions& opt = {}) {
    auto eval = [&](const Eigen::Vector2d& x) {
        return detail::reml_at(d, x[0] * x[0], x[1] * x[1], y).loglik;
    };

    // Nelder-Mead on the sqrt-ratio plane
    std::array<Eigen::Vector2d, 3> simplex = {Eigen::Vector2d(0.7, 0.7), Eigen::Vector2d(1.7, 0.8),
                                              Eigen::Vector2d(0.8, 1.7)};
    std::array<double, 3> value{};
    for (int i = 0; i < 3; ++i) value[i] = eval(simplex[i]);

    int iterations = 0;
    bool converged = false;
    for (; iterations < opt.max_iterations; ++iterations) {
        std::array<int, 3> order{0, 1, 2};
        std::sort(order.begin(), order.end(), [&](int a, int b) { return value[a] > value[b]; });
        const int best = order[0], mid = order[1], worst = order[2];

        const double spread = std::abs(value[best] - value[worst]);
        if (spread < opt.rel_tol * (std::abs(value[best]) + 1.0)) {
            converged = true;
            break;
        }

        const Eigen::Vector2d centroid = 0.5 * (simplex[best] + simplex[mid]);
        const Eigen::Vector2d reflected = centroid + (centroid - simplex[worst]);
        const double f_reflected = eval(reflected);
        if (f_reflected > value[best]) {
            const Eigen::Vector2d expanded = centroid + 2.0 * (centroid - simplex[worst]);
            const double f_expanded = eval(expanded);
            if (f_expanded > f_reflected) {
                simplex[worst] = expanded;
                value[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                value[worst] = f_reflected;
            }
        } else if (f_reflected > value[mid]) {
            simplex[worst] = reflected;
            value[worst] = f_reflected;
        } else {
            // contract; on failure shrink (step-halving) toward the best point
            const Eigen::Vector2d contracted = centroid + 0.5 * (simplex[worst] - centroid);
            const double f_contracted = eval(contracted);
            if (f_contracted > value[worst]) {
                simplex[worst] = contracted;
                value[worst] = f_contracted;
            } else {
                for (int i : {mid, worst}) {
                    simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
                    value[i] = eval(simplex[i]);
                }
            }
        }
    }

    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (value[i] > value[best]) best = i;
    const double rho_subject = simplex[best][0] * simplex[best][0];
    const double rho_image = simplex[best][1] * simplex[best][1];
    const auto profile = detail::reml_at(d, rho_subject, rho_image, y);
    if (!std::isfinite(profile.loglik)) throw numeric_error("fit_lmm: REML evaluation failed");

    LmmFit fit;
    fit.sigma_residual_sq = profile.sigma_residual_sq;
    fit.sigma_subject_sq = rho_subject * profile.sigma_residual_sq;
    fit.sigma_image_sq = rho_image * profile.sigma_residual_sq;
    fit.fixed_effects = profile.beta;
    fit.fixed_names = d.names;
    fit.converged = converged;
    fit.iterations = iterations;
    fit.reml_loglik = profile.loglik;

    auto contribution_var = [&](const std::vector<int>& cols) {
        if (cols.empty()) return 0.0;
        Eigen::VectorXd contrib = Eigen::VectorXd::Zero(d.n());
        for (int c : cols) contrib += d.x.col(c) * profile.beta[c];
        const double mean = contrib.mean();
        return (contrib.array() - mean).square().mean();
    };
    fit.species_contribution_var = contribution_var(d.species_cols);
    fit.angle_contribution_var = contribution_var(d.angle_cols);
    return fit;
}

inline LmmFit fit_lmm(const std::vector<LmmObservation>& obs, const LmmOptions& opt = {}) {
    const detail::LmmDesign d = detail::build_design(obs);
    return fit_lmm_design(d, d.y, opt);
}

// ---------------------------------------------------------------------------
// Variance proportions and parametric bootstrap
// ---------------------------------------------------------------------------

/// Shares of observed variance attributed to the five factors; sums to 1.
struct VarianceProportions {
    double species = 0.0;
    double angle = 0.0;
    double subject = 0.0;
    double image = 0.0;
    double residual = 0.0;

    double total() const { return species + angle + subject + image + residual; }
};

/// Empirical decomposition: fixed factors contribute the population variance
/// of their fitted contributions over the observed design, random factors
/// their variance components; all five shares normalized to sum to 1.
inline VarianceProportions variance_proportions(const LmmFit& fit) {
    VarianceProportions p;
    p.species = fit.species_contribution_var;
    p.angle = fit.angle_contribution_var;
    p.subject = fit.sigma_subject_sq;
    p.image = fit.sigma_image_sq;
    p.residual = fit.sigma_residual_sq;
    const double total = p.total();
    if (total <= 0.0) throw numeric_error("variance_proportions: total variance is zero");
    p.species /= total;
    p.angle /= total;
    p.subject /= total;
    p.image /= total;
    p.residual /= total;
    return p;
}

struct ProportionCis {
    evalx::Ci species, angle, subject, image, residual;
    int n_dropped = 0; // non-converged replicates
    bool degraded = false; // more than 20% of replicates dropped
};

/// Percentile CIs of the variance proportions from a parametric bootstrap:
/// datasets are simulated from the fitted model on the original design and
/// refitted. Non-converged replicates are dropped and counted; more than 20%
/// dropped sets `degraded` (an error in strict mode).
inline ProportionCis parametric_bootstrap_ci(const std::vector<LmmObservation>& obs,
                                             const LmmFit& fit, int n_boot = 500,
                                             double level = 0.95, std::uint64_t seed = 1,
                                             bool strict = false, const LmmOptions& opt = {}) {
    if (!fit.converged) throw std::invalid_argument("parametric_bootstrap_ci: fit not converged");
    const detail::LmmDesign d = detail::build_design(obs);
    const Eigen::VectorXd fixed_part = d.x * fit.fixed_effects;
    const double sd_subject = std::sqrt(std::max(fit.sigma_subject_sq, 0.0));
    const double sd_image = std::sqrt(std::max(fit.sigma_image_sq, 0.0));
    const double sd_resid = std::sqrt(std::max(fit.sigma_residual_sq, 0.0));

    std::vector<double> species, angle, subject, image, residual;
    int dropped = 0;
    for (int b = 0; b < n_boot; ++b) {
        Rng rng(mix_seed(seed, 61, static_cast<std::uint64_t>(b)));
        Eigen::VectorXd y = fixed_part;
        for (const auto& subject_groups : d.groups) {
            const double delta = sd_subject * rng.normal();
            for (const auto& image_rows : subject_groups) {
                const double gamma = sd_image * rng.normal();
                for (int row : image_rows) y[row] += delta + gamma + sd_resid * rng.normal();
            }
        }
        try {
            const LmmFit refit = fit_lmm_design(d, y, opt);
            if (!refit.converged) {
                ++dropped;
                continue;
            }
            const VarianceProportions p = variance_proportions(refit);
            species.push_back(p.species);
            angle.push_back(p.angle);
            subject.push_back(p.subject);
            image.push_back(p.image);
            residual.push_back(p.residual);
        } catch (const std::exception&) {
            ++dropped;
        }
    }

    ProportionCis out;
    out.n_dropped = dropped;
    out.degraded = dropped > n_boot / 5;
    if (out.degraded && strict)
        throw numeric_error("parametric bootstrap: more than 20% of replicates failed");
    if (species.empty()) throw numeric_error("parametric bootstrap: all replicates failed");
    out.species = evalx::ci_from_samples(species, level);
    out.angle = evalx::ci_from_samples(angle, level);
    out.subject = evalx::ci_from_samples(subject, level);
    out.image = evalx::ci_from_samples(image, level);
    out.residual = evalx::ci_from_samples(residual, level);
    return out;
}

// ---------------------------------------------------------------------------
// From datasets to LMM observations
// ---------------------------------------------------------------------------

/// Organ-region median summary of one replicate image, with the factor levels
/// used by the mixed model.
struct RegionObservation {
    Spectrum median = Spectrum::Zero();
    int species_level = 0;
    int angle_level = 0;
    std::string subject_id;
    std::string group_id; // image unit: replicates of one (base image, angle)
};

/// All LMM inputs for one organ across a manifest; one entry per image that
/// contains the organ.
template <typename LoadPairFn>
inline std::vector<RegionObservation> collect_region_observations(const DatasetIndex& index,
                                                                  LoadPairFn&& load, int organ) {
    std::vector<RegionObservation> out;
    for (const auto& e : index.entries) {
        const auto [cube, mask] = load(e);
        bool present = false;
        for (std::uint8_t label : mask.labels)
            if (label == organ) {
                present = true;
                break;
            }
        if (!present) continue;
        RegionObservation ro;
        ro.median = region_median_spectrum(cube, mask, organ, e.subject_id, e.image_id).median;
        ro.species_level = static_cast<int>(e.species);
        ro.angle_level = e.angle ? static_cast<int>(*e.angle) : 0;
        ro.subject_id = e.subject_id;
        ro.group_id = replicate_group_of(e.image_id);
        out.push_back(std::move(ro));
    }
    return out;
}

/// Slices region observations at one wavelength channel.
inline std::vector<LmmObservation> lmm_observations_at(const std::vector<RegionObservation>& rows,
                                                       int channel) {
    std::vector<LmmObservation> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        LmmObservation o;
        o.value = r.median[channel];
        o.species_level = r.species_level;
        o.angle_level = r.angle_level;
        o.subject_id = r.subject_id;
        o.image_id = r.group_id;
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace pxt::specan
