/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/evalx.hpp
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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pxt/common.hpp"
#include "pxt/hsicore.hpp"
#include "pxt/hsicore_io.hpp"
#include "pxt/rng.hpp"

namespace pxt::evalx {

// ---------------------------------------------------------------------------
// Segmentation metrics
// ---------------------------------------------------------------------------

/// Dice similarity coefficient 2|P.R| / (|P| + |R|) for one class. Pixels
/// whose reference label is IGNORE are excluded. When the class is absent
/// from both masks the score is 1.0 by convention; absent from exactly one,
/// the formula yields 0.0.
inline double dsc(const SegmentationMask& pred, const SegmentationMask& ref, int organ_class) {
    if (pred.width != ref.width || pred.height != ref.height)
        throw std::invalid_argument("dsc: mask dimensions do not match");
    long inter = 0, p_count = 0, r_count = 0;
    for (int i = 0; i < ref.pixel_count(); ++i) {
        if (ref.labels[i] == kIgnoreLabel) continue;
        const bool in_p = pred.labels[i] == organ_class;
        const bool in_r = ref.labels[i] == organ_class;
        inter += in_p && in_r;
        p_count += in_p;
        r_count += in_r;
    }
    if (p_count + r_count == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p_count + r_count);
}

namespace detail {

/// Boundary pixels of a class under 4-connectivity: class pixels adjacent to
/// any non-class pixel or to the canvas edge. Pixels with a reference IGNORE
/// label are treated as non-class on both sides.
inline std::vector<std::pair<int, int>> class_boundary(const SegmentationMask& mask,
                                                       const SegmentationMask& ref,
                                                       int organ_class) {
    auto member = [&](int x, int y) {
        const int i = y * mask.width + x;
        return ref.labels[i] != kIgnoreLabel && mask.labels[i] == organ_class;
    };
    std::vector<std::pair<int, int>> boundary;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!member(x, y)) continue;
            const bool edge = x == 0 || y == 0 || x == mask.width - 1 || y == mask.height - 1;
            if (edge || !member(x - 1, y) || !member(x + 1, y) || !member(x, y - 1) ||
                !member(x, y + 1)) {
                boundary.emplace_back(x, y);
            }
        }
    }
    return boundary;
}

inline long min_sq_dist(const std::pair<int, int>& p,
                        const std::vector<std::pair<int, int>>& points) {
    long best = std::numeric_limits<long>::max();
    for (const auto& [x, y] : points) {
        const long dx = p.first - x, dy = p.second - y;
        best = std::min(best, dx * dx + dy * dy);
    }
    return best;
}

} // namespace detail

/// Normalized surface distance: the fraction of boundary pixels of each mask
/// lying within Euclidean distance tau of the other mask's boundary,
/// combined over both boundaries. Refuses polygon-annotated references since
/// their outlines do not follow organ boundaries.
inline double nsd(const SegmentationMask& pred, const SegmentationMask& ref, int organ_class,
                  double tau, Annotation ref_annotation = Annotation::Semantic) {
    if (ref_annotation == Annotation::Polygon)
        throw std::invalid_argument("nsd: refusing polygon-annotated reference");
    if (pred.width != ref.width || pred.height != ref.height)
        throw std::invalid_argument("nsd: mask dimensions do not match");
    const auto bp = detail::class_boundary(pred, ref, organ_class);
    const auto br = detail::class_boundary(ref, ref, organ_class);
    if (bp.empty() && br.empty()) return 1.0;
    if (bp.empty() || br.empty()) return 0.0;
    const double tau_sq = tau * tau;
    long hits = 0;
    for (const auto& p : bp) hits += static_cast<double>(detail::min_sq_dist(p, br)) <= tau_sq;
    for (const auto& r : br) hits += static_cast<double>(detail::min_sq_dist(r, bp)) <= tau_sq;
    return static_cast<double>(hits) / static_cast<double>(bp.size() + br.size());
}

/// Per-class NSD tolerances; default tau for classes not listed.
struct NsdThresholds {
    double default_tau = 2.0;
    std::map<int, double> per_class;

    double tau(int organ_class) const {
        const auto it = per_class.find(organ_class);
        return it == per_class.end() ? default_tau : it->second;
    }
};

inline NsdThresholds nsd_thresholds_from_json(const nlohmann::json& j) {
    NsdThresholds t;
    try {
        t.default_tau = j.value("default_tau", t.default_tau);
        if (j.contains("per_class")) {
            for (const auto& [key, value] : j["per_class"].items()) {
                nlohmann::json k = key;
                if (!key.empty() && key.find_first_not_of("0123456789") == std::string::npos)
                    k = std::stoi(key);
                t.per_class[organ_class_from_json(k)] = value.get<double>();
            }
        }
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(std::string("malformed NSD thresholds: ") + ex.what());
    }
    return t;
}

// ---------------------------------------------------------------------------
// Hierarchical aggregation
// ---------------------------------------------------------------------------

enum class AggregationMode { Mean, Median };

struct ImageScore {
    std::string image_id;
    int organ_class = 0;
    double value = 0.0;
};

struct HierarchicalResult {
    // class -> subject -> aggregate over that subject's images
    std::map<int, std::map<std::string, double>> subject_scores;
    std::map<int, double> class_scores; // aggregate over subjects
    double overall = 0.0;               // aggregate over classes
};

namespace detail {

inline double aggregate(std::vector<double> values, AggregationMode mode) {
    if (values.empty()) throw std::invalid_argument("aggregate: empty value list");
    if (mode == AggregationMode::Mean) {
        double sum = 0.0;
        for (double v : values) sum += v;
        return sum / static_cast<double>(values.size());
    }
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace detail

/// Aggregates per-(image, class) scores strictly bottom-up: over a subject's
/// images first, then over subjects per class, then over classes.
inline HierarchicalResult hierarchical_aggregate(const std::vector<ImageScore>& scores,
                                                 const DatasetIndex& index,
                                                 AggregationMode mode = AggregationMode::Mean) {
    std::map<std::string, std::string> subject_of;
    for (const auto& e : index.entries) subject_of[e.image_id] = e.subject_id;

    std::map<int, std::map<std::string, std::vector<double>>> grouped;
    for (const auto& s : scores) {
        const auto it = subject_of.find(s.image_id);
        if (it == subject_of.end())
            throw std::invalid_argument("hierarchical_aggregate: unknown image id " + s.image_id);
        grouped[s.organ_class][it->second].push_back(s.value);
    }
    if (grouped.empty()) throw std::invalid_argument("hierarchical_aggregate: no scores");

    HierarchicalResult out;
    std::vector<double> class_values;
    for (const auto& [cls, by_subject] : grouped) {
        std::vector<double> subject_values;
        for (const auto& [subject, values] : by_subject) {
            const double v = detail::aggregate(values, mode);
            out.subject_scores[cls][subject] = v;
            subject_values.push_back(v);
        }
        const double cv = detail::aggregate(subject_values, mode);
        out.class_scores[cls] = cv;
        class_values.push_back(cv);
    }
    out.overall = detail::aggregate(class_values, mode);
    return out;
}

// ---------------------------------------------------------------------------
// Subject-level bootstrap
// ---------------------------------------------------------------------------

struct Ci {
    double lo = 0.0;
    double hi = 0.0;
};

namespace detail {

/// Percentile of sorted samples with linear interpolation.
inline double percentile(const std::vector<double>& sorted, double p) {
    const size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace detail

/// Bootstrap means of subject-level scores: `n_boot` resamples with
/// replacement, mean per resample.
inline std::vector<double> bootstrap_means(const std::vector<double>& subject_scores, int n_boot,
                                           Rng& rng) {
    if (subject_scores.empty()) throw std::invalid_argument("bootstrap: no subject scores");
    std::vector<double> means(n_boot);
    for (int b = 0; b < n_boot; ++b) {
        double sum = 0.0;
        for (size_t i = 0; i < subject_scores.size(); ++i)
            sum += subject_scores[rng.uniform_int(subject_scores.size())];
        means[b] = sum / static_cast<double>(subject_scores.size());
    }
    return means;
}

inline Ci ci_from_samples(std::vector<double> samples, double level) {
    if (samples.empty()) throw std::invalid_argument("ci_from_samples: empty");
    std::sort(samples.begin(), samples.end());
    const double alpha = 1.0 - level;
    return {detail::percentile(samples, alpha / 2.0), detail::percentile(samples, 1.0 - alpha / 2.0)};
}

/// Percentile confidence interval of the mean subject-level score.
inline Ci bootstrap_ci(const std::vector<double>& subject_scores, int n_boot, double level,
                       Rng& rng) {
    return ci_from_samples(bootstrap_means(subject_scores, n_boot, rng), level);
}

// ---------------------------------------------------------------------------
// Nested cross-validation folds with iterative stratification
// ---------------------------------------------------------------------------

using LabelMultiset = std::map<int, int>; // class -> count across the subject's images

struct SubjectLabels {
    std::string subject_id;
    LabelMultiset labels;
};

struct InnerFold {
    std::vector<std::string> val_subjects;
};

struct OuterFold {
    std::vector<std::string> test_subjects;
    std::vector<InnerFold> inner;
};

struct FoldPlan {
    int n_outer = 0;
    int n_inner = 0;
    std::vector<OuterFold> outer;

    std::vector<std::string> outer_train_subjects(int fold,
                                                  const std::vector<std::string>& all) const {
        std::set<std::string> test(outer[fold].test_subjects.begin(),
                                   outer[fold].test_subjects.end());
        std::vector<std::string> train;
        for (const auto& s : all)
            if (!test.count(s)) train.push_back(s);
        return train;
    }
};

namespace detail {

/// One level of iterative stratification: partitions subjects into k folds,
/// repeatedly assigning a subject carrying the rarest remaining label to the
/// fold with the greatest remaining demand for that label (ties: lowest fold
/// fill level, then seeded random).
inline std::vector<std::vector<std::string>> stratified_partition(
    std::vector<SubjectLabels> subjects, int k, Rng& rng) {
    if (static_cast<int>(subjects.size()) < k)
        throw std::invalid_argument("fewer subjects than folds");
    std::sort(subjects.begin(), subjects.end(),
              [](const SubjectLabels& a, const SubjectLabels& b) {
                  return a.subject_id < b.subject_id;
              });

    std::map<int, double> remaining; // label -> remaining count
    for (const auto& s : subjects)
        for (const auto& [label, count] : s.labels) remaining[label] += count;
    std::vector<std::map<int, double>> demand(k);
    for (int f = 0; f < k; ++f)
        for (const auto& [label, count] : remaining) demand[f][label] = count / k;

    std::vector<std::vector<std::string>> folds(k);
    std::vector<bool> used(subjects.size(), false);
    size_t n_left = subjects.size();

    auto pick_fold = [&](const std::vector<int>& candidates) {
        // among candidate folds, prefer the least filled, random among ties
        size_t best_fill = std::numeric_limits<size_t>::max();
        std::vector<int> tied;
        for (int f : candidates) {
            if (folds[f].size() < best_fill) {
                best_fill = folds[f].size();
                tied = {f};
            } else if (folds[f].size() == best_fill) {
                tied.push_back(f);
            }
        }
        return tied[rng.uniform_int(tied.size())];
    };

    while (n_left > 0) {
        // rarest label still outstanding (ties: lowest label id)
        int rare_label = -1;
        double rare_count = std::numeric_limits<double>::infinity();
        for (const auto& [label, count] : remaining) {
            if (count > 0.0 && count < rare_count) {
                rare_count = count;
                rare_label = label;
            }
        }

        size_t chosen = subjects.size();
        if (rare_label >= 0) {
            for (size_t i = 0; i < subjects.size(); ++i) {
                if (!used[i] && subjects[i].labels.count(rare_label)) {
                    chosen = i;
                    break;
                }
            }
        }
        if (chosen == subjects.size()) {
            // no outstanding labels (or none carried by unassigned subjects):
            // fall back to pure size balancing
            for (size_t i = 0; i < subjects.size(); ++i) {
                if (!used[i]) {
                    chosen = i;
                    break;
                }
            }
            std::vector<int> all(k);
            for (int f = 0; f < k; ++f) all[f] = f;
            const int fold = pick_fold(all);
            folds[fold].push_back(subjects[chosen].subject_id);
            for (const auto& [label, count] : subjects[chosen].labels) {
                demand[fold][label] -= count;
                remaining[label] -= count;
            }
            used[chosen] = true;
            --n_left;
            continue;
        }

        // fold with greatest demand for the rare label
        double best_demand = -std::numeric_limits<double>::infinity();
        std::vector<int> candidates;
        for (int f = 0; f < k; ++f) {
            const double d = demand[f][rare_label];
            if (d > best_demand + 1e-12) {
                best_demand = d;
                candidates = {f};
            } else if (d > best_demand - 1e-12) {
                candidates.push_back(f);
            }
        }
        const int fold = pick_fold(candidates);
        folds[fold].push_back(subjects[chosen].subject_id);
        for (const auto& [label, count] : subjects[chosen].labels) {
            demand[fold][label] -= count;
            remaining[label] -= count;
        }
        used[chosen] = true;
        --n_left;
    }

    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

} // namespace detail

/// Nested cross-validation plan: `outer` subject-level test folds, each
/// outer-training set partitioned into `inner` validation folds, both via
/// iterative stratification on the subjects' label multisets.
inline FoldPlan nested_folds(const std::vector<SubjectLabels>& subjects, int n_outer, int n_inner,
                             std::uint64_t seed) {
    if (n_outer < 2 || n_inner < 2) throw config_error("fold counts must be >= 2");
    if (static_cast<int>(subjects.size()) < n_outer)
        throw std::invalid_argument("fewer subjects than outer folds");

    FoldPlan plan;
    plan.n_outer = n_outer;
    plan.n_inner = n_inner;

    Rng outer_rng(mix_seed(seed, 31));
    const auto outer_parts = detail::stratified_partition(subjects, n_outer, outer_rng);

    std::map<std::string, const SubjectLabels*> by_id;
    for (const auto& s : subjects) by_id[s.subject_id] = &s;

    for (int f = 0; f < n_outer; ++f) {
        OuterFold fold;
        fold.test_subjects = outer_parts[f];
        std::set<std::string> test(fold.test_subjects.begin(), fold.test_subjects.end());
        std::vector<SubjectLabels> train_subjects;
        for (const auto& s : subjects)
            if (!test.count(s.subject_id)) train_subjects.push_back(s);
        if (static_cast<int>(train_subjects.size()) < n_inner)
            throw std::invalid_argument("fewer training subjects than inner folds");
        Rng inner_rng(mix_seed(seed, 32, static_cast<std::uint64_t>(f)));
        const auto inner_parts = detail::stratified_partition(train_subjects, n_inner, inner_rng);
        for (int g = 0; g < n_inner; ++g) fold.inner.push_back(InnerFold{inner_parts[g]});
        plan.outer.push_back(std::move(fold));
    }
    return plan;
}

/// Label multisets from a manifest: each image contributes the set of classes
/// present in its mask to its subject's multiset.
inline std::vector<SubjectLabels> subject_label_multisets(
    const DatasetIndex& index,
    const std::function<SegmentationMask(const DatasetEntry&)>& load_mask) {
    std::map<std::string, LabelMultiset> acc;
    for (const auto& e : index.entries) {
        const SegmentationMask mask = load_mask(e);
        std::set<int> present;
        for (std::uint8_t label : mask.labels)
            if (label != kIgnoreLabel) present.insert(label);
        for (int cls : present) acc[e.subject_id][cls] += 1;
    }
    std::vector<SubjectLabels> out;
    for (auto& [subject, labels] : acc) out.push_back({subject, std::move(labels)});
    return out;
}

inline nlohmann::json fold_plan_to_json(const FoldPlan& plan) {
    nlohmann::json jo = nlohmann::json::array();
    for (const auto& fold : plan.outer) {
        nlohmann::json ji = nlohmann::json::array();
        for (const auto& inner : fold.inner) ji.push_back({{"val_subjects", inner.val_subjects}});
        jo.push_back({{"test_subjects", fold.test_subjects}, {"inner", std::move(ji)}});
    }
    return nlohmann::json{
        {"n_outer", plan.n_outer}, {"n_inner", plan.n_inner}, {"outer", std::move(jo)}};
}

inline FoldPlan fold_plan_from_json(const nlohmann::json& j) {
    FoldPlan plan;
    try {
        plan.n_outer = j.at("n_outer").get<int>();
        plan.n_inner = j.at("n_inner").get<int>();
        for (const auto& jf : j.at("outer")) {
            OuterFold fold;
            fold.test_subjects = jf.at("test_subjects").get<std::vector<std::string>>();
            for (const auto& ji : jf.at("inner"))
                fold.inner.push_back(InnerFold{ji.at("val_subjects").get<std::vector<std::string>>()});
            plan.outer.push_back(std::move(fold));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(std::string("malformed fold plan: ") + ex.what());
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Metric report
// ---------------------------------------------------------------------------

struct MetricReport {
    struct ImageRow {
        std::string image_id;
        std::string subject_id;
        int organ_class = 0;
        double dsc = 0.0;
        std::optional<double> nsd;
    };
    struct Aggregate {
        double score = 0.0;
        Ci ci;
        int n_subjects = 0;
    };
    std::vector<ImageRow> rows;
    std::map<int, Aggregate> dsc_per_class;
    Aggregate dsc_overall;
    std::map<int, Aggregate> nsd_per_class; // empty when NSD was not computed
    Aggregate nsd_overall;
    bool has_nsd = false;
    // NSD thresholds are placeholders unless configured per class; surfaced
    // in exports so reports are not mistaken for device-calibrated values.
    double nsd_default_tau = 2.0;
};

namespace detail {

struct AggregateOutcome {
    std::map<int, MetricReport::Aggregate> per_class;
    MetricReport::Aggregate overall;
};

inline AggregateOutcome aggregate_metric(const std::vector<ImageScore>& scores,
                                         const DatasetIndex& index, int n_boot, double level,
                                         std::uint64_t seed, AggregationMode mode) {
    const HierarchicalResult agg = hierarchical_aggregate(scores, index, mode);
    AggregateOutcome out;
    std::vector<std::vector<double>> class_samples;
    for (const auto& [cls, by_subject] : agg.subject_scores) {
        std::vector<double> subject_values;
        for (const auto& [_, v] : by_subject) subject_values.push_back(v);
        Rng rng(mix_seed(seed, 41, static_cast<std::uint64_t>(cls)));
        std::vector<double> samples = bootstrap_means(subject_values, n_boot, rng);
        MetricReport::Aggregate a;
        a.score = agg.class_scores.at(cls);
        a.ci = ci_from_samples(samples, level);
        a.n_subjects = static_cast<int>(subject_values.size());
        out.per_class[cls] = a;
        class_samples.push_back(std::move(samples));
    }
    // overall: combine the per-class bootstrap samples element-wise
    std::vector<double> overall_samples(n_boot, 0.0);
    for (const auto& samples : class_samples)
        for (int b = 0; b < n_boot; ++b) overall_samples[b] += samples[b];
    for (double& v : overall_samples) v /= static_cast<double>(class_samples.size());
    out.overall.score = agg.overall;
    out.overall.ci = ci_from_samples(overall_samples, level);
    out.overall.n_subjects = 0;
    for (const auto& [_, a] : out.per_class)
        out.overall.n_subjects = std::max(out.overall.n_subjects, a.n_subjects);
    return out;
}

} // namespace detail

/// Assembles the full metric report from per-image rows: hierarchical
/// aggregation plus subject-bootstrap confidence intervals per class and
/// overall, for DSC and (when any row carries one) NSD.
inline MetricReport build_metric_report(std::vector<MetricReport::ImageRow> rows,
                                        const DatasetIndex& index, int n_boot = 1000,
                                        double level = 0.95, std::uint64_t seed = 1,
                                        AggregationMode mode = AggregationMode::Mean) {
    MetricReport report;
    report.rows = std::move(rows);

    std::vector<ImageScore> dsc_scores, nsd_scores;
    for (const auto& r : report.rows) {
        dsc_scores.push_back({r.image_id, r.organ_class, r.dsc});
        if (r.nsd) nsd_scores.push_back({r.image_id, r.organ_class, *r.nsd});
    }
    auto d = detail::aggregate_metric(dsc_scores, index, n_boot, level, mix_seed(seed, 1), mode);
    report.dsc_per_class = std::move(d.per_class);
    report.dsc_overall = d.overall;
    if (!nsd_scores.empty()) {
        auto n = detail::aggregate_metric(nsd_scores, index, n_boot, level, mix_seed(seed, 2), mode);
        report.nsd_per_class = std::move(n.per_class);
        report.nsd_overall = n.overall;
        report.has_nsd = true;
    }
    return report;
}

inline nlohmann::json metric_report_to_json(const MetricReport& report) {
    nlohmann::json per_image = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json j{{"image_id", r.image_id},
                         {"subject_id", r.subject_id},
                         {"organ_class", r.organ_class},
                         {"organ", organ_name(r.organ_class)},
                         {"dsc", r.dsc}};
        if (r.nsd) j["nsd"] = *r.nsd;
        per_image.push_back(std::move(j));
    }
    auto agg_json = [](const std::map<int, MetricReport::Aggregate>& per_class,
                       const MetricReport::Aggregate& overall) {
        nlohmann::json classes = nlohmann::json::array();
        for (const auto& [cls, a] : per_class) {
            classes.push_back({{"organ_class", cls},
                               {"organ", organ_name(cls)},
                               {"score", a.score},
                               {"ci_lo", a.ci.lo},
                               {"ci_hi", a.ci.hi},
                               {"n_subjects", a.n_subjects}});
        }
        return nlohmann::json{{"classes", std::move(classes)},
                              {"overall",
                               {{"score", overall.score},
                                {"ci_lo", overall.ci.lo},
                                {"ci_hi", overall.ci.hi}}}};
    };
    nlohmann::json j{{"per_image", std::move(per_image)},
                     {"dsc", agg_json(report.dsc_per_class, report.dsc_overall)}};
    if (report.has_nsd) {
        j["nsd"] = agg_json(report.nsd_per_class, report.nsd_overall);
        j["nsd"]["note"] = "placeholder thresholds (default tau = " +
                           format_double(report.nsd_default_tau) + " px) unless configured";
    }
    return j;
}

/// One CSV row per class and aggregate level, with CI bounds.
inline std::string metric_report_to_csv(const MetricReport& report) {
    std::string csv = "metric,level,organ,score,ci_lo,ci_hi,n_subjects\n";
    auto emit = [&](const char* metric, const std::map<int, MetricReport::Aggregate>& per_class,
                    const MetricReport::Aggregate& overall) {
        for (const auto& [cls, a] : per_class) {
            csv += std::string(metric) + ",class," + organ_name(cls) + "," +
                   format_double(a.score) + "," + format_double(a.ci.lo) + "," +
                   format_double(a.ci.hi) + "," + std::to_string(a.n_subjects) + "\n";
        }
        csv += std::string(metric) + ",overall,all," + format_double(overall.score) + "," +
               format_double(overall.ci.lo) + "," + format_double(overall.ci.hi) + "," +
               std::to_string(overall.n_subjects) + "\n";
    };
    emit("dsc", report.dsc_per_class, report.dsc_overall);
    if (report.has_nsd) emit("nsd", report.nsd_per_class, report.nsd_overall);
    return csv;
}

} // namespace pxt::evalx
