/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: tools/pxt.cpp
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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pxt/augment.hpp"
#include "pxt/common.hpp"
#include "pxt/evalx.hpp"
#include "pxt/hsicore.hpp"
#include "pxt/hsicore_io.hpp"
#include "pxt/model.hpp"
#include "pxt/specan.hpp"
#include "pxt/synthgen.hpp"
#include "pxt/xfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw pxt::io_error("cannot open: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& ex) {
        throw pxt::config_error("not valid JSON: " + path.string() + ": " + ex.what());
    }
    return j;
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Collects everything a command needs to report reproducibility metadata.
struct RunContext {
    std::string command;
    json config = json::object(); // all effective configuration, hashed for the manifest
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void write_manifest(const fs::path& path) {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const json manifest{{"command", command},
                            {"config_hash", hex64(fnv1a64(config.dump()))},
                            {"seed", seed},
                            {"inputs", inputs},
                            {"outputs", outputs},
                            {"tool_version", pxt::kToolVersion},
                            {"wall_clock_seconds", wall}};
        pxt::atomic_write_text(path, manifest.dump(2) + "\n");
    }
};

/// All cubes and masks of a manifest resolved into memory.
struct LoadedDataset {
    pxt::DatasetIndex index;
    std::vector<pxt::SpectralCube> cubes;
    std::vector<pxt::SegmentationMask> masks;
    std::map<std::string, size_t> by_id;

    const pxt::SpectralCube& cube_of(const std::string& image_id) const {
        return cubes[by_id.at(image_id)];
    }
    const pxt::SegmentationMask& mask_of(const std::string& image_id) const {
        return masks[by_id.at(image_id)];
    }
};

LoadedDataset load_dataset(const fs::path& manifest_path) {
    LoadedDataset ds;
    ds.index = pxt::read_manifest(manifest_path);
    const fs::path base = manifest_path.parent_path();
    std::map<std::string, pxt::SegmentationMask> mask_cache;
    for (const auto& e : ds.index.entries) {
        auto [cube, mask] = pxt::load_pair(e, base);
        ds.by_id[e.image_id] = ds.cubes.size();
        ds.cubes.push_back(std::move(cube));
        ds.masks.push_back(std::move(mask));
    }
    return ds;
}

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Deterministic parallel map over [0, n): results land in index order.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::future<void>> futures;
    for (int w = 0; w < threads; ++w) {
        futures.push_back(std::async(std::launch::async, [&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        }));
    }
    for (auto& f : futures) f.get();
}

std::vector<int> classes_present(const pxt::SegmentationMask& mask) {
    std::set<int> present;
    for (std::uint8_t label : mask.labels)
        if (label != pxt::kIgnoreLabel) present.insert(label);
    return {present.begin(), present.end()};
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string spec_path;
    std::string out_dir;
    std::int64_t seed = -1;
};

void cmd_generate(const GenerateArgs& args) {
    RunContext ctx;
    ctx.command = "generate";
    ctx.inputs.push_back(args.spec_path);

    json jspec = load_json_file(args.spec_path);
    pxt::synthgen::GenerationSpec spec = pxt::synthgen::generation_spec_from_json(jspec);
    if (args.seed >= 0) spec.seed = static_cast<std::uint64_t>(args.seed);
    ctx.seed = spec.seed;
    jspec["seed"] = spec.seed;
    ctx.config = jspec;

    std::cout << "generating dataset (seed " << spec.seed << ")\n";
    pxt::synthgen::GeneratedDataset ds = pxt::synthgen::generate_dataset(spec);
    if (jspec.contains("angle_replicates")) {
        const auto& jr = jspec["angle_replicates"];
        pxt::synthgen::AngleReplicateSpec rs;
        rs.n_angles = jr.value("n_angles", rs.n_angles);
        rs.repetitions = jr.value("repetitions", rs.repetitions);
        rs.angle_effect = jr.value("angle_effect", rs.angle_effect);
        rs.sigma_repetition = jr.value("sigma_repetition", rs.sigma_repetition);
        std::cout << "expanding into " << rs.n_angles << " angles x " << rs.repetitions
                  << " repetitions\n";
        ds = pxt::synthgen::generate_angle_replicates(ds, rs, spec.seed);
    }

    const fs::path out(args.out_dir);
    fs::create_directories(out / "cubes");
    fs::create_directories(out / "masks");

    std::set<std::string> masks_written;
    for (size_t i = 0; i < ds.index.entries.size(); ++i) {
        const auto& e = ds.index.entries[i];
        pxt::write_cube(out / e.cube_path, ds.cubes[i]);
        ctx.outputs.push_back(e.cube_path);
        if (masks_written.insert(e.mask_path).second) {
            pxt::write_mask(out / e.mask_path, ds.masks[i]);
            ctx.outputs.push_back(e.mask_path);
        }
    }
    for (const auto& [species, shift] : ds.shifts) {
        const std::string name = std::string("ground_truth_shift_") + pxt::to_string(species) +
                                 ".json";
        pxt::atomic_write_text(out / name, pxt::synthgen::shift_to_json(shift).dump() + "\n");
        ctx.outputs.push_back(name);
    }
    pxt::write_manifest(out / "manifest.json", ds.index);
    ctx.outputs.push_back("manifest.json");
    // per-species manifests for single-population workflows (transform
    // learning, per-species training)
    std::set<pxt::Species> species_present;
    for (const auto& e : ds.index.entries) species_present.insert(e.species);
    for (pxt::Species sp : species_present) {
        pxt::DatasetIndex sub;
        for (const auto& e : ds.index.entries)
            if (e.species == sp) sub.entries.push_back(e);
        const std::string name = std::string("manifest_") + pxt::to_string(sp) + ".json";
        pxt::write_manifest(out / name, sub);
        ctx.outputs.push_back(name);
    }

    std::cout << "wrote " << ds.index.entries.size() << " images to " << out.string() << "\n";
    ctx.write_manifest(out / "run_manifest.json");
}

// ---------------------------------------------------------------------------
// folds
// ---------------------------------------------------------------------------

struct FoldsArgs {
    std::string manifest_path;
    std::string out_path;
    int outer = 3;
    int inner = 5;
    std::int64_t seed = 1;
};

void cmd_folds(const FoldsArgs& args) {
    RunContext ctx;
    ctx.command = "folds";
    ctx.inputs.push_back(args.manifest_path);
    ctx.seed = static_cast<std::uint64_t>(args.seed);
    ctx.config = json{{"outer", args.outer}, {"inner", args.inner}, {"seed", args.seed}};

    const pxt::DatasetIndex index = pxt::read_manifest(args.manifest_path);
    const fs::path base = fs::path(args.manifest_path).parent_path();
    const auto subjects = pxt::evalx::subject_label_multisets(index, [&](const pxt::DatasetEntry& e) {
        const fs::path p(e.mask_path);
        return pxt::read_mask(p.is_absolute() ? p : base / p);
    });
    const pxt::evalx::FoldPlan plan =
        pxt::evalx::nested_folds(subjects, args.outer, args.inner, ctx.seed);
    pxt::atomic_write_text(args.out_path, pxt::evalx::fold_plan_to_json(plan).dump(2) + "\n");
    ctx.outputs.push_back(args.out_path);
    std::cout << "wrote fold plan (" << args.outer << " outer x " << args.inner << " inner) to "
              << args.out_path << "\n";
    ctx.write_manifest(fs::path(args.out_path).string() + ".run.json");
}

// ---------------------------------------------------------------------------
// learn
// ---------------------------------------------------------------------------

struct LearnArgs {
    std::string manifest_path;
    std::string species_filter;
    std::string organ = "kidney";
    int pairs = 10;
    std::int64_t seed = 1;
    std::string out_path;
    std::string config_path;
    int threads = 0;
};

void cmd_learn(const LearnArgs& args) {
    RunContext ctx;
    ctx.command = "learn";
    ctx.inputs.push_back(args.manifest_path);
    ctx.seed = static_cast<std::uint64_t>(args.seed);

    pxt::xfer::LearnConfig cfg;
    json jcfg = json::object();
    if (!args.config_path.empty()) {
        jcfg = load_json_file(args.config_path);
        ctx.inputs.push_back(args.config_path);
        try {
            cfg.steps = jcfg.value("steps", cfg.steps);
            cfg.adam.learning_rate = jcfg.value("learning_rate", cfg.adam.learning_rate);
            cfg.adam.beta1 = jcfg.value("beta1", cfg.adam.beta1);
            cfg.adam.beta2 = jcfg.value("beta2", cfg.adam.beta2);
            cfg.hist.bins = jcfg.value("histogram_bins", cfg.hist.bins);
            cfg.hist.hi = jcfg.value("histogram_max", cfg.hist.hi);
            cfg.hist.temperature = jcfg.value("histogram_temperature", cfg.hist.temperature);
        } catch (const json::exception& ex) {
            throw pxt::config_error(std::string("malformed learn config: ") + ex.what());
        }
    }
    const int organ = pxt::organ_class_from_json(json(args.organ));
    ctx.config = json{{"organ", args.organ}, {"pairs", args.pairs}, {"seed", args.seed},
                      {"species", args.species_filter}, {"config", jcfg}};

    pxt::DatasetIndex index = pxt::read_manifest(args.manifest_path);
    if (!args.species_filter.empty()) {
        const pxt::Species wanted = pxt::species_from_string(args.species_filter);
        pxt::DatasetIndex filtered;
        for (const auto& e : index.entries)
            if (e.species == wanted) filtered.entries.push_back(e);
        index = std::move(filtered);
    }
    const fs::path base = fs::path(args.manifest_path).parent_path();
    const auto loader = [&](const pxt::DatasetEntry& e) { return pxt::load_pair(e, base); };

    std::cout << "learning " << args.pairs << " transforms for organ '" << args.organ << "'\n";
    const pxt::xfer::TransformSet set = pxt::xfer::learn_transform_set(
        index, loader, organ, args.pairs, ctx.seed, cfg, resolve_threads(args.threads));
    pxt::xfer::write_transform_set(args.out_path, set);
    ctx.outputs.push_back(args.out_path);

    double mean_loss = 0.0;
    for (const auto& t : set.transforms) mean_loss += t.final_loss / set.transforms.size();
    std::cout << "wrote " << set.transforms.size() << " transforms, mean final loss "
              << mean_loss << "\n";
    ctx.write_manifest(fs::path(args.out_path).string() + ".run.json");
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string manifest_path;
    std::string folds_path;
    std::string train_config_path;
    std::string augment_config_path;
    std::string transforms_path;
    std::string out_dir;
    std::int64_t seed = -1;
    int threads = 0;
};

void cmd_train(const TrainArgs& args) {
    RunContext ctx;
    ctx.command = "train";
    ctx.inputs = {args.manifest_path, args.folds_path, args.train_config_path,
                  args.augment_config_path};

    const json jtrain = load_json_file(args.train_config_path);
    const json jaug = load_json_file(args.augment_config_path);
    pxt::model::TrainConfig train_cfg = pxt::model::train_config_from_json(jtrain);
    const pxt::augment::AugmentationConfig aug_cfg = pxt::augment::augmentation_config_from_json(jaug);
    if (args.seed >= 0) train_cfg.seed = static_cast<std::uint64_t>(args.seed);
    ctx.seed = train_cfg.seed;
    ctx.config = json{{"train", jtrain}, {"augment", jaug}, {"seed", train_cfg.seed},
                      {"transforms", args.transforms_path}};

    pxt::xfer::TransformSet transforms;
    const bool use_transforms = !args.transforms_path.empty();
    if (use_transforms) {
        transforms = pxt::xfer::read_transform_set(args.transforms_path);
        ctx.inputs.push_back(args.transforms_path);
    }

    const pxt::evalx::FoldPlan plan = pxt::evalx::fold_plan_from_json(load_json_file(args.folds_path));
    const LoadedDataset ds = load_dataset(args.manifest_path);
    const auto all_subjects = ds.index.subjects();

    const fs::path out(args.out_dir);
    fs::create_directories(out);
    // keep the fold plan next to the checkpoints so evaluation can rebuild
    // the per-fold ensembles
    pxt::atomic_write_text(out / "folds.json", pxt::evalx::fold_plan_to_json(plan).dump(2) + "\n");
    ctx.outputs.push_back("folds.json");

    auto entries_of = [&](const std::set<std::string>& subjects) {
        pxt::model::ImageSet set;
        for (size_t i = 0; i < ds.index.entries.size(); ++i) {
            if (!subjects.count(ds.index.entries[i].subject_id)) continue;
            set.cubes.push_back(&ds.cubes[i]);
            set.masks.push_back(&ds.masks[i]);
        }
        return set;
    };

    for (size_t f = 0; f < plan.outer.size(); ++f) {
        const auto outer_train = plan.outer_train_subjects(static_cast<int>(f), all_subjects);
        for (size_t g = 0; g < plan.outer[f].inner.size(); ++g) {
            const auto& val_subjects = plan.outer[f].inner[g].val_subjects;
            std::set<std::string> val(val_subjects.begin(), val_subjects.end());
            std::set<std::string> train;
            for (const auto& s : outer_train)
                if (!val.count(s)) train.insert(s);

            pxt::model::TrainConfig member_cfg = train_cfg;
            member_cfg.seed = pxt::mix_seed(train_cfg.seed, f, g);

            const pxt::model::ImageSet train_set = entries_of(train);
            const pxt::model::ImageSet val_set = entries_of(val);
            if (train_set.size() == 0)
                throw pxt::config_error("fold outer" + std::to_string(f) + "/inner" +
                                        std::to_string(g) + " has no training images");

            std::cout << "training outer" << f << "/inner" << g << " on " << train_set.size()
                      << " images (val " << val_set.size() << ")\n";
            const pxt::model::TrainResult result = pxt::model::train(
                train_set, val_set, member_cfg, aug_cfg, use_transforms ? &transforms : nullptr);

            const fs::path dir = out / ("outer" + std::to_string(f)) /
                                 ("inner" + std::to_string(g));
            fs::create_directories(dir);
            pxt::model::write_classifier(dir / "model.pxc", result.classifier);
            pxt::model::write_history(dir / "history.jsonl", result.history);
            ctx.outputs.push_back((dir / "model.pxc").lexically_relative(out).string());
            ctx.outputs.push_back((dir / "history.jsonl").lexically_relative(out).string());
        }
    }
    ctx.write_manifest(out / "run_manifest.json");
    std::cout << "training complete\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string manifest_path;
    std::string models_dir;
    std::string out_dir;
    std::string config_path;
    std::int64_t seed = -1;
    int threads = 0;
};

void cmd_eval(const EvalArgs& args) {
    RunContext ctx;
    ctx.command = "eval";
    ctx.inputs = {args.manifest_path, args.models_dir};

    json jcfg = json::object();
    if (!args.config_path.empty()) {
        jcfg = load_json_file(args.config_path);
        ctx.inputs.push_back(args.config_path);
    }
    int n_boot = 1000;
    double level = 0.95;
    std::uint64_t seed = 1;
    int target_organ = static_cast<int>(pxt::OrganClass::Kidney);
    pxt::evalx::NsdThresholds thresholds;
    auto mode = pxt::evalx::AggregationMode::Mean;
    try {
        n_boot = jcfg.value("n_boot", n_boot);
        level = jcfg.value("level", level);
        seed = jcfg.value("seed", seed);
        if (jcfg.contains("target_organ"))
            target_organ = pxt::organ_class_from_json(jcfg["target_organ"]);
        if (jcfg.contains("nsd")) thresholds = pxt::evalx::nsd_thresholds_from_json(jcfg["nsd"]);
        if (jcfg.value("aggregation", std::string("mean")) == "median")
            mode = pxt::evalx::AggregationMode::Median;
    } catch (const json::exception& ex) {
        throw pxt::config_error(std::string("malformed eval config: ") + ex.what());
    }
    if (args.seed >= 0) seed = static_cast<std::uint64_t>(args.seed);
    ctx.seed = seed;
    jcfg["seed"] = seed;
    ctx.config = jcfg;

    const fs::path models(args.models_dir);
    const pxt::evalx::FoldPlan plan =
        pxt::evalx::fold_plan_from_json(load_json_file(models / "folds.json"));
    const LoadedDataset ds = load_dataset(args.manifest_path);

    std::vector<pxt::evalx::MetricReport::ImageRow> rows;
    std::string perfusion_csv =
        "image_id,subject_id,species,perfusion,perfusion_index,dsc\n";

    for (size_t f = 0; f < plan.outer.size(); ++f) {
        // ensemble of this fold's inner models
        std::vector<pxt::model::PixelClassifier> members;
        for (size_t g = 0;; ++g) {
            const fs::path p = models / ("outer" + std::to_string(f)) /
                               ("inner" + std::to_string(g)) / "model.pxc";
            if (!fs::exists(p)) break;
            members.push_back(pxt::model::read_classifier(p));
        }
        if (members.empty())
            throw pxt::io_error("no checkpoints for outer fold " + std::to_string(f) + " in " +
                                models.string());
        std::vector<const pxt::model::PixelClassifier*> member_ptrs;
        for (const auto& m : members) member_ptrs.push_back(&m);

        const std::set<std::string> test_subjects(plan.outer[f].test_subjects.begin(),
                                                  plan.outer[f].test_subjects.end());
        std::vector<size_t> test_images;
        for (size_t i = 0; i < ds.index.entries.size(); ++i)
            if (test_subjects.count(ds.index.entries[i].subject_id)) test_images.push_back(i);

        std::vector<std::vector<pxt::evalx::MetricReport::ImageRow>> image_rows(test_images.size());
        std::vector<std::string> perfusion_rows(test_images.size());
        parallel_for(static_cast<int>(test_images.size()), resolve_threads(args.threads),
                     [&](int t) {
                         const size_t i = test_images[t];
                         const auto& e = ds.index.entries[i];
                         const auto pred = pxt::model::ensemble_predict(member_ptrs, ds.cubes[i]);
                         for (int cls : classes_present(ds.masks[i])) {
                             pxt::evalx::MetricReport::ImageRow row;
                             row.image_id = e.image_id;
                             row.subject_id = e.subject_id;
                             row.organ_class = cls;
                             row.dsc = pxt::evalx::dsc(pred.labels, ds.masks[i], cls);
                             if (e.annotation == pxt::Annotation::Semantic) {
                                 row.nsd = pxt::evalx::nsd(pred.labels, ds.masks[i], cls,
                                                           thresholds.tau(cls), e.annotation);
                             }
                             if (cls == target_organ) {
                                 perfusion_rows[t] =
                                     e.image_id + "," + e.subject_id + "," +
                                     pxt::to_string(e.species) + "," + pxt::to_string(e.perfusion) +
                                     "," +
                                     pxt::format_double(pxt::mean_region_perfusion_index(
                                         ds.cubes[i], ds.masks[i], cls)) +
                                     "," + pxt::format_double(row.dsc) + "\n";
                             }
                             image_rows[t].push_back(std::move(row));
                         }
                     });
        for (size_t t = 0; t < test_images.size(); ++t) {
            rows.insert(rows.end(), image_rows[t].begin(), image_rows[t].end());
            perfusion_csv += perfusion_rows[t];
        }
    }

    const pxt::evalx::MetricReport report =
        pxt::evalx::build_metric_report(std::move(rows), ds.index, n_boot, level, seed, mode);

    const fs::path out(args.out_dir);
    fs::create_directories(out);
    pxt::atomic_write_text(out / "metrics.json",
                           pxt::evalx::metric_report_to_json(report).dump(2) + "\n");
    pxt::atomic_write_text(out / "metrics.csv", pxt::evalx::metric_report_to_csv(report));
    pxt::atomic_write_text(out / "perfusion_dsc.csv", perfusion_csv);
    ctx.outputs = {"metrics.json", "metrics.csv", "perfusion_dsc.csv"};

    std::cout << "overall DSC " << report.dsc_overall.score << " [" << report.dsc_overall.ci.lo
              << ", " << report.dsc_overall.ci.hi << "]\n";
    ctx.write_manifest(out / "run_manifest.json");
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string manifest_path;
    std::string which;
    std::string out_dir;
    std::string config_path;
    std::int64_t seed = -1;
    int threads = 0;
};

float median_lower(std::vector<float> values) {
    const size_t mid = (values.size() - 1) / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    return values[mid];
}

void analyze_median_spectra(const LoadedDataset& ds, const fs::path& out, RunContext& ctx) {
    // species -> organ -> subject -> per-image medians
    std::map<pxt::Species, std::map<int, std::map<std::string, std::vector<pxt::Spectrum>>>> acc;
    for (size_t i = 0; i < ds.index.entries.size(); ++i) {
        const auto& e = ds.index.entries[i];
        for (int cls : classes_present(ds.masks[i])) {
            acc[e.species][cls][e.subject_id].push_back(
                pxt::region_median_spectrum(ds.cubes[i], ds.masks[i], cls, e.subject_id, e.image_id)
                    .median);
        }
    }
    std::string csv = "species,organ,wavelength,median,sd,n_subjects\n";
    json jout = json::array();
    for (const auto& [species, organs] : acc) {
        for (const auto& [cls, subjects] : organs) {
            // subject-level per-channel medians, then median and SD across subjects
            std::vector<pxt::Spectrum> subject_medians;
            for (const auto& [_, images] : subjects) {
                pxt::Spectrum m;
                std::vector<float> channel(images.size());
                for (int c = 0; c < pxt::kChannels; ++c) {
                    for (size_t k = 0; k < images.size(); ++k) channel[k] = images[k][c];
                    m[c] = median_lower(channel);
                }
                subject_medians.push_back(m);
            }
            json channels = json::array();
            std::vector<float> values(subject_medians.size());
            for (int c = 0; c < pxt::kChannels; ++c) {
                double sum = 0.0, sumsq = 0.0;
                for (size_t k = 0; k < subject_medians.size(); ++k) {
                    values[k] = subject_medians[k][c];
                    sum += values[k];
                    sumsq += static_cast<double>(values[k]) * values[k];
                }
                const double n = static_cast<double>(values.size());
                const double med = median_lower(values);
                const double sd = std::sqrt(std::max(0.0, sumsq / n - (sum / n) * (sum / n)));
                csv += std::string(pxt::to_string(species)) + "," + pxt::organ_name(cls) + "," +
                       pxt::format_double(pxt::wavelength_nm(c)) + "," + pxt::format_double(med) +
                       "," + pxt::format_double(sd) + "," + std::to_string(values.size()) + "\n";
                channels.push_back({{"wavelength", pxt::wavelength_nm(c)},
                                    {"median", med},
                                    {"sd", sd}});
            }
            jout.push_back({{"species", pxt::to_string(species)},
                            {"organ", pxt::organ_name(cls)},
                            {"n_subjects", subject_medians.size()},
                            {"channels", std::move(channels)}});
        }
    }
    pxt::atomic_write_text(out / "median_spectra.csv", csv);
    pxt::atomic_write_text(out / "median_spectra.json", jout.dump(2) + "\n");
    ctx.outputs = {"median_spectra.csv", "median_spectra.json"};
}

void analyze_pca(const LoadedDataset& ds, int target_organ, int k, const fs::path& out,
                 RunContext& ctx) {
    std::vector<Eigen::VectorXd> rows;
    std::vector<size_t> row_entries;
    for (size_t i = 0; i < ds.index.entries.size(); ++i) {
        bool present = false;
        for (std::uint8_t label : ds.masks[i].labels)
            if (label == target_organ) {
                present = true;
                break;
            }
        if (!present) continue;
        rows.push_back(pxt::region_median_spectrum(ds.cubes[i], ds.masks[i], target_organ)
                           .median.cast<double>());
        row_entries.push_back(i);
    }
    if (rows.size() < 3)
        throw pxt::numeric_error("pca: fewer than 3 images contain the target organ");
    Eigen::MatrixXd data(rows.size(), pxt::kChannels);
    for (size_t i = 0; i < rows.size(); ++i) data.row(i) = rows[i].transpose();

    const pxt::specan::PcaModel model = pxt::specan::fit_pca(data, k);

    std::string csv = "image_id,species,perfusion,pc1,pc2\n";
    // (species, perfusion) -> mean in PC space
    std::map<std::pair<pxt::Species, pxt::Perfusion>, std::pair<Eigen::VectorXd, int>> centers;
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& e = ds.index.entries[row_entries[i]];
        const Eigen::VectorXd coords = model.project(rows[i]);
        csv += e.image_id + "," + pxt::to_string(e.species) + "," + pxt::to_string(e.perfusion) +
               "," + pxt::format_double(coords[0]) + "," +
               pxt::format_double(k > 1 ? coords[1] : 0.0) + "\n";
        auto& [sum, count] = centers[{e.species, e.perfusion}];
        if (count == 0) sum = Eigen::VectorXd::Zero(k);
        sum += coords;
        count += 1;
    }
    pxt::atomic_write_text(out / "pca_scatter.csv", csv);

    json jcenters = json::array();
    json jshifts = json::array();
    for (const auto& [key, value] : centers) {
        const Eigen::VectorXd mean = value.first / value.second;
        jcenters.push_back({{"species", pxt::to_string(key.first)},
                            {"perfusion", pxt::to_string(key.second)},
                            {"pc1", mean[0]},
                            {"pc2", k > 1 ? mean[1] : 0.0},
                            {"n", value.second}});
    }
    for (const auto& [key, value] : centers) {
        if (key.second != pxt::Perfusion::Physiological) continue;
        const auto mal = centers.find({key.first, pxt::Perfusion::Malperfused});
        if (mal == centers.end()) continue;
        const double d =
            mal->second.first[0] / mal->second.second - value.first[0] / value.second;
        jshifts.push_back({{"species", pxt::to_string(key.first)},
                           {"pc1_displacement", d},
                           {"sign", d > 0 ? 1 : (d < 0 ? -1 : 0)}});
    }
    json jratio = json::array();
    for (int i = 0; i < k; ++i) jratio.push_back(model.explained_variance_ratio[i]);
    const json jout{{"explained_variance_ratio", jratio},
                    {"centers", std::move(jcenters)},
                    {"pc1_shifts", std::move(jshifts)}};
    pxt::atomic_write_text(out / "pca.json", jout.dump(2) + "\n");
    ctx.outputs = {"pca_scatter.csv", "pca.json"};
}

void analyze_nn_matrix(const LoadedDataset& ds, const fs::path& out, RunContext& ctx) {
    std::map<pxt::Species, std::vector<pxt::RegionSummary>> summaries;
    for (size_t i = 0; i < ds.index.entries.size(); ++i) {
        const auto& e = ds.index.entries[i];
        for (int cls : classes_present(ds.masks[i])) {
            summaries[e.species].push_back(pxt::region_median_spectrum(
                ds.cubes[i], ds.masks[i], cls, e.subject_id, e.image_id));
        }
    }
    json jout = json::array();
    for (const auto& [query_species, queries] : summaries) {
        for (const auto& [neighbor_species, neighbors] : summaries) {
            const auto matrix = pxt::specan::nn_agreement(queries, neighbors);
            const std::string name = std::string("nn_") + pxt::to_string(query_species) + "_" +
                                     pxt::to_string(neighbor_species);
            std::string csv = "query_organ";
            for (int c = 0; c < pxt::kNumClasses; ++c) csv += std::string(",") + pxt::organ_name(c);
            csv += "\n";
            for (int r = 0; r < pxt::kNumClasses; ++r) {
                if (matrix.row_counts[r] == 0) continue;
                csv += pxt::organ_name(r);
                for (int c = 0; c < pxt::kNumClasses; ++c)
                    csv += "," + pxt::format_double(matrix.matrix(r, c));
                csv += "\n";
            }
            pxt::atomic_write_text(out / (name + ".csv"), csv);
            ctx.outputs.push_back(name + ".csv");
            jout.push_back({{"query_species", pxt::to_string(query_species)},
                            {"neighbor_species", pxt::to_string(neighbor_species)},
                            {"mean_diagonal", matrix.mean_diagonal()}});
        }
    }
    pxt::atomic_write_text(out / "nn_summary.json", jout.dump(2) + "\n");
    ctx.outputs.push_back("nn_summary.json");
}

void analyze_variance(const LoadedDataset& ds, const json& jcfg, std::uint64_t seed, int threads,
                      const fs::path& out, RunContext& ctx) {
    std::vector<int> organs;
    if (jcfg.contains("organs")) {
        for (const auto& o : jcfg["organs"]) organs.push_back(pxt::organ_class_from_json(o));
    } else {
        std::set<int> present;
        for (const auto& mask : ds.masks)
            for (int cls : classes_present(mask)) present.insert(cls);
        organs.assign(present.begin(), present.end());
    }
    const int n_boot = jcfg.value("bootstrap_reps", 500);
    const double level = jcfg.value("level", 0.95);
    const bool strict = jcfg.value("strict", false);

    const auto loader = [&](const pxt::DatasetEntry& e) {
        const size_t i = ds.by_id.at(e.image_id);
        return std::pair<pxt::SpectralCube, pxt::SegmentationMask>(ds.cubes[i], ds.masks[i]);
    };

    std::string csv = "organ,wavelength,factor,proportion,ci_lo,ci_hi\n";
    json jout = json::array();
    for (int organ : organs) {
        const auto region_obs = pxt::specan::collect_region_observations(ds.index, loader, organ);
        if (region_obs.empty()) continue;
        std::cout << "variance decomposition for " << pxt::organ_name(organ) << " ("
                  << region_obs.size() << " observations per wavelength)\n";

        struct ChannelResult {
            pxt::specan::VarianceProportions p;
            std::optional<pxt::specan::ProportionCis> cis;
            bool converged = false;
        };
        std::vector<ChannelResult> results(pxt::kChannels);
        parallel_for(pxt::kChannels, threads, [&](int c) {
            const auto obs = pxt::specan::lmm_observations_at(region_obs, c);
            const auto fit = pxt::specan::fit_lmm(obs);
            results[c].converged = fit.converged;
            results[c].p = pxt::specan::variance_proportions(fit);
            if (n_boot > 0 && fit.converged) {
                results[c].cis = pxt::specan::parametric_bootstrap_ci(
                    obs, fit, n_boot, level, pxt::mix_seed(seed, organ, c), strict);
            }
        });

        for (int c = 0; c < pxt::kChannels; ++c) {
            const auto& r = results[c];
            const auto emit = [&](const char* factor, double value, const pxt::evalx::Ci* ci) {
                csv += std::string(pxt::organ_name(organ)) + "," +
                       pxt::format_double(pxt::wavelength_nm(c)) + "," + factor + "," +
                       pxt::format_double(value) + ",";
                csv += ci ? pxt::format_double(ci->lo) : "";
                csv += ",";
                csv += ci ? pxt::format_double(ci->hi) : "";
                csv += "\n";
            };
            emit("species", r.p.species, r.cis ? &r.cis->species : nullptr);
            emit("angle", r.p.angle, r.cis ? &r.cis->angle : nullptr);
            emit("subject", r.p.subject, r.cis ? &r.cis->subject : nullptr);
            emit("image", r.p.image, r.cis ? &r.cis->image : nullptr);
            emit("residual", r.p.residual, r.cis ? &r.cis->residual : nullptr);
            jout.push_back({{"organ", pxt::organ_name(organ)},
                            {"wavelength", pxt::wavelength_nm(c)},
                            {"converged", r.converged},
                            {"species", r.p.species},
                            {"angle", r.p.angle},
                            {"subject", r.p.subject},
                            {"image", r.p.image},
                            {"residual", r.p.residual}});
        }
    }
    pxt::atomic_write_text(out / "variance.csv", csv);
    pxt::atomic_write_text(out / "variance.json", jout.dump(2) + "\n");
    ctx.outputs = {"variance.csv", "variance.json"};
}

void cmd_analyze(const AnalyzeArgs& args) {
    RunContext ctx;
    ctx.command = "analyze";
    ctx.inputs.push_back(args.manifest_path);

    json jcfg = json::object();
    if (!args.config_path.empty()) {
        jcfg = load_json_file(args.config_path);
        ctx.inputs.push_back(args.config_path);
    }
    std::uint64_t seed = jcfg.value("seed", 1);
    if (args.seed >= 0) seed = static_cast<std::uint64_t>(args.seed);
    ctx.seed = seed;
    ctx.config = json{{"which", args.which}, {"config", jcfg}, {"seed", seed}};

    const LoadedDataset ds = load_dataset(args.manifest_path);
    const fs::path out(args.out_dir);
    fs::create_directories(out);

    if (args.which == "median-spectra") {
        analyze_median_spectra(ds, out, ctx);
    } else if (args.which == "pca") {
        int organ = static_cast<int>(pxt::OrganClass::Kidney);
        if (jcfg.contains("target_organ")) organ = pxt::organ_class_from_json(jcfg["target_organ"]);
        analyze_pca(ds, organ, jcfg.value("pca_components", 2), out, ctx);
    } else if (args.which == "nn-matrix") {
        analyze_nn_matrix(ds, out, ctx);
    } else if (args.which == "variance") {
        analyze_variance(ds, jcfg, seed, resolve_threads(args.threads), out, ctx);
    } else {
        throw pxt::config_error("unknown analysis: " + args.which +
                                " (expected median-spectra, pca, nn-matrix or variance)");
    }
    ctx.write_manifest(out / "run_manifest.json");
    std::cout << "analysis '" << args.which << "' written to " << out.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pxt: spectral image analysis and perfusion-shift augmentation toolkit"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* cgen = app.add_subcommand("generate", "generate a synthetic multi-species dataset");
    cgen->add_option("--spec", gen.spec_path, "generation spec JSON")->required();
    cgen->add_option("--out", gen.out_dir, "output directory")->required();
    cgen->add_option("--seed", gen.seed, "override the spec seed");

    FoldsArgs folds;
    auto* cfolds = app.add_subcommand("folds", "build a nested cross-validation fold plan");
    cfolds->add_option("--manifest", folds.manifest_path, "dataset manifest")->required();
    cfolds->add_option("--out", folds.out_path, "output fold plan JSON")->required();
    cfolds->add_option("--outer", folds.outer, "outer fold count");
    cfolds->add_option("--inner", folds.inner, "inner fold count");
    cfolds->add_option("--seed", folds.seed, "stratification seed");

    LearnArgs learn;
    auto* clearn = app.add_subcommand("learn", "learn a perfusion transform set");
    clearn->add_option("--manifest", learn.manifest_path, "dataset manifest")->required();
    clearn->add_option("--species", learn.species_filter,
                       "restrict to one species of a mixed manifest");
    clearn->add_option("--organ", learn.organ, "target organ class");
    clearn->add_option("--pairs", learn.pairs, "number of image pairs");
    clearn->add_option("--seed", learn.seed, "pair sampling seed");
    clearn->add_option("--out", learn.out_path, "output .pxt.json path")->required();
    clearn->add_option("--config", learn.config_path, "optimizer config JSON");
    clearn->add_option("--threads", learn.threads, "worker cap (default: cores)");

    TrainArgs train;
    auto* ctrain = app.add_subcommand("train", "train per-fold segmentation classifiers");
    ctrain->add_option("--manifest", train.manifest_path, "dataset manifest")->required();
    ctrain->add_option("--folds", train.folds_path, "fold plan JSON")->required();
    ctrain->add_option("--train", train.train_config_path, "train config JSON")->required();
    ctrain->add_option("--augment", train.augment_config_path, "augmentation config JSON")
        ->required();
    ctrain->add_option("--transforms", train.transforms_path,
                       "perfusion transform set (.pxt.json); omit for the baseline");
    ctrain->add_option("--out", train.out_dir, "output directory")->required();
    ctrain->add_option("--seed", train.seed, "override the train config seed");
    ctrain->add_option("--threads", train.threads, "worker cap (default: cores)");

    EvalArgs eval;
    auto* ceval = app.add_subcommand("eval", "ensemble-evaluate trained models");
    ceval->add_option("--manifest", eval.manifest_path, "dataset manifest")->required();
    ceval->add_option("--models", eval.models_dir, "directory produced by train")->required();
    ceval->add_option("--out", eval.out_dir, "output directory")->required();
    ceval->add_option("--config", eval.config_path, "eval config JSON");
    ceval->add_option("--seed", eval.seed, "bootstrap seed override");
    ceval->add_option("--threads", eval.threads, "worker cap (default: cores)");

    AnalyzeArgs analyze;
    auto* canalyze = app.add_subcommand("analyze", "descriptive spectral analyses");
    canalyze->add_option("--manifest", analyze.manifest_path, "dataset manifest")->required();
    canalyze
        ->add_option("--which", analyze.which,
                     "one of: median-spectra, pca, nn-matrix, variance")
        ->required();
    canalyze->add_option("--out", analyze.out_dir, "output directory")->required();
    canalyze->add_option("--config", analyze.config_path, "analysis config JSON");
    canalyze->add_option("--seed", analyze.seed, "seed override");
    canalyze->add_option("--threads", analyze.threads, "worker cap (default: cores)");

    try {
        app.parse(argc, argv);
        if (cgen->parsed()) cmd_generate(gen);
        if (cfolds->parsed()) cmd_folds(folds);
        if (clearn->parsed()) cmd_learn(learn);
        if (ctrain->parsed()) cmd_train(train);
        if (ceval->parsed()) cmd_eval(eval);
        if (canalyze->parsed()) cmd_analyze(analyze);
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const pxt::config_error& e) {
        std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const pxt::io_error& e) {
        std::cerr << nlohmann::json{{"error", "io"}, {"message", e.what()}}.dump() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << nlohmann::json{{"error", "io"}, {"message", e.what()}}.dump() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "numeric"}, {"message", e.what()}}.dump() << "\n";
        return 4;
    }
}
