/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/model.hpp
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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pxt/augment.hpp"
#include "pxt/common.hpp"
#include "pxt/hsicore.hpp"
#include "pxt/hsicore_io.hpp"
#include "pxt/optim.hpp"
#include "pxt/rng.hpp"
#include "pxt/xfer.hpp"

namespace pxt::model {

/// L1-normalized reflectance values average 1/kChannels per channel; inputs
/// are scaled to unit mean so weight initialization and Adam step sizes are
/// in their usual regime.
inline constexpr double kInputScale = kChannels;

/// Per-pixel spectral classifier: a fully connected ReLU network from the 100
/// reflectance channels (scaled by kInputScale) to one logit per class.
/// Deliberately has no spatial context, so any performance difference between
/// training setups is driven by the spectra alone.
struct PixelClassifier {
    std::vector<int> dims; // {input, hidden..., classes}
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    int input_width() const { return dims.front(); }
    int num_classes() const { return dims.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }

    Eigen::Index param_count() const {
        Eigen::Index n = 0;
        for (size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
        return n;
    }

    /// He-initialized network. The toolkit pipeline always builds 100-input,
    /// 12-class networks; other shapes are allowed for isolated numerics.
    static PixelClassifier create(const std::vector<int>& layer_dims, std::uint64_t seed) {
        if (layer_dims.size() < 2) throw std::invalid_argument("classifier needs >= 2 layer dims");
        PixelClassifier clf;
        clf.dims = layer_dims;
        Rng rng(mix_seed(seed, 11));
        for (size_t l = 0; l + 1 < layer_dims.size(); ++l) {
            const int fan_in = layer_dims[l], fan_out = layer_dims[l + 1];
            Eigen::MatrixXd w(fan_out, fan_in);
            const double scale = std::sqrt(2.0 / fan_in);
            for (int r = 0; r < fan_out; ++r)
                for (int c = 0; c < fan_in; ++c) w(r, c) = scale * rng.normal();
            clf.weights.push_back(std::move(w));
            clf.biases.push_back(Eigen::VectorXd::Zero(fan_out));
        }
        return clf;
    }

    void validate_pipeline_shape() const {
        if (input_width() != kChannels)
            throw config_error("pipeline classifiers must take 100 input channels");
        if (num_classes() != kNumClasses)
            throw config_error("pipeline classifiers must emit 12 class logits");
    }

    Eigen::VectorXd pack() const {
        Eigen::VectorXd p(param_count());
        Eigen::Index at = 0;
        for (size_t l = 0; l < weights.size(); ++l) {
            for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
                p.segment(at, weights[l].cols()) = weights[l].row(r).transpose();
                at += weights[l].cols();
            }
            p.segment(at, biases[l].size()) = biases[l];
            at += biases[l].size();
        }
        return p;
    }

    void unpack(const Eigen::VectorXd& p) {
        if (p.size() != param_count()) throw std::invalid_argument("parameter size mismatch");
        Eigen::Index at = 0;
        for (size_t l = 0; l < weights.size(); ++l) {
            for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
                weights[l].row(r) = p.segment(at, weights[l].cols()).transpose();
                at += weights[l].cols();
            }
            biases[l] = p.segment(at, biases[l].size());
            at += biases[l].size();
        }
    }

    /// Logits for a batch of spectra (rows).
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd a = kInputScale * x;
        for (size_t l = 0; l < weights.size(); ++l) {
            a = ((a * weights[l].transpose()).rowwise() + biases[l].transpose()).eval();
            if (l + 1 < weights.size()) a = a.cwiseMax(0.0);
        }
        return a;
    }
};

/// Row-wise stable softmax.
inline Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

// ---------------------------------------------------------------------------
// Dice + cross-entropy loss
// ---------------------------------------------------------------------------

struct DiceCeResult {
    double loss = 0.0;
    double dice_term = 0.0; // mean soft Dice loss over classes present in the labels
    double ce_term = 0.0;   // mean cross-entropy over valid pixels
};

/// Equally weighted soft Dice and cross-entropy over all valid pixels
/// (label != kIgnoreLabel). The Dice term averages 1 - 2|P.Y|/(|P|+|Y|) over
/// the classes present among the valid labels. Optionally writes
/// d(loss)/d(logits) for the backward pass; rows of ignored pixels are zero.
inline DiceCeResult dice_ce_loss(const Eigen::MatrixXd& logits,
                                 const std::vector<std::uint8_t>& labels,
                                 Eigen::MatrixXd* dlogits = nullptr) {
    const Eigen::Index n = logits.rows();
    const int classes = static_cast<int>(logits.cols());
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw std::invalid_argument("dice_ce_loss: labels/logits size mismatch");

    std::vector<Eigen::Index> valid;
    valid.reserve(labels.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[i] == kIgnoreLabel) continue;
        if (labels[i] >= classes)
            throw std::invalid_argument("dice_ce_loss: label out of range");
        valid.push_back(i);
    }
    if (valid.empty()) throw std::invalid_argument("dice_ce_loss: no valid pixels");
    const double v_count = static_cast<double>(valid.size());

    const Eigen::MatrixXd p = softmax(logits);

    std::vector<char> present(classes, 0);
    for (Eigen::Index i : valid) present[labels[i]] = 1;
    int n_present = 0;
    for (char c : present) n_present += c;

    Eigen::VectorXd inter = Eigen::VectorXd::Zero(classes);  // sum of p * y
    Eigen::VectorXd denom = Eigen::VectorXd::Zero(classes);  // sum of p + y
    double ce = 0.0;
    for (Eigen::Index i : valid) {
        const int y = labels[i];
        inter[y] += p(i, y);
        denom += p.row(i).transpose();
        denom[y] += 1.0;
        ce -= std::log(std::max(p(i, y), 1e-300));
    }
    ce /= v_count;

    double dice = 0.0;
    for (int c = 0; c < classes; ++c)
        if (present[c]) dice += 1.0 - 2.0 * inter[c] / denom[c];
    dice /= n_present;

    DiceCeResult res;
    res.dice_term = dice;
    res.ce_term = ce;
    res.loss = 0.5 * dice + 0.5 * ce;

    if (dlogits) {
        dlogits->setZero(n, classes);
        for (Eigen::Index i : valid) {
            const int y = labels[i];
            // g = dL/dp for this row
            Eigen::VectorXd g = Eigen::VectorXd::Zero(classes);
            for (int c = 0; c < classes; ++c) {
                if (!present[c]) continue;
                const double yc = (c == y) ? 1.0 : 0.0;
                g[c] += 0.5 / n_present * (-2.0) * (yc * denom[c] - inter[c]) / (denom[c] * denom[c]);
            }
            g[y] += -0.5 / (v_count * std::max(p(i, y), 1e-300));
            // chain rule through the softmax
            const double s = g.dot(p.row(i).transpose());
            dlogits->row(i) = (p.row(i).array() * (g.transpose().array() - s)).matrix();
        }
    }
    return res;
}

/// Forward + backward through the network; returns the loss and accumulates
/// d(loss)/d(parameters) in pack() layout.
inline DiceCeResult network_loss_grad(const PixelClassifier& clf, const Eigen::MatrixXd& x,
                                      const std::vector<std::uint8_t>& labels,
                                      Eigen::VectorXd* grad = nullptr) {
    const size_t layers = clf.weights.size();
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(layers + 1);
    activations.push_back(kInputScale * x);
    for (size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z =
            (activations.back() * clf.weights[l].transpose()).rowwise() + clf.biases[l].transpose();
        if (l + 1 < layers) z = z.cwiseMax(0.0);
        activations.push_back(std::move(z));
    }

    Eigen::MatrixXd dlogits;
    const DiceCeResult res =
        dice_ce_loss(activations.back(), labels, grad ? &dlogits : nullptr);
    if (!grad) return res;

    grad->setZero(clf.param_count());
    Eigen::MatrixXd delta = std::move(dlogits);
    Eigen::Index tail = grad->size();
    for (size_t l = layers; l-- > 0;) {
        const Eigen::MatrixXd dw = delta.transpose() * activations[l];
        const Eigen::VectorXd db = delta.colwise().sum();
        tail -= dw.size() + db.size();
        Eigen::Index at = tail;
        for (Eigen::Index r = 0; r < dw.rows(); ++r) {
            grad->segment(at, dw.cols()) = dw.row(r).transpose();
            at += dw.cols();
        }
        grad->segment(at, db.size()) = db;
        if (l > 0) {
            delta = (delta * clf.weights[l]).eval();
            // ReLU mask of the previous activation
            delta = (activations[l].array() > 0.0).cast<double>().matrix().cwiseProduct(delta);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Oversampling
// ---------------------------------------------------------------------------

/// Sampling weights inversely proportional to the dataset-wide pixel
/// frequency of each image's dominant class, normalized to sum to 1.
inline std::vector<double> oversampling_weights(std::span<const SegmentationMask* const> masks) {
    if (masks.empty()) throw std::invalid_argument("oversampling_weights: no images");
    std::vector<double> class_pixels(kNumClasses, 0.0);
    std::vector<int> dominant(masks.size(), -1);
    double total = 0.0;
    for (size_t i = 0; i < masks.size(); ++i) {
        std::vector<double> counts(kNumClasses, 0.0);
        for (std::uint8_t label : masks[i]->labels) {
            if (label == kIgnoreLabel) continue;
            counts[label] += 1.0;
            class_pixels[label] += 1.0;
            total += 1.0;
        }
        int best = 0;
        for (int c = 1; c < kNumClasses; ++c)
            if (counts[c] > counts[best]) best = c;
        dominant[i] = best;
    }
    if (total <= 0.0) throw std::invalid_argument("oversampling_weights: all pixels ignored");

    std::vector<double> weights(masks.size());
    double sum = 0.0;
    for (size_t i = 0; i < masks.size(); ++i) {
        const double freq = class_pixels[dominant[i]] / total;
        weights[i] = freq > 0.0 ? 1.0 / freq : 0.0;
        sum += weights[i];
    }
    for (double& w : weights) w /= sum;
    return weights;
}

/// Draws exactly `images_per_epoch` image indices with replacement from the
/// oversampling distribution.
inline std::vector<size_t> oversample_epoch(std::span<const SegmentationMask* const> masks,
                                            int images_per_epoch, Rng& rng) {
    const std::vector<double> weights = oversampling_weights(masks);
    std::vector<double> cdf(weights.size());
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;
    std::vector<size_t> ids(images_per_epoch);
    for (int k = 0; k < images_per_epoch; ++k) {
        const double u = rng.uniform01();
        ids[k] = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    }
    return ids;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    double eta0 = 0.001;       // initial learning rate
    double gamma = 0.99;       // per-epoch exponential decay
    double beta1 = 0.9;
    double beta2 = 0.999;
    int batch_size = 8;        // images per optimization step
    int epochs = 100;
    int images_per_epoch = 500;
    int swa_window = 10;       // stochastic weight averaging over the last epochs
    bool oversample = true;
    std::vector<int> hidden = {64, 64};
    std::uint64_t seed = 1;

    void validate() const {
        if (eta0 <= 0.0 || gamma <= 0.0) throw config_error("learning rate and decay must be > 0");
        if (batch_size < 1 || images_per_epoch < 1) throw config_error("batch/epoch sizes must be >= 1");
        if (epochs < 0) throw config_error("epochs must be >= 0");
        if (swa_window < 1 || (epochs > 0 && swa_window > epochs))
            throw config_error("SWA window must be in [1, epochs]");
    }
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    try {
        cfg.eta0 = j.value("eta0", cfg.eta0);
        cfg.gamma = j.value("gamma", cfg.gamma);
        cfg.beta1 = j.value("beta1", cfg.beta1);
        cfg.beta2 = j.value("beta2", cfg.beta2);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.images_per_epoch = j.value("images_per_epoch", cfg.images_per_epoch);
        cfg.swa_window = j.value("swa_window", cfg.swa_window);
        cfg.oversample = j.value("oversample", cfg.oversample);
        if (j.contains("hidden")) cfg.hidden = j["hidden"].get<std::vector<int>>();
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(std::string("malformed train config: ") + ex.what());
    }
    cfg.validate();
    return cfg;
}

/// A resolved in-memory view of one image list.
struct ImageSet {
    std::vector<const SpectralCube*> cubes;
    std::vector<const SegmentationMask*> masks;

    size_t size() const { return cubes.size(); }
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    PixelClassifier classifier;
    std::vector<EpochStats> history;
};

namespace detail {

/// Valid pixels of a batch of augmented images as (X, labels).
inline void collect_pixels(const SpectralCube& cube, const SegmentationMask& mask,
                           std::vector<double>& xs, std::vector<std::uint8_t>& ys) {
    for (int p = 0; p < cube.pixel_count(); ++p) {
        if (mask.labels[p] == kIgnoreLabel) continue;
        const auto s = cube.spectrum(p);
        for (int c = 0; c < kChannels; ++c) xs.push_back(s[c]);
        ys.push_back(mask.labels[p]);
    }
}

inline double evaluate_loss(const PixelClassifier& clf, const ImageSet& set) {
    if (set.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> xs;
    std::vector<std::uint8_t> ys;
    for (size_t i = 0; i < set.size(); ++i) collect_pixels(*set.cubes[i], *set.masks[i], xs, ys);
    if (ys.empty()) return std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                       Eigen::RowMajor>>(
        xs.data(), static_cast<Eigen::Index>(ys.size()), kChannels);
    return dice_ce_loss(clf.forward(x), ys).loss;
}

} // namespace detail

/// Trains a pixel classifier with the standard protocol: oversampled epochs,
/// the augmentation pipeline per image (perfusion step only when `transforms`
/// is non-null), Adam with per-epoch learning rate eta0 * gamma^epoch, and
/// stochastic weight averaging of the post-epoch weights over the last
/// `swa_window` epochs. Fully deterministic for a fixed config seed.
inline TrainResult train(const ImageSet& train_set, const ImageSet& val_set,
                         const TrainConfig& cfg, const augment::AugmentationConfig& aug_cfg,
                         const xfer::TransformSet* transforms) {
    cfg.validate();
    aug_cfg.validate();
    if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
    if (transforms && transforms->transforms.empty())
        throw std::invalid_argument("train: empty transform set");

    std::vector<int> dims;
    dims.push_back(kChannels);
    for (int hdim : cfg.hidden) dims.push_back(hdim);
    dims.push_back(kNumClasses);

    TrainResult out;
    out.classifier = PixelClassifier::create(dims, cfg.seed);

    std::vector<augment::DonorImage> donors(train_set.size());
    for (size_t i = 0; i < train_set.size(); ++i)
        donors[i] = {train_set.cubes[i], train_set.masks[i]};

    Eigen::VectorXd params = out.classifier.pack();
    AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.eta0;
    adam_cfg.beta1 = cfg.beta1;
    adam_cfg.beta2 = cfg.beta2;
    Adam adam(adam_cfg, params.size());

    Eigen::VectorXd swa_sum = Eigen::VectorXd::Zero(params.size());
    int swa_count = 0;

    const int batches = cfg.images_per_epoch / cfg.batch_size; // remainder images dropped
    std::uint64_t image_counter = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.eta0 * std::pow(cfg.gamma, epoch);

        Rng sample_rng(mix_seed(cfg.seed, 21, static_cast<std::uint64_t>(epoch)));
        std::vector<size_t> ids;
        if (cfg.oversample) {
            ids = oversample_epoch(train_set.masks, cfg.images_per_epoch, sample_rng);
        } else {
            ids.resize(cfg.images_per_epoch);
            for (auto& id : ids) id = sample_rng.uniform_int(train_set.size());
        }

        double epoch_loss = 0.0;
        for (int bidx = 0; bidx < batches; ++bidx) {
            std::vector<double> xs;
            std::vector<std::uint8_t> ys;
            for (int k = 0; k < cfg.batch_size; ++k) {
                const size_t id = ids[static_cast<size_t>(bidx) * cfg.batch_size + k];
                const auto [cube, mask] = augment::augment_image(
                    *train_set.cubes[id], *train_set.masks[id], aug_cfg, transforms, donors,
                    mix_seed(cfg.seed, 22, image_counter++));
                detail::collect_pixels(cube, mask, xs, ys);
            }
            if (ys.empty()) continue;
            const Eigen::MatrixXd x =
                Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>(
                    xs.data(), static_cast<Eigen::Index>(ys.size()), kChannels);

            out.classifier.unpack(params);
            Eigen::VectorXd grad;
            const DiceCeResult res = network_loss_grad(out.classifier, x, ys, &grad);
            if (!std::isfinite(res.loss))
                throw numeric_error("training diverged (non-finite loss) at epoch " +
                                    std::to_string(epoch));
            adam.step(params, grad, lr);
            epoch_loss += res.loss;
        }

        out.classifier.unpack(params);
        if (epoch >= cfg.epochs - cfg.swa_window) {
            swa_sum += params;
            ++swa_count;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = batches > 0 ? epoch_loss / batches : 0.0;
        stats.val_loss = detail::evaluate_loss(out.classifier, val_set);
        out.history.push_back(stats);
    }

    if (swa_count > 0) out.classifier.unpack(swa_sum / swa_count);
    return out;
}

// ---------------------------------------------------------------------------
// Ensemble prediction
// ---------------------------------------------------------------------------

struct Prediction {
    SegmentationMask labels;         // argmax of the mean softmax
    Eigen::MatrixXd mean_softmax;    // pixel-major rows, one column per class
};

/// Mean softmax over all ensemble members; argmax ties break to the lowest
/// class id.
inline Prediction ensemble_predict(std::span<const PixelClassifier* const> members,
                                   const SpectralCube& cube) {
    if (members.empty()) throw std::invalid_argument("ensemble_predict: no classifiers");
    const int n = cube.pixel_count();
    Eigen::MatrixXd x(n, kChannels);
    for (int p = 0; p < n; ++p) x.row(p) = cube.spectrum(p).cast<double>().transpose();

    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, members.front()->num_classes());
    for (const PixelClassifier* clf : members) mean += softmax(clf->forward(x));
    mean /= static_cast<double>(members.size());

    Prediction pred;
    pred.labels = SegmentationMask(cube.width, cube.height);
    for (int p = 0; p < n; ++p) {
        int best = 0;
        for (int c = 1; c < mean.cols(); ++c)
            if (mean(p, c) > mean(p, best)) best = c;
        pred.labels.labels[p] = static_cast<std::uint8_t>(best);
    }
    pred.mean_softmax = std::move(mean);
    return pred;
}

// ---------------------------------------------------------------------------
// Checkpoint and history files
// ---------------------------------------------------------------------------

// Checkpoint `.pxc`: magic "PXC1", u32 version, u32 n_dims, u32 dims[],
// then f32 LE parameters in pack() order.
inline void write_classifier(const std::filesystem::path& path, const PixelClassifier& clf) {
    auto out = pxt::detail::open_out(path);
    out.write("PXC1", 4);
    pxt::detail::put_u32(out, 1);
    pxt::detail::put_u32(out, static_cast<std::uint32_t>(clf.dims.size()));
    for (int d : clf.dims) pxt::detail::put_u32(out, static_cast<std::uint32_t>(d));
    const Eigen::VectorXd params = clf.pack();
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const float v = static_cast<float>(params[i]);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    if (!out) throw io_error("short write: " + path.string());
}

inline PixelClassifier read_classifier(const std::filesystem::path& path) {
    auto in = pxt::detail::open_in(path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PXC1", 4) != 0)
        throw io_error("not a classifier checkpoint (bad magic): " + path.string());
    if (pxt::detail::get_u32(in) != 1)
        throw io_error("unsupported checkpoint version: " + path.string());
    const std::uint32_t n_dims = pxt::detail::get_u32(in);
    if (n_dims < 2 || n_dims > 64) throw io_error("bad layer count in " + path.string());
    std::vector<int> dims(n_dims);
    for (auto& d : dims) d = static_cast<int>(pxt::detail::get_u32(in));

    PixelClassifier clf;
    clf.dims = dims;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        clf.weights.push_back(Eigen::MatrixXd::Zero(dims[l + 1], dims[l]));
        clf.biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
    }
    Eigen::VectorXd params(clf.param_count());
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        float v = 0.0f;
        in.read(reinterpret_cast<char*>(&v), 4);
        params[i] = v;
    }
    if (!in) throw io_error("truncated checkpoint: " + path.string());
    clf.unpack(params);
    return clf;
}

/// Training history as JSON lines: {"epoch", "lr", "train_loss", "val_loss"}.
inline void write_history(const std::filesystem::path& path,
                          const std::vector<EpochStats>& history) {
    std::string text;
    for (const auto& e : history) {
        nlohmann::json j{{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss}};
        if (std::isfinite(e.val_loss))
            j["val_loss"] = e.val_loss;
        else
            j["val_loss"] = nullptr;
        text += j.dump() + "\n";
    }
    atomic_write_text(path, text);
}

} // namespace pxt::model
