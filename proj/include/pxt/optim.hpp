/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/optim.hpp
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
#include <stdexcept>

#include "pxt/common.hpp"

namespace pxt {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam over a flat parameter vector, with bias-corrected first and second
/// moments:
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
class Adam {
  public:
    Adam(AdamConfig cfg, Eigen::Index n)
        : cfg_(cfg), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

    /// One update in place. `lr` overrides the configured learning rate when
    /// nonnegative (used for scheduled rates).
    void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad,
              double lr = -1.0) {
        if (params.size() != m_.size() || grad.size() != m_.size())
            throw std::invalid_argument("Adam: parameter/gradient size mismatch");
        const double rate = lr >= 0.0 ? lr : cfg_.learning_rate;
        ++t_;
        m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
        v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
        params -= rate * (m_ / c1).cwiseQuotient(((v_ / c2).cwiseSqrt().array() + cfg_.epsilon).matrix());
    }

    long steps_taken() const { return t_; }

  private:
    AdamConfig cfg_;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

} // namespace pxt
