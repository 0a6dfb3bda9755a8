// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "duetgraph/model/parameters.hpp"

namespace duetgraph::train {

/// Adaptive moment estimation over every tensor of a Parameters set.
template <class T>
class Adam {
 public:
  explicit Adam(const model::ModelConfig& config, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(model::zero_gradients<T>(config)), v_(model::zero_gradients<T>(config)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(model::Parameters<T>& params, const model::Parameters<T>& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::vector<model::Mat<T>*> ps, ms, vs;
    std::vector<const model::Mat<T>*> gs;
    params.visit([&](const std::string&, model::Mat<T>& x) { ps.push_back(&x); });
    m_.visit([&](const std::string&, model::Mat<T>& x) { ms.push_back(&x); });
    v_.visit([&](const std::string&, model::Mat<T>& x) { vs.push_back(&x); });
    grad.visit([&](const std::string&, const model::Mat<T>& x) { gs.push_back(&x); });
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T step_size = static_cast<T>(lr / c1), inv_c2 = static_cast<T>(1.0 / c2), eps = static_cast<T>(eps_);
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto& m = *ms[k];
      auto& v = *vs[k];
      const auto& g = *gs[k];
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.cwiseAbs2();
      ps[k]->array() -= step_size * m.array() / ((v.array() * inv_c2).sqrt() + eps);
    }
  }

  long steps() const { return t_; }

 private:
  model::Parameters<T> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace duetgraph::train
