// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// Test-only helpers: random fixtures and the central-difference gradient oracle.

#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "duetgraph/core/rng.hpp"
#include "duetgraph/model/nri.hpp"
#include "duetgraph/pose/cleaning.hpp"

namespace duetgraph::testing {

using model::Mat;

template <class T = double>
Mat<T> random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<T>(scale * standard_normal(rng));
  return m;
}

/// Two groups of `per_side` nodes joined by the dense bipartite candidate graph.
inline model::Topology bipartite_topology(int per_side) {
  std::vector<int> a, b;
  for (int i = 0; i < per_side; ++i) {
    a.push_back(i);
    b.push_back(per_side + i);
  }
  return model::Topology(static_cast<std::size_t>(2 * per_side), model::bipartite_edges(a, b));
}

inline model::ModelConfig tiny_config(std::size_t hidden = 8) {
  model::ModelConfig cfg;
  cfg.hidden_dim = hidden;
  cfg.n_edge_types = 2;
  cfg.prior = {0.7, 0.3};
  cfg.seq_len = 3;
  cfg.feature_dim = 6;
  cfg.dropout_p = 0.0;
  return cfg;
}

template <class T = double>
model::Window<T> random_window(const model::ModelConfig& cfg, std::size_t nodes, Rng& rng) {
  return {random_matrix<T>(static_cast<Eigen::Index>(cfg.seq_len * nodes), static_cast<Eigen::Index>(cfg.feature_dim), rng),
          random_matrix<T>(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(cfg.feature_dim), rng)};
}

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
};

/// Relative error |a - n| / max(|a|, |n|, floor), elementwise.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares `analytic` with central differences of `loss` w.r.t. every tensor
/// of `params`. `loss` must be a deterministic function of the parameters.
inline std::vector<GradCheckEntry> finite_difference_check(model::Parameters<double>& params,
                                                           const model::Parameters<double>& analytic,
                                                           const std::function<double()>& loss, double step = 1e-5) {
  std::vector<Mat<double>*> values;
  std::vector<std::string> names;
  params.visit([&](const std::string& name, Mat<double>& m) {
    values.push_back(&m);
    names.push_back(name);
  });
  std::vector<const Mat<double>*> grads;
  analytic.visit([&](const std::string&, const Mat<double>& m) { grads.push_back(&m); });

  std::vector<GradCheckEntry> out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    GradCheckEntry entry{names[k]};
    Mat<double>& m = *values[k];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + step;
      const double up = loss();
      m.data()[i] = orig - step;
      const double down = loss();
      m.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grads[k]->data()[i];
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(a, numeric));
      entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(a));
    }
    out.push_back(entry);
  }
  return out;
}

// --- pose oracles -------------------------------------------------------------

/// Orthonormal DCT-II straight from the definition, O(T^2).
inline std::vector<double> naive_dct2(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> c(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      acc += x[t] * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(t) + 1.0) /
                             (2.0 * static_cast<double>(n)));
    c[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return c;
}

/// Orthonormal DCT-III (inverse of naive_dct2), O(T^2).
inline std::vector<double> naive_idct2(const std::vector<double>& c) {
  const std::size_t n = c.size();
  std::vector<double> x(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      acc += c[k] * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n)) *
             std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(t) + 1.0) /
                      (2.0 * static_cast<double>(n)));
    x[t] = acc;
  }
  return x;
}

inline std::vector<double> naive_lowpass(const std::vector<double>& x, std::size_t keep) {
  auto c = naive_dct2(x);
  for (std::size_t k = keep; k < c.size(); ++k) c[k] = 0.0;
  return naive_idct2(c);
}

/// A two-dancer stream with known identities and injected label swaps.
struct SwapCase {
  pose::RawFrameStream stream;              // as the tracker reported it
  std::vector<std::array<pose::Joints, 2>> truth;  // true person 0 / person 1
  std::vector<bool> swapped;                // tracker order reversed at frame t
  std::size_t swap_events = 0;
};

/// Dancers stay at least `separation` apart joint-for-joint; every joint moves
/// by less than `max_step` per frame.
inline SwapCase make_swap_case(Rng& rng, std::size_t frames, double swap_prob, double separation = 0.5,
                               double max_step = 0.1) {
  SwapCase out;
  pose::Joints base = pose::Joints::Zero();
  for (Eigen::Index i = 0; i < base.size(); ++i) base.data()[i] = uniform(rng, -0.5, 0.5);
  const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  // Both dancers take the same per-frame step, so the gap never changes.
  const Eigen::RowVector3d gap(std::cos(angle) * (separation + 0.5), std::sin(angle) * (separation + 0.5), 0.0);
  std::array<pose::Joints, 2> cur{base, base};
  cur[1].rowwise() += gap;
  bool swapped = false;
  for (std::size_t t = 0; t < frames; ++t) {
    if (t > 0) {
      for (Eigen::Index j = 0; j < pose::kNumJoints; ++j) {
        Eigen::RowVector3d step(standard_normal(rng), standard_normal(rng), standard_normal(rng));
        step *= uniform(rng, 0.0, max_step * 0.99) / std::max(step.norm(), 1e-12);
        for (auto& d : cur) d.row(j) += step;
      }
      if (uniform01(rng) < swap_prob) {
        swapped = !swapped;
        ++out.swap_events;
      }
    }
    out.truth.push_back(cur);
    out.swapped.push_back(swapped);
    pose::FrameRecord f;
    f.detections = {{cur[swapped ? 1 : 0], 0.9, 0}, {cur[swapped ? 0 : 1], 0.9, 1}};
    out.stream.frames.push_back(std::move(f));
  }
  return out;
}

/// Per frame, the label order (identity or crossed) that best matches the
/// true previous frame, found by trying both assignments.
inline std::vector<bool> oracle_swaps(const SwapCase& c) {
  std::vector<bool> out{false};
  for (std::size_t t = 1; t < c.stream.frames.size(); ++t) {
    const auto& det = c.stream.frames[t].detections;
    const auto& prev = c.truth[t - 1];
    double best = std::numeric_limits<double>::infinity();
    bool best_cross = false;
    for (bool cross : {false, true}) {
      const double cost = pose::pose_distance(det[cross ? 1 : 0].joints, prev[0]) +
                          pose::pose_distance(det[cross ? 0 : 1].joints, prev[1]);
      if (cost < best) {
        best = cost;
        best_cross = cross;
      }
    }
    out.push_back(best_cross);
  }
  return out;
}

}  // namespace duetgraph::testing
