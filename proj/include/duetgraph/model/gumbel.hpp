// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "duetgraph/core/error.hpp"
#include "duetgraph/core/rng.hpp"
#include "duetgraph/model/layers.hpp"
#include "duetgraph/model/tensor.hpp"

namespace duetgraph::model {

/// Edge-type weights drawn from the Gumbel-Softmax relaxation.
/// `assignment` is what the decoder consumes (one-hot rows when hard);
/// `soft` is the relaxed sample the straight-through gradient flows through.
template <class T>
struct SampledEdges {
  Mat<T> assignment;
  Mat<T> soft;
  bool hard = false;
};

template <class T>
Mat<T> gumbel_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat<T> g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = static_cast<T>(standard_gumbel(rng));
  return g;
}

/// One-hot of the row-wise argmax; ties go to the lowest index.
template <class T>
Mat<T> one_hot_argmax(const Mat<T>& x) {
  Mat<T> y = Mat<T>::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < x.cols(); ++c)
      if (x(r, c) > x(r, best)) best = c;
    y(r, best) = T(1);
  }
  return y;
}

/// softmax((logits + noise) / tau) with explicit noise, so callers can freeze it.
template <class T>
SampledEdges<T> gumbel_softmax_with_noise(const Mat<T>& logits, const Mat<T>& noise, double tau, bool hard) {
  if (!(tau > 0.0)) throw ShapeMismatch("gumbel_softmax: temperature must be > 0");
  SampledEdges<T> out;
  out.soft = softmax_rows<T>((logits + noise) / static_cast<T>(tau));
  out.hard = hard;
  out.assignment = hard ? one_hot_argmax<T>(logits + noise) : out.soft;
  return out;
}

template <class T>
SampledEdges<T> gumbel_softmax(const Mat<T>& logits, double tau, bool hard, Rng& rng) {
  return gumbel_softmax_with_noise<T>(logits, gumbel_noise<T>(logits.rows(), logits.cols(), rng), tau, hard);
}

/// dL/dlogits from dL/dassignment. Hard samples use the straight-through
/// estimator: the gradient is taken through the soft sample.
template <class T>
Mat<T> gumbel_softmax_backward(const SampledEdges<T>& s, const Mat<T>& d_assignment, double tau) {
  Mat<T> dz(s.soft.rows(), s.soft.cols());
  for (Eigen::Index r = 0; r < s.soft.rows(); ++r) {
    const T inner = d_assignment.row(r).dot(s.soft.row(r));
    dz.row(r) = (s.soft.row(r).array() * (d_assignment.row(r).array() - inner)).matrix();
  }
  return dz / static_cast<T>(tau);
}

}  // namespace duetgraph::model
