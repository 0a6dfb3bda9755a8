// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>

#include "duetgraph/core/rng.hpp"
#include "duetgraph/model/tensor.hpp"

namespace duetgraph::model {

template <class T>
Mat<T> elu(const Mat<T>& x) {
  return x.unaryExpr([](T v) { return v > T(0) ? v : std::expm1(v); });
}

/// dL/dx given the ELU output y (y + 1 = exp(x) on the negative branch).
template <class T>
Mat<T> elu_backward(const Mat<T>& y, const Mat<T>& dy) {
  return dy.binaryExpr(y, [](T g, T out) { return out > T(0) ? g : g * (out + T(1)); });
}

template <class T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

/// Row-wise softmax.
template <class T>
Mat<T> softmax_rows(const Mat<T>& x) {
  Mat<T> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

/// Row-wise log-softmax.
template <class T>
Mat<T> log_softmax_rows(const Mat<T>& x) {
  Mat<T> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T m = x.row(r).maxCoeff();
    const T lse = m + std::log((x.row(r).array() - m).exp().sum());
    y.row(r) = (x.row(r).array() - lse).matrix();
  }
  return y;
}

/// Batch normalisation over the rows of one sample (the edges of a window).
template <class T>
struct BatchNorm {
  Mat<T> gamma;         // [1, d]
  Mat<T> beta;          // [1, d]
  Mat<T> running_mean;  // [1, d], buffer
  Mat<T> running_var;   // [1, d], buffer
};

template <class T>
struct BatchNormCache {
  Mat<T> normalized;
  Mat<T> inv_std;  // [1, d]
  Mat<T> batch_mean;
  Mat<T> batch_var;  // unbiased, for the running estimate
  bool training = false;
};

inline constexpr double kBatchNormEps = 1e-5;

template <class T>
Mat<T> batchnorm(const Mat<T>& x, const BatchNorm<T>& bn, bool training, BatchNormCache<T>& cache) {
  const auto n = x.rows();
  Mat<T> mean, var;
  if (training) {
    mean = x.colwise().mean();
    Mat<T> centered = x.rowwise() - mean.row(0);
    var = centered.array().square().colwise().sum().matrix() / static_cast<T>(n);
    cache.batch_mean = mean;
    cache.batch_var = n > 1 ? Mat<T>(var * (static_cast<T>(n) / static_cast<T>(n - 1))) : var;
  } else {
    mean = bn.running_mean;
    var = bn.running_var;
  }
  cache.training = training;
  cache.inv_std = (var.array() + static_cast<T>(kBatchNormEps)).rsqrt().matrix();
  cache.normalized = (x.rowwise() - mean.row(0)).array().rowwise() * cache.inv_std.row(0).array();
  Mat<T> y = cache.normalized.array().rowwise() * bn.gamma.row(0).array();
  y.rowwise() += bn.beta.row(0);
  return y;
}

template <class T>
Mat<T> batchnorm_backward(const BatchNorm<T>& bn, const BatchNormCache<T>& cache, const Mat<T>& dy,
                          BatchNorm<T>& grad) {
  grad.gamma += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  grad.beta += dy.colwise().sum();
  Mat<T> dxhat = dy.array().rowwise() * bn.gamma.row(0).array();
  if (!cache.training) return dxhat.array().rowwise() * cache.inv_std.row(0).array();
  const auto n = static_cast<T>(dy.rows());
  const Mat<T> mean_dxhat = dxhat.colwise().sum() / n;
  const Mat<T> mean_dxhat_xhat = (dxhat.array() * cache.normalized.array()).colwise().sum().matrix() / n;
  Mat<T> dx = dxhat.rowwise() - mean_dxhat.row(0);
  dx -= (cache.normalized.array().rowwise() * mean_dxhat_xhat.row(0).array()).matrix();
  return dx.array().rowwise() * cache.inv_std.row(0).array();
}

/// Inverted dropout mask: entries are 0 or 1 / (1 - p).
template <class T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Mat<T> mask(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = uniform01(rng) < p ? T(0) : keep;
  return mask;
}

}  // namespace duetgraph::model
