// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "duetgraph/core/rng.hpp"
#include "duetgraph/model/config.hpp"
#include "duetgraph/model/graph.hpp"
#include "duetgraph/model/layers.hpp"

namespace duetgraph::model {

/// Every trainable tensor of the encoder/decoder, plus the batch-norm
/// running statistics (buffers, not trained). Shapes for hidden size H,
/// sequence length L, feature width F and n edge types:
///
///   enc_gcn1  [L*F, H]    enc_fc1 [2H, H]   enc_gcn2 [H, H]
///   enc_fc2   [3H, H]     enc_out [H, n]
///   dec_lstm  n x [F+H, 4H] (gates i, f, o, g side by side)
///   dec_fc    [2H, H]     dec_out n x [H, F]
template <class T>
struct Parameters {
  Affine<T> enc_gcn1, enc_fc1, enc_gcn2, enc_fc2, enc_out;
  BatchNorm<T> enc_bn;
  TypedGcn<T> dec_lstm;
  Affine<T> dec_fc;
  BatchNorm<T> dec_bn;
  TypedGcn<T> dec_out;

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  template <class F>
  void visit_buffers(F&& f) {
    visit_buffers_impl(*this, f);
  }
  template <class F>
  void visit_buffers(F&& f) const {
    visit_buffers_impl(*this, f);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Mat<T>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& p, F& f) {
    auto affine = [&](const std::string& name, auto& a) {
      f(name + ".weight", a.weight);
      f(name + ".bias", a.bias);
    };
    auto typed = [&](const std::string& name, auto& a) {
      for (std::size_t k = 0; k < a.weights.size(); ++k) f(name + ".weight" + std::to_string(k), a.weights[k]);
      f(name + ".bias", a.bias);
    };
    affine("enc_gcn1", p.enc_gcn1);
    affine("enc_fc1", p.enc_fc1);
    f(std::string("enc_bn.gamma"), p.enc_bn.gamma);
    f(std::string("enc_bn.beta"), p.enc_bn.beta);
    affine("enc_gcn2", p.enc_gcn2);
    affine("enc_fc2", p.enc_fc2);
    affine("enc_out", p.enc_out);
    typed("dec_lstm", p.dec_lstm);
    affine("dec_fc", p.dec_fc);
    f(std::string("dec_bn.gamma"), p.dec_bn.gamma);
    f(std::string("dec_bn.beta"), p.dec_bn.beta);
    typed("dec_out", p.dec_out);
  }

  template <class Self, class F>
  static void visit_buffers_impl(Self& p, F& f) {
    f(std::string("enc_bn.running_mean"), p.enc_bn.running_mean);
    f(std::string("enc_bn.running_var"), p.enc_bn.running_var);
    f(std::string("dec_bn.running_mean"), p.dec_bn.running_mean);
    f(std::string("dec_bn.running_var"), p.dec_bn.running_var);
  }
};

namespace detail {

template <class T>
Affine<T> zero_affine(std::size_t in, std::size_t out) {
  return {Mat<T>::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)),
          Mat<T>::Zero(1, static_cast<Eigen::Index>(out))};
}

template <class T>
TypedGcn<T> zero_typed(std::size_t types, std::size_t in, std::size_t out) {
  TypedGcn<T> g;
  for (std::size_t k = 0; k < types; ++k)
    g.weights.push_back(Mat<T>::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)));
  g.bias = Mat<T>::Zero(1, static_cast<Eigen::Index>(out));
  return g;
}

template <class T>
BatchNorm<T> fresh_batchnorm(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return {Mat<T>::Ones(1, n), Mat<T>::Zero(1, n), Mat<T>::Zero(1, n), Mat<T>::Ones(1, n)};
}

template <class T>
void xavier(Mat<T>& w, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = static_cast<T>(uniform(rng, -a, a));
}

}  // namespace detail

/// All-zero parameters with the shapes implied by `config` (also the
/// layout of a gradient accumulator). Batch-norm scales start at one.
template <class T>
Parameters<T> zero_parameters(const ModelConfig& config) {
  const std::size_t h = config.hidden_dim, f = config.feature_dim, l = config.seq_len;
  const auto n = static_cast<std::size_t>(config.n_edge_types);
  Parameters<T> p;
  p.enc_gcn1 = detail::zero_affine<T>(l * f, h);
  p.enc_fc1 = detail::zero_affine<T>(2 * h, h);
  p.enc_bn = detail::fresh_batchnorm<T>(h);
  p.enc_gcn2 = detail::zero_affine<T>(h, h);
  p.enc_fc2 = detail::zero_affine<T>(3 * h, h);
  p.enc_out = detail::zero_affine<T>(h, n);
  p.dec_lstm = detail::zero_typed<T>(n, f + h, 4 * h);
  p.dec_fc = detail::zero_affine<T>(2 * h, h);
  p.dec_bn = detail::fresh_batchnorm<T>(h);
  p.dec_out = detail::zero_typed<T>(n, h, f);
  return p;
}

/// Gradient accumulator: like zero_parameters but batch-norm scales are zero too.
template <class T>
Parameters<T> zero_gradients(const ModelConfig& config) {
  auto g = zero_parameters<T>(config);
  g.visit([](const std::string&, Mat<T>& m) { m.setZero(); });
  return g;
}

/// Xavier-uniform weights, zero biases.
template <class T>
Parameters<T> init_parameters(const ModelConfig& config, Rng& rng) {
  auto p = zero_parameters<T>(config);
  p.visit([&](const std::string& name, Mat<T>& m) {
    if (name.find(".weight") != std::string::npos) detail::xavier(m, rng);
  });
  return p;
}

template <class U, class T>
Parameters<U> cast_parameters(const Parameters<T>& p, const ModelConfig& config) {
  auto out = zero_parameters<U>(config);
  std::vector<const Mat<T>*> src;
  p.visit([&](const std::string&, const Mat<T>& m) { src.push_back(&m); });
  p.visit_buffers([&](const std::string&, const Mat<T>& m) { src.push_back(&m); });
  std::size_t i = 0;
  out.visit([&](const std::string&, Mat<U>& m) { m = src[i++]->template cast<U>(); });
  out.visit_buffers([&](const std::string&, Mat<U>& m) { m = src[i++]->template cast<U>(); });
  return out;
}

}  // namespace duetgraph::model
