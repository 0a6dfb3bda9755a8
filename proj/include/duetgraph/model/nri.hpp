// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// Encoder / decoder of the relational model and the ELBO objective, each with
// an explicit backward pass.
//
// Encoder:  GCN -> node2edge -> linear(+BN)+dropout = S -> edge2node -> GCN
//           -> node2edge -> [.|| S] -> linear -> logits          (ELU between)
// Decoder:  GCN-LSTM over the window -> node2edge -> linear(+BN)+dropout,
//           gated by the sampled edge weight -> edge2node (+ LSTM state)
//           -> typed GCN -> next-frame residual.

#pragma once

#include <cmath>
#include <cstddef>
#include <type_traits>
#include <string>
#include <vector>

#include "duetgraph/core/error.hpp"
#include "duetgraph/core/rng.hpp"
#include "duetgraph/model/config.hpp"
#include "duetgraph/model/graph.hpp"
#include "duetgraph/model/gumbel.hpp"
#include "duetgraph/model/layers.hpp"
#include "duetgraph/model/lstm.hpp"
#include "duetgraph/model/parameters.hpp"

namespace duetgraph::model {

/// One training/evaluation sample: L input frames and the frame that follows.
template <class T>
struct Window {
  Mat<T> inputs;  // [L * J, F], frame-major
  Mat<T> target;  // [J, F]

  Mat<T> frame(std::size_t t, std::size_t nodes) const {
    return inputs.middleRows(static_cast<Eigen::Index>(t * nodes), static_cast<Eigen::Index>(nodes));
  }
};

/// Logits [E, n] over edge types for every candidate edge.
template <class T>
struct EdgePosterior {
  Mat<T> logits;

  Mat<T> probabilities() const { return softmax_rows<T>(logits); }
};

struct ForwardMode {
  bool training = true;  // dropout on, batch-norm uses sample statistics
  bool hard = true;      // one-hot edge samples with straight-through gradients
  bool noise = true;     // add Gumbel noise; off means softmax(logits / tau)
};

inline void check_window_shape(std::size_t rows, std::size_t cols, const ModelConfig& cfg, const Topology& g) {
  if (rows != cfg.seq_len * g.num_nodes() || cols != cfg.feature_dim)
    throw ShapeMismatch("window must be [seq_len * J, feature_dim] = [" + std::to_string(cfg.seq_len * g.num_nodes()) +
                        ", " + std::to_string(cfg.feature_dim) + "], got [" + std::to_string(rows) + ", " +
                        std::to_string(cols) + "]");
}

// ---------------------------------------------------------------- encoder

template <class T>
struct EncoderCache {
  Mat<T> flat;
  GcnCache<T> gcn1;
  Mat<T> h1, e1, a2;
  BatchNormCache<T> bn;
  Mat<T> bn_out, drop_mask, skip;
  GcnCache<T> gcn2;
  Mat<T> h3, concat, h4;
};

/// Per-node input: the L frames of that node, flattened to L * F features.
template <class T>
Mat<T> flatten_frames(const Mat<T>& inputs, std::size_t nodes, std::size_t seq_len) {
  const auto f = inputs.cols();
  Mat<T> flat(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(seq_len) * f);
  for (std::size_t t = 0; t < seq_len; ++t)
    flat.middleCols(static_cast<Eigen::Index>(t) * f, f) =
        inputs.middleRows(static_cast<Eigen::Index>(t * nodes), static_cast<Eigen::Index>(nodes));
  return flat;
}

template <class T>
EdgePosterior<T> encode(const Mat<T>& inputs, const Topology& g, const Parameters<T>& p, const ModelConfig& cfg,
                        const ForwardMode& mode, Rng& rng, EncoderCache<T>* cache = nullptr) {
  check_window_shape(static_cast<std::size_t>(inputs.rows()), static_cast<std::size_t>(inputs.cols()), cfg, g);
  EncoderCache<T> local;
  EncoderCache<T>& c = cache ? *cache : local;

  c.flat = flatten_frames(inputs, g.num_nodes(), cfg.seq_len);
  c.h1 = elu<T>(gcn_layer(c.flat, g, p.enc_gcn1, &c.gcn1));
  c.e1 = node_to_edge(c.h1, g);
  c.a2 = elu<T>(linear(c.e1, p.enc_fc1));
  c.bn_out = cfg.use_batchnorm ? batchnorm(c.a2, p.enc_bn, mode.training, c.bn) : c.a2;
  const bool drop = mode.training && cfg.dropout_p > 0.0;
  if (drop) {
    c.drop_mask = dropout_mask<T>(c.bn_out.rows(), c.bn_out.cols(), cfg.dropout_p, rng);
    c.skip = c.bn_out.cwiseProduct(c.drop_mask);
  } else {
    c.drop_mask.resize(0, 0);
    c.skip = c.bn_out;
  }
  const Mat<T> n2 = edge_to_node(c.skip, g);
  c.h3 = elu<T>(gcn_layer(n2, g, p.enc_gcn2, &c.gcn2));
  const Mat<T> e3 = node_to_edge(c.h3, g);
  c.concat.resize(e3.rows(), e3.cols() + c.skip.cols());
  c.concat << e3, c.skip;
  c.h4 = elu<T>(linear(c.concat, p.enc_fc2));
  return {linear(c.h4, p.enc_out)};
}

template <class T>
void encode_backward(const Topology& g, const Parameters<T>& p, const ModelConfig& cfg, const EncoderCache<T>& c,
                     const Mat<T>& d_logits, Parameters<T>& grad) {
  const Mat<T> dh4 = linear_backward(c.h4, p.enc_out, d_logits, grad.enc_out);
  const Mat<T> dconcat = linear_backward(c.concat, p.enc_fc2, elu_backward(c.h4, dh4), grad.enc_fc2);
  const auto hid = c.h3.cols();
  const Mat<T> de3 = dconcat.leftCols(2 * hid);
  Mat<T> dskip = dconcat.rightCols(dconcat.cols() - 2 * hid);

  const Mat<T> dh3 = node_to_edge_backward(de3, g);
  const Mat<T> dn2 = gcn_layer_backward(g, p.enc_gcn2, c.gcn2, elu_backward(c.h3, dh3), grad.enc_gcn2);
  dskip += edge_to_node_backward(dn2, g);

  Mat<T> dbn = c.drop_mask.size() ? Mat<T>(dskip.cwiseProduct(c.drop_mask)) : dskip;
  const Mat<T> da2 = cfg.use_batchnorm ? batchnorm_backward(p.enc_bn, c.bn, dbn, grad.enc_bn) : dbn;
  const Mat<T> de1 = linear_backward(c.e1, p.enc_fc1, elu_backward(c.a2, da2), grad.enc_fc1);
  const Mat<T> dh1 = node_to_edge_backward(de1, g);
  gcn_layer_backward(g, p.enc_gcn1, c.gcn1, elu_backward(c.h1, dh1), grad.enc_gcn1);
}

// ---------------------------------------------------------------- decoder

template <class T>
struct DecoderCache {
  std::vector<LstmStepCache<T>> steps;
  Mat<T> h_final, e5, a5;
  BatchNormCache<T> bn;
  Mat<T> bn_out, drop_mask, r, edge_weight;
  TypedGcnCache<T> out_gcn;
};

/// Sum of the non-"no connection" weights of each edge, [E, 1].
template <class T>
Mat<T> active_weight(const Mat<T>& assignment) {
  return assignment.rightCols(assignment.cols() - 1).rowwise().sum();
}

/// Predicts frame L + 1 (all F features) from the L input frames.
template <class T>
Mat<T> decode(const Mat<T>& inputs, const Mat<T>& assignment, const Topology& g, const Parameters<T>& p,
              const ModelConfig& cfg, const ForwardMode& mode, Rng& rng, DecoderCache<T>* cache = nullptr) {
  check_window_shape(static_cast<std::size_t>(inputs.rows()), static_cast<std::size_t>(inputs.cols()), cfg, g);
  if (static_cast<std::size_t>(assignment.rows()) != g.num_edges() || assignment.cols() != cfg.n_edge_types)
    throw ShapeMismatch("decode: sampled edges must be [E, n_edge_types]");
  DecoderCache<T> local;
  DecoderCache<T>& c = cache ? *cache : local;
  const auto nodes = static_cast<Eigen::Index>(g.num_nodes());
  const auto hid = static_cast<Eigen::Index>(cfg.hidden_dim);

  LstmState<T> state{Mat<T>::Zero(nodes, hid), Mat<T>::Zero(nodes, hid)};
  c.steps.assign(cfg.seq_len, {});
  for (std::size_t t = 0; t < cfg.seq_len; ++t)
    state = gcn_lstm_cell(inputs.middleRows(static_cast<Eigen::Index>(t) * nodes, nodes).eval(), state, g, assignment,
                          p.dec_lstm, &c.steps[t]);
  c.h_final = state.h;

  c.e5 = node_to_edge(c.h_final, g);
  c.a5 = elu<T>(linear(c.e5, p.dec_fc));
  c.bn_out = cfg.use_batchnorm ? batchnorm(c.a5, p.dec_bn, mode.training, c.bn) : c.a5;
  if (mode.training && cfg.dropout_p > 0.0) {
    c.drop_mask = dropout_mask<T>(c.bn_out.rows(), c.bn_out.cols(), cfg.dropout_p, rng);
    c.r = c.bn_out.cwiseProduct(c.drop_mask);
  } else {
    c.drop_mask.resize(0, 0);
    c.r = c.bn_out;
  }
  c.edge_weight = active_weight(assignment);
  const Mat<T> gated = c.r.array().colwise() * c.edge_weight.col(0).array();
  const Mat<T> n6 = edge_to_node(gated, g) + c.h_final;
  const Mat<T> delta = typed_gcn(n6, g, assignment, p.dec_out, &c.out_gcn);
  return inputs.bottomRows(nodes) + delta;
}

template <class T>
Mat<T> decode_backward(const Mat<T>& assignment, const Topology& g, const Parameters<T>& p, const ModelConfig& cfg,
                       const DecoderCache<T>& c, const Mat<T>& d_pred, Parameters<T>& grad) {
  Mat<T> d_assign = Mat<T>::Zero(assignment.rows(), assignment.cols());
  const Mat<T> dn6 = typed_gcn_backward(g, assignment, p.dec_out, c.out_gcn, d_pred, grad.dec_out, d_assign);

  Mat<T> dh = dn6;
  const Mat<T> dgated = edge_to_node_backward(dn6, g);
  const Mat<T> dweight = (dgated.array() * c.r.array()).rowwise().sum().matrix();
  for (Eigen::Index k = 1; k < d_assign.cols(); ++k) d_assign.col(k) += dweight.col(0);
  const Mat<T> dr = dgated.array().colwise() * c.edge_weight.col(0).array();
  const Mat<T> dbn = c.drop_mask.size() ? Mat<T>(dr.cwiseProduct(c.drop_mask)) : dr;
  const Mat<T> da5 = cfg.use_batchnorm ? batchnorm_backward(p.dec_bn, c.bn, dbn, grad.dec_bn) : dbn;
  const Mat<T> de5 = linear_backward(c.e5, p.dec_fc, elu_backward(c.a5, da5), grad.dec_fc);
  dh += node_to_edge_backward(de5, g);

  Mat<T> dc = Mat<T>::Zero(dh.rows(), dh.cols());
  for (std::size_t t = cfg.seq_len; t-- > 0;) {
    auto sg = gcn_lstm_cell_backward(g, assignment, p.dec_lstm, c.steps[t], dh, dc, grad.dec_lstm, d_assign);
    dh = std::move(sg.dh);
    dc = std::move(sg.dc);
  }
  return d_assign;
}

// ---------------------------------------------------------------- loss

struct LossTerms {
  double total = 0.0;
  double recon_mse = 0.0;
  double kl = 0.0;
};

/// mean squared error + beta * mean_e KL(softmax(logits_e) || prior).
template <class T>
LossTerms elbo_loss(const Mat<T>& predicted, const Mat<T>& target, const EdgePosterior<T>& posterior,
                    const std::vector<double>& prior, double beta) {
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols())
    throw ShapeMismatch("elbo_loss: prediction and target shapes differ");
  if (static_cast<std::size_t>(posterior.logits.cols()) != prior.size())
    throw ShapeMismatch("elbo_loss: prior length must equal the number of edge types");
  LossTerms out;
  out.recon_mse = static_cast<double>((predicted - target).squaredNorm()) / static_cast<double>(predicted.size());
  const Mat<T> logq = log_softmax_rows<T>(posterior.logits);
  double kl = 0.0;
  for (Eigen::Index e = 0; e < logq.rows(); ++e)
    for (Eigen::Index k = 0; k < logq.cols(); ++k) {
      const double lq = static_cast<double>(logq(e, k));
      kl += std::exp(lq) * (lq - std::log(prior[static_cast<std::size_t>(k)]));
    }
  out.kl = logq.rows() > 0 ? kl / static_cast<double>(logq.rows()) : 0.0;
  out.total = out.recon_mse + beta * out.kl;
  return out;
}

template <class T>
Mat<T> kl_backward(const EdgePosterior<T>& posterior, const std::vector<double>& prior, double scale) {
  const Mat<T> logq = log_softmax_rows<T>(posterior.logits);
  Mat<T> d(logq.rows(), logq.cols());
  const T s = static_cast<T>(scale / static_cast<double>(logq.rows()));
  for (Eigen::Index e = 0; e < logq.rows(); ++e) {
    T kl_e = T(0);
    for (Eigen::Index k = 0; k < logq.cols(); ++k)
      kl_e += std::exp(logq(e, k)) * (logq(e, k) - static_cast<T>(std::log(prior[static_cast<std::size_t>(k)])));
    for (Eigen::Index k = 0; k < logq.cols(); ++k)
      d(e, k) = s * std::exp(logq(e, k)) *
                (logq(e, k) - static_cast<T>(std::log(prior[static_cast<std::size_t>(k)])) - kl_e);
  }
  return d;
}

// ---------------------------------------------------------------- full pass

template <class T>
struct WindowResult {
  LossTerms loss;
  EdgePosterior<T> posterior;
  SampledEdges<T> sampled;
  Mat<T> prediction;
  // Sample batch-norm statistics (empty unless training with batch-norm).
  Mat<T> enc_bn_mean, enc_bn_var, dec_bn_mean, dec_bn_var;
};

/// Forward pass over one window and, if `grad` is given, accumulation of
/// d(total loss)/d(parameters) into it. `noise` overrides the Gumbel draw.
template <class T>
WindowResult<T> run_window(const Window<T>& w, const Topology& g, const Parameters<T>& p, const ModelConfig& cfg,
                           double beta, const ForwardMode& mode, Rng& rng,
                           std::type_identity_t<Parameters<T>>* grad = nullptr,
                           const std::type_identity_t<Mat<T>>* noise = nullptr) {
  EncoderCache<T> ec;
  DecoderCache<T> dc;
  WindowResult<T> out;
  out.posterior = encode(w.inputs, g, p, cfg, mode, rng, &ec);
  const auto E = out.posterior.logits.rows();
  const auto n = out.posterior.logits.cols();
  if (noise) {
    out.sampled = gumbel_softmax_with_noise<T>(out.posterior.logits, *noise, cfg.temperature, mode.hard);
  } else if (mode.noise) {
    out.sampled = gumbel_softmax<T>(out.posterior.logits, cfg.temperature, mode.hard, rng);
  } else {
    out.sampled = gumbel_softmax_with_noise<T>(out.posterior.logits, Mat<T>::Zero(E, n), cfg.temperature, mode.hard);
  }
  out.prediction = decode(w.inputs, out.sampled.assignment, g, p, cfg, mode, rng, &dc);
  out.loss = elbo_loss(out.prediction, w.target, out.posterior, cfg.prior, beta);
  if (!std::isfinite(out.loss.total)) throw NonFiniteLoss("loss is not finite; lower the learning rate");

  if (mode.training && cfg.use_batchnorm) {
    out.enc_bn_mean = ec.bn.batch_mean;
    out.enc_bn_var = ec.bn.batch_var;
    out.dec_bn_mean = dc.bn.batch_mean;
    out.dec_bn_var = dc.bn.batch_var;
  }

  if (grad) {
    const Mat<T> d_pred = (out.prediction - w.target) * static_cast<T>(2.0 / static_cast<double>(out.prediction.size()));
    const Mat<T> d_assign = decode_backward(out.sampled.assignment, g, p, cfg, dc, d_pred, *grad);
    Mat<T> d_logits = gumbel_softmax_backward(out.sampled, d_assign, cfg.temperature);
    if (beta != 0.0) d_logits += kl_backward(out.posterior, cfg.prior, beta);
    encode_backward(g, p, cfg, ec, d_logits, *grad);
  }
  return out;
}

}  // namespace duetgraph::model
