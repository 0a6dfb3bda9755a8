// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "duetgraph/model/graph.hpp"
#include "duetgraph/model/layers.hpp"

namespace duetgraph::model {

/// LSTM cell whose gate pre-activations come from an edge-typed GCN over
/// [x_t || h]. Gate blocks in the 4H output are ordered i, f, o, g.
template <class T>
struct LstmStepCache {
  TypedGcnCache<T> gcn;
  Mat<T> i, f, o, g;
  Mat<T> c_prev, tanh_c;
};

template <class T>
struct LstmState {
  Mat<T> h;
  Mat<T> c;
};

template <class T>
LstmState<T> gcn_lstm_cell(const Mat<T>& x, const LstmState<T>& state, const Topology& topo,
                           const Mat<T>& assignment, const TypedGcn<T>& layer, LstmStepCache<T>* cache = nullptr) {
  const auto hdim = state.h.cols();
  if (state.c.cols() != hdim || state.c.rows() != state.h.rows() || x.rows() != state.h.rows())
    throw ShapeMismatch("gcn_lstm_cell: x, h and c must share the node dimension");
  Mat<T> u(x.rows(), x.cols() + hdim);
  u << x, state.h;
  TypedGcnCache<T> gc;
  const Mat<T> pre = typed_gcn(u, topo, assignment, layer, cache ? &gc : nullptr);
  if (pre.cols() != 4 * hdim) throw ShapeMismatch("gcn_lstm_cell: gate layer must output 4H columns");

  const auto sig = [](T v) { return sigmoid(v); };
  Mat<T> i = pre.leftCols(hdim).unaryExpr(sig);
  Mat<T> f = pre.middleCols(hdim, hdim).unaryExpr(sig);
  Mat<T> o = pre.middleCols(2 * hdim, hdim).unaryExpr(sig);
  Mat<T> g = pre.rightCols(hdim).array().tanh().matrix();

  LstmState<T> next;
  next.c = (f.array() * state.c.array() + i.array() * g.array()).matrix();
  Mat<T> tanh_c = next.c.array().tanh().matrix();
  next.h = (o.array() * tanh_c.array()).matrix();
  if (cache) {
    cache->gcn = std::move(gc);
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->o = std::move(o);
    cache->g = std::move(g);
    cache->c_prev = state.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

/// Backward through one cell. Takes dL/dh', dL/dc'; returns dL/dx, dL/dh, dL/dc.
template <class T>
struct LstmStepGrad {
  Mat<T> dx, dh, dc;
};

template <class T>
LstmStepGrad<T> gcn_lstm_cell_backward(const Topology& topo, const Mat<T>& assignment, const TypedGcn<T>& layer,
                                       const LstmStepCache<T>& cache, const Mat<T>& dh_next, const Mat<T>& dc_next,
                                       TypedGcn<T>& grad, Mat<T>& d_assignment) {
  const auto hdim = dh_next.cols();
  const auto& oa = cache.o.array();
  const auto& tc = cache.tanh_c.array();
  const Mat<T> dc = (dc_next.array() + dh_next.array() * oa * (T(1) - tc * tc)).matrix();
  const Mat<T> d_o = (dh_next.array() * tc).matrix();
  const Mat<T> d_i = (dc.array() * cache.g.array()).matrix();
  const Mat<T> d_g = (dc.array() * cache.i.array()).matrix();
  const Mat<T> d_f = (dc.array() * cache.c_prev.array()).matrix();

  Mat<T> dpre(dh_next.rows(), 4 * hdim);
  dpre.leftCols(hdim) = (d_i.array() * cache.i.array() * (T(1) - cache.i.array())).matrix();
  dpre.middleCols(hdim, hdim) = (d_f.array() * cache.f.array() * (T(1) - cache.f.array())).matrix();
  dpre.middleCols(2 * hdim, hdim) = (d_o.array() * oa * (T(1) - oa)).matrix();
  dpre.rightCols(hdim) = (d_g.array() * (T(1) - cache.g.array().square())).matrix();

  const Mat<T> du = typed_gcn_backward(topo, assignment, layer, cache.gcn, dpre, grad, d_assignment);
  const auto xdim = du.cols() - hdim;
  return {du.leftCols(xdim), du.rightCols(hdim), (dc.array() * cache.f.array()).matrix()};
}

}  // namespace duetgraph::model
