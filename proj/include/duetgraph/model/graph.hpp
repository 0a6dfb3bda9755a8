// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// Graph primitives with hand-written backward passes: GCN layers over a
// symmetric-normalised adjacency, the edge-typed variant used by the decoder,
// and the node <-> edge transforms.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "duetgraph/core/error.hpp"
#include "duetgraph/model/tensor.hpp"

namespace duetgraph::model {

struct Edge {
  int source = 0;
  int target = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed candidate graph plus the coefficients of
/// A_hat = D^{-1/2} (A + I) D^{-1/2}, where A(t, s) = 1 for an edge s -> t and
/// D holds the row sums of A + I.
class Topology {
 public:
  Topology() = default;

  Topology(std::size_t num_nodes, std::vector<Edge> edges) : num_nodes_(num_nodes), edges_(std::move(edges)) {
    in_degree_.assign(num_nodes_, 0);
    for (const auto& e : edges_) {
      if (e.source < 0 || e.target < 0 || static_cast<std::size_t>(e.source) >= num_nodes_ ||
          static_cast<std::size_t>(e.target) >= num_nodes_)
        throw ShapeMismatch("edge references a node outside [0, " + std::to_string(num_nodes_) + ")");
      if (e.source == e.target) throw ShapeMismatch("self-loops are added internally; edge lists must not contain them");
      ++in_degree_[static_cast<std::size_t>(e.target)];
    }
    self_coef_.resize(num_nodes_);
    for (std::size_t j = 0; j < num_nodes_; ++j) self_coef_[j] = 1.0 / (in_degree_[j] + 1.0);
    edge_coef_.resize(edges_.size());
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const auto s = static_cast<std::size_t>(edges_[k].source);
      const auto t = static_cast<std::size_t>(edges_[k].target);
      edge_coef_[k] = 1.0 / std::sqrt((in_degree_[t] + 1.0) * (in_degree_[s] + 1.0));
    }
  }

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  int in_degree(std::size_t j) const { return in_degree_[j]; }
  double self_coef(std::size_t j) const { return self_coef_[j]; }
  double edge_coef(std::size_t e) const { return edge_coef_[e]; }

  /// Dense A_hat, for tests and oracles.
  Mat<double> dense_adjacency() const {
    Mat<double> a = Mat<double>::Zero(static_cast<Eigen::Index>(num_nodes_), static_cast<Eigen::Index>(num_nodes_));
    for (std::size_t j = 0; j < num_nodes_; ++j) a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = self_coef_[j];
    for (std::size_t k = 0; k < edges_.size(); ++k) a(edges_[k].target, edges_[k].source) += edge_coef_[k];
    return a;
  }

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> in_degree_;
  std::vector<double> self_coef_;
  std::vector<double> edge_coef_;
};

/// All ordered pairs between two node groups, both directions.
inline std::vector<Edge> bipartite_edges(std::span<const int> group_a, std::span<const int> group_b) {
  std::vector<Edge> out;
  out.reserve(2 * group_a.size() * group_b.size());
  for (int a : group_a)
    for (int b : group_b) out.push_back({a, b});
  for (int b : group_b)
    for (int a : group_a) out.push_back({b, a});
  return out;
}

/// All ordered pairs (i, j), i != j, in row-major order.
inline std::vector<Edge> complete_edges(std::size_t n) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) out.push_back({static_cast<int>(i), static_cast<int>(j)});
  return out;
}

/// Y = A_hat X.
template <class T>
Mat<T> propagate(const Topology& g, const Mat<T>& x) {
  Mat<T> y(x.rows(), x.cols());
  for (std::size_t j = 0; j < g.num_nodes(); ++j)
    y.row(static_cast<Eigen::Index>(j)) = static_cast<T>(g.self_coef(j)) * x.row(static_cast<Eigen::Index>(j));
  for (std::size_t k = 0; k < g.num_edges(); ++k) {
    const auto& e = g.edge(k);
    y.row(e.target) += static_cast<T>(g.edge_coef(k)) * x.row(e.source);
  }
  return y;
}

/// Y = A_hat^T X.
template <class T>
Mat<T> propagate_transpose(const Topology& g, const Mat<T>& x) {
  Mat<T> y(x.rows(), x.cols());
  for (std::size_t j = 0; j < g.num_nodes(); ++j)
    y.row(static_cast<Eigen::Index>(j)) = static_cast<T>(g.self_coef(j)) * x.row(static_cast<Eigen::Index>(j));
  for (std::size_t k = 0; k < g.num_edges(); ++k) {
    const auto& e = g.edge(k);
    y.row(e.source) += static_cast<T>(g.edge_coef(k)) * x.row(e.target);
  }
  return y;
}

template <class T>
struct Affine {
  Mat<T> weight;  // [d_in, d_out]
  Mat<T> bias;    // [1, d_out]
};

template <class T>
void check_shapes(const Mat<T>& x, const Affine<T>& layer, std::size_t rows, const char* what) {
  if (static_cast<std::size_t>(x.rows()) != rows || x.cols() != layer.weight.rows() ||
      layer.bias.cols() != layer.weight.cols() || layer.bias.rows() != 1)
    throw ShapeMismatch(std::string(what) + ": input [" + std::to_string(x.rows()) + ", " +
                        std::to_string(x.cols()) + "] does not fit weight [" +
                        std::to_string(layer.weight.rows()) + ", " + std::to_string(layer.weight.cols()) + "]");
}

/// Y = X W + b.
template <class T>
Mat<T> linear(const Mat<T>& x, const Affine<T>& layer) {
  if (x.cols() != layer.weight.rows()) throw ShapeMismatch("linear: input width does not match weight rows");
  Mat<T> y = x * layer.weight;
  y.rowwise() += layer.bias.row(0);
  return y;
}

/// Accumulates gradients of Y = X W + b and returns dX.
template <class T>
Mat<T> linear_backward(const Mat<T>& x, const Affine<T>& layer, const Mat<T>& dy, Affine<T>& grad) {
  grad.weight.noalias() += x.transpose() * dy;
  grad.bias += dy.colwise().sum();
  return dy * layer.weight.transpose();
}

/// GCN layer H' = A_hat H W + b.
template <class T>
struct GcnCache {
  Mat<T> propagated;  // A_hat H
};

template <class T>
Mat<T> gcn_layer(const Mat<T>& x, const Topology& g, const Affine<T>& layer, GcnCache<T>* cache = nullptr) {
  check_shapes(x, layer, g.num_nodes(), "gcn_layer");
  Mat<T> ax = propagate(g, x);
  Mat<T> y = linear(ax, layer);
  if (cache) cache->propagated = std::move(ax);
  return y;
}

template <class T>
Mat<T> gcn_layer_backward(const Topology& g, const Affine<T>& layer, const GcnCache<T>& cache, const Mat<T>& dy,
                          Affine<T>& grad) {
  Mat<T> dax = linear_backward(cache.propagated, layer, dy, grad);
  return propagate_transpose(g, dax);
}

/// Edge-typed GCN used by the decoder. With edge assignment a[e][k]:
///
///   Y_t = A_hat(t,t) X_t W_0 + sum_{e: s->t} A_hat(t,s) sum_{k>=1} a[e][k] X_s W_k + b
///
/// W_0 is the self-connection map; type 0 carries no message.
template <class T>
struct TypedGcn {
  std::vector<Mat<T>> weights;  // n_edge_types entries, each [d_in, d_out]
  Mat<T> bias;                  // [1, d_out]
};

template <class T>
struct TypedGcnCache {
  Mat<T> input;
  std::vector<Mat<T>> projected;  // X W_k
};

template <class T>
Mat<T> typed_gcn(const Mat<T>& x, const Topology& g, const Mat<T>& assignment, const TypedGcn<T>& layer,
                 TypedGcnCache<T>* cache = nullptr) {
  const auto types = layer.weights.size();
  if (static_cast<std::size_t>(x.rows()) != g.num_nodes() || types == 0 || x.cols() != layer.weights[0].rows())
    throw ShapeMismatch("typed_gcn: input shape does not match the layer");
  if (static_cast<std::size_t>(assignment.rows()) != g.num_edges() ||
      static_cast<std::size_t>(assignment.cols()) != types)
    throw ShapeMismatch("typed_gcn: assignment must be [E, n_edge_types]");

  std::vector<Mat<T>> proj(types);
  for (std::size_t k = 0; k < types; ++k) proj[k] = x * layer.weights[k];

  Mat<T> y(x.rows(), layer.bias.cols());
  for (std::size_t j = 0; j < g.num_nodes(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    y.row(r) = static_cast<T>(g.self_coef(j)) * proj[0].row(r) + layer.bias.row(0);
  }
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edge(e);
    const T c = static_cast<T>(g.edge_coef(e));
    for (std::size_t k = 1; k < types; ++k) {
      const T w = assignment(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(k));
      if (w != T(0)) y.row(ed.target) += (c * w) * proj[k].row(ed.source);
    }
  }
  if (cache) {
    cache->input = x;
    cache->projected = std::move(proj);
  }
  return y;
}

/// Accumulates weight/bias/assignment gradients; returns dX.
template <class T>
Mat<T> typed_gcn_backward(const Topology& g, const Mat<T>& assignment, const TypedGcn<T>& layer,
                          const TypedGcnCache<T>& cache, const Mat<T>& dy, TypedGcn<T>& grad,
                          Mat<T>& d_assignment) {
  const auto types = layer.weights.size();
  std::vector<Mat<T>> dproj(types);
  dproj[0].resize(dy.rows(), dy.cols());
  for (std::size_t j = 0; j < g.num_nodes(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    dproj[0].row(r) = static_cast<T>(g.self_coef(j)) * dy.row(r);
  }
  for (std::size_t k = 1; k < types; ++k) dproj[k] = Mat<T>::Zero(dy.rows(), dy.cols());

  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edge(e);
    const T c = static_cast<T>(g.edge_coef(e));
    const auto re = static_cast<Eigen::Index>(e);
    for (std::size_t k = 1; k < types; ++k) {
      const auto rk = static_cast<Eigen::Index>(k);
      d_assignment(re, rk) += c * dy.row(ed.target).dot(cache.projected[k].row(ed.source));
      const T w = assignment(re, rk);
      if (w != T(0)) dproj[k].row(ed.source) += (c * w) * dy.row(ed.target);
    }
  }
  grad.bias += dy.colwise().sum();
  Mat<T> dx = Mat<T>::Zero(cache.input.rows(), cache.input.cols());
  for (std::size_t k = 0; k < types; ++k) {
    grad.weights[k].noalias() += cache.input.transpose() * dproj[k];
    dx.noalias() += dproj[k] * layer.weights[k].transpose();
  }
  return dx;
}

/// Edge (s, t) -> [h_s || h_t].
template <class T>
Mat<T> node_to_edge(const Mat<T>& h, const Topology& g) {
  if (g.num_edges() == 0) throw ShapeMismatch("node_to_edge: edge list is empty");
  const auto d = h.cols();
  Mat<T> out(static_cast<Eigen::Index>(g.num_edges()), 2 * d);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto r = static_cast<Eigen::Index>(e);
    out.row(r).head(d) = h.row(g.edge(e).source);
    out.row(r).tail(d) = h.row(g.edge(e).target);
  }
  return out;
}

template <class T>
Mat<T> node_to_edge_backward(const Mat<T>& d_edges, const Topology& g) {
  const auto d = d_edges.cols() / 2;
  Mat<T> dh = Mat<T>::Zero(static_cast<Eigen::Index>(g.num_nodes()), d);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto r = static_cast<Eigen::Index>(e);
    dh.row(g.edge(e).source) += d_edges.row(r).head(d);
    dh.row(g.edge(e).target) += d_edges.row(r).tail(d);
  }
  return dh;
}

/// Node i <- mean of the representations of its incoming edges; zeros when it has none.
template <class T>
Mat<T> edge_to_node(const Mat<T>& edges, const Topology& g) {
  if (static_cast<std::size_t>(edges.rows()) != g.num_edges())
    throw ShapeMismatch("edge_to_node: one row per edge required");
  Mat<T> out = Mat<T>::Zero(static_cast<Eigen::Index>(g.num_nodes()), edges.cols());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const int t = g.edge(e).target;
    out.row(t) += edges.row(static_cast<Eigen::Index>(e)) / static_cast<T>(g.in_degree(static_cast<std::size_t>(t)));
  }
  return out;
}

template <class T>
Mat<T> edge_to_node_backward(const Mat<T>& d_nodes, const Topology& g) {
  Mat<T> out(static_cast<Eigen::Index>(g.num_edges()), d_nodes.cols());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const int t = g.edge(e).target;
    out.row(static_cast<Eigen::Index>(e)) = d_nodes.row(t) / static_cast<T>(g.in_degree(static_cast<std::size_t>(t)));
  }
  return out;
}

}  // namespace duetgraph::model
