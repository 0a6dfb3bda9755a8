// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "duetgraph/core/error.hpp"
#include "duetgraph/model/graph.hpp"
#include "duetgraph/model/tensor.hpp"
#include "duetgraph/sim/particles.hpp"

namespace duetgraph::train {

/// Fraction of edges whose predicted latent type matches the label, maximised
/// over every relabelling of the n latent types (types are unidentifiable).
inline double edge_accuracy(std::span<const int> predicted, std::span<const int> labels, int n_types) {
  if (predicted.size() != labels.size())
    throw ArityMismatch("edge_accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  if (predicted.empty()) return 0.0;
  std::vector<int> perm(static_cast<std::size_t>(n_types));
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t e = 0; e < predicted.size(); ++e)
      hits += perm[static_cast<std::size_t>(predicted[e])] == labels[e] ? 1 : 0;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(predicted.size());
}

/// Row-wise argmax (lowest index on ties).
template <class T>
std::vector<int> argmax_types(const model::Mat<T>& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

/// Accuracy of a posterior [E, n] against a simulated interaction graph.
template <class T>
double edge_accuracy(const model::Mat<T>& posterior, const std::vector<model::Edge>& edges,
                     const sim::GroundTruthGraph& truth) {
  const auto n = static_cast<std::size_t>(truth.sign.rows());
  if (static_cast<std::size_t>(posterior.rows()) != edges.size() || edges.size() != n * (n - 1))
    throw ArityMismatch("edge_accuracy: posterior has " + std::to_string(posterior.rows()) + " rows for " +
                        std::to_string(n * (n - 1)) + " ground-truth pairs");
  std::vector<int> labels;
  for (const auto& e : edges) labels.push_back(truth.label(static_cast<std::size_t>(e.source), static_cast<std::size_t>(e.target)));
  const auto pred = argmax_types(posterior);
  return edge_accuracy(pred, labels, static_cast<int>(posterior.cols()));
}

}  // namespace duetgraph::train
