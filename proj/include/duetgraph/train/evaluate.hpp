// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "json.hpp"

#include "duetgraph/core/rng.hpp"
#include "duetgraph/model/nri.hpp"
#include "duetgraph/pose/training_tensor.hpp"
#include "duetgraph/train/metrics.hpp"

namespace duetgraph::train {

struct ConfidentEdge {
  std::size_t edge = 0;
  int source = 0;
  int target = 0;
  int type = 0;              // most likely connecting type (>= 1)
  double probability = 0.0;  // posterior mass on types >= 1

  friend bool operator==(const ConfidentEdge&, const ConfidentEdge&) = default;
};

struct EvalReport {
  double recon_mse = 0.0;
  double kl = 0.0;
  double threshold = 0.8;
  std::size_t windows = 0;
  model::Mat<double> edge_confidences;  // [E, n] posterior averaged over windows
  std::vector<ConfidentEdge> high_confidence_edges;
  std::optional<double> edge_accuracy;
  std::vector<int> predicted_types;  // argmax per window and edge, [S * E], when labelled

  friend bool operator==(const EvalReport& a, const EvalReport& b) {
    return a.recon_mse == b.recon_mse && a.kl == b.kl && a.threshold == b.threshold && a.windows == b.windows &&
           a.edge_confidences == b.edge_confidences && a.high_confidence_edges == b.high_confidence_edges &&
           a.edge_accuracy == b.edge_accuracy && a.predicted_types == b.predicted_types;
  }
};

inline json to_json_value(const EvalReport& r, const std::vector<model::Edge>& edges) {
  json conf = json::array();
  for (Eigen::Index e = 0; e < r.edge_confidences.rows(); ++e) {
    json row = json::array();
    for (Eigen::Index k = 0; k < r.edge_confidences.cols(); ++k) row.push_back(r.edge_confidences(e, k));
    conf.push_back({{"edge", e},
                    {"source", edges[static_cast<std::size_t>(e)].source},
                    {"target", edges[static_cast<std::size_t>(e)].target},
                    {"probabilities", row}});
  }
  json high = json::array();
  for (const auto& h : r.high_confidence_edges)
    high.push_back({{"edge", h.edge}, {"source", h.source}, {"target", h.target}, {"type", h.type}, {"probability", h.probability}});
  json out = {{"format", "duetgraph.eval/1"},
              {"recon_mse", r.recon_mse},
              {"kl", r.kl},
              {"threshold", r.threshold},
              {"windows", r.windows},
              {"edge_confidences", conf},
              {"high_confidence_edges", high}};
  out["edge_accuracy"] = r.edge_accuracy ? json(*r.edge_accuracy) : json(nullptr);
  return out;
}

/// Selects edges whose averaged non-"no connection" mass reaches `threshold`.
/// `log_p0` holds, per edge, the log of the averaged type-0 probability; the
/// comparison p0 <= 1 - threshold runs in log space so that a threshold of 1
/// never admits an edge with finite logits.
inline std::vector<ConfidentEdge> select_confident_edges(const model::Mat<double>& mean_probs,
                                                         const std::vector<double>& log_p0,
                                                         const std::vector<model::Edge>& edges, double threshold) {
  std::vector<ConfidentEdge> out;
  const double log_cut = std::log1p(-std::min(threshold, 1.0));
  for (Eigen::Index e = 0; e < mean_probs.rows(); ++e) {
    if (!(log_p0[static_cast<std::size_t>(e)] <= log_cut)) continue;
    Eigen::Index best = 1;
    for (Eigen::Index k = 2; k < mean_probs.cols(); ++k)
      if (mean_probs(e, k) > mean_probs(e, best)) best = k;
    const auto& ed = edges[static_cast<std::size_t>(e)];
    out.push_back({static_cast<std::size_t>(e), ed.source, ed.target, static_cast<int>(best),
                   mean_probs.row(e).tail(mean_probs.cols() - 1).sum()});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ConfidentEdge& a, const ConfidentEdge& b) { return a.probability > b.probability; });
  return out;
}

/// Inference pass: encoder in eval mode, posterior averaged over windows,
/// teacher-forced reconstruction through soft Gumbel-Softmax samples.
template <class T>
EvalReport evaluate(const model::Parameters<T>& params, const pose::TrainingTensor& data, const model::ModelConfig& cfg,
                    double threshold = 0.8, std::uint64_t seed = 0) {
  const auto topo = data.topology();
  const auto E = static_cast<Eigen::Index>(data.num_edges());
  const auto n = static_cast<Eigen::Index>(cfg.n_edge_types);
  EvalReport report;
  report.threshold = threshold;
  report.windows = data.num_windows();
  report.edge_confidences = model::Mat<double>::Zero(E, n);
  std::vector<std::vector<double>> log_p0(static_cast<std::size_t>(E));
  std::vector<int> all_labels;

  const model::ForwardMode mode{false, false, true};
  double mse = 0.0, kl = 0.0;
  for (std::size_t s = 0; s < data.num_windows(); ++s) {
    const auto w = data.window<T>(s);
    Rng rng = derive_rng(seed, 0x4556414C, s);
    const auto res = model::run_window(w, topo, params, cfg, 0.0, mode, rng);
    mse += res.loss.recon_mse;
    kl += res.loss.kl;
    const model::Mat<double> logq = model::log_softmax_rows<double>(res.posterior.logits.template cast<double>());
    report.edge_confidences += logq.array().exp().matrix();
    for (Eigen::Index e = 0; e < E; ++e) log_p0[static_cast<std::size_t>(e)].push_back(logq(e, 0));
    if (data.has_labels()) {
      const auto pred = argmax_types(res.posterior.logits);
      report.predicted_types.insert(report.predicted_types.end(), pred.begin(), pred.end());
      const auto lbl = data.window_labels(s);
      all_labels.insert(all_labels.end(), lbl.begin(), lbl.end());
    }
  }
  const double count = static_cast<double>(std::max<std::size_t>(data.num_windows(), 1));
  report.recon_mse = mse / count;
  report.kl = kl / count;
  report.edge_confidences /= count;

  std::vector<double> log_mean_p0(static_cast<std::size_t>(E), -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < log_p0.size(); ++e) {
    if (log_p0[e].empty()) continue;
    const double m = *std::max_element(log_p0[e].begin(), log_p0[e].end());
    double acc = 0.0;
    for (double v : log_p0[e]) acc += std::exp(v - m);
    log_mean_p0[e] = m + std::log(acc / count);
  }
  report.high_confidence_edges = select_confident_edges(report.edge_confidences, log_mean_p0, data.edges, threshold);
  if (data.has_labels() && data.num_windows() > 0)
    report.edge_accuracy = edge_accuracy(report.predicted_types, all_labels, cfg.n_edge_types);
  return report;
}

}  // namespace duetgraph::train
