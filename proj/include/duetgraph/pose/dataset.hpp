// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "duetgraph/core/error.hpp"
#include "duetgraph/core/rng.hpp"
#include "duetgraph/pose/augment.hpp"
#include "duetgraph/pose/cleaning.hpp"
#include "duetgraph/pose/filter.hpp"
#include "duetgraph/pose/training_tensor.hpp"

namespace duetgraph::pose {

struct PreprocessConfig {
  std::size_t seq_len = 8;
  std::size_t joints_per_dancer = 3;
  double split = 0.85;
  double keep_ratio = 0.25;
  bool center_windows = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (seq_len < 2) throw ConfigError("seq_len", "must be >= 2");
    if (joints_per_dancer < 3 || joints_per_dancer > 5) throw ConfigError("joints_per_dancer", "must be in [3, 5]");
    if (!(split > 0.0 && split <= 1.0)) throw ConfigError("split", "must lie in (0, 1]");
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) throw ConfigError("keep_ratio", "must lie in (0, 1]");
  }
};

inline void to_json(json& j, const PreprocessConfig& c) {
  j = json{{"seq_len", c.seq_len},       {"joints_per_dancer", c.joints_per_dancer}, {"split", c.split},
           {"keep_ratio", c.keep_ratio}, {"center_windows", c.center_windows},       {"seed", c.seed}};
}

/// Candidate edges of a dense bipartite graph: every a -> b, then every b -> a.
/// Nodes [0, k) belong to dancer 0, [k, 2k) to dancer 1.
inline std::vector<model::Edge> dancer_edges(std::size_t k) {
  std::vector<int> a(k), b(k);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), static_cast<int>(k));
  return model::bipartite_edges(a, b);
}

/// `k` distinct joints per dancer, drawn once for a whole run.
inline std::pair<std::vector<int>, std::vector<int>> sample_joints(std::size_t k, std::uint64_t seed) {
  auto draw = [&](std::uint64_t stream) {
    std::vector<int> all(kNumJoints);
    std::iota(all.begin(), all.end(), 0);
    Rng rng = derive_rng(seed, 0x4A4F494E54, stream);
    shuffle(all.begin(), all.end(), rng);
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
  };
  return {draw(0), draw(1)};
}

/// Windows every cleaned sequence over the sampled joints and splits them.
inline std::pair<TrainingTensor, TrainingTensor> build_training_tensor(const std::vector<PoseSequence>& sequences,
                                                                       const PreprocessConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.joints_per_dancer;
  const auto [joints_a, joints_b] = sample_joints(k, cfg.seed);

  TrainingTensor all;
  all.split = "all";
  all.seq_len = cfg.seq_len;
  all.feature_dim = 6;
  for (int j : joints_a) all.nodes.push_back({0, j});
  for (int j : joints_b) all.nodes.push_back({1, j});
  all.edges = dancer_edges(k);

  std::vector<std::size_t> node_map(2 * k);
  std::iota(node_map.begin(), node_map.end(), std::size_t{0});
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = sequences[s];
    if (seq.frames < 2) continue;
    const auto feats = estimate_velocities(seq);
    auto feature = [&](std::size_t t, std::size_t node, std::size_t c) {
      const auto& info = all.nodes[node];
      const std::size_t p = static_cast<std::size_t>(info.group) * kNumJoints + static_cast<std::size_t>(info.source_index);
      return feats[(t * 2 * kNumJoints + p) * 6 + c];
    };
    append_windows(all, s, seq.frames, node_map, feature);
  }
  if (all.num_windows() == 0)
    throw SequenceTooShort("no sequence is long enough for one window of " + std::to_string(cfg.seq_len) +
                           " frames plus a target frame");

  if (cfg.center_windows) {
    const std::size_t l = all.seq_len, j = all.num_nodes(), f = all.feature_dim;
    for (std::size_t s = 0; s < all.num_windows(); ++s) {
      auto w = all.window<double>(s);
      center_window(w.inputs, w.target);
      std::copy(w.inputs.data(), w.inputs.data() + l * j * f, all.sequences.begin() + static_cast<std::ptrdiff_t>(s * l * j * f));
      std::copy(w.target.data(), w.target.data() + j * f, all.targets.begin() + static_cast<std::ptrdiff_t>(s * j * f));
    }
  }
  return split_windows(all, cfg.split, cfg.seed);
}

/// Cleaning, smoothing and windowing in one call.
inline std::pair<TrainingTensor, TrainingTensor> preprocess_streams(const std::vector<RawFrameStream>& streams,
                                                                    const PreprocessConfig& cfg) {
  cfg.validate();
  std::vector<PoseSequence> cleaned;
  for (const auto& s : streams) {
    auto seq = clean_stream(s);
    if (seq.frames >= 2) seq = smooth_sequence(std::move(seq), cfg.keep_ratio);
    cleaned.push_back(std::move(seq));
  }
  return build_training_tensor(cleaned, cfg);
}

}  // namespace duetgraph::pose
