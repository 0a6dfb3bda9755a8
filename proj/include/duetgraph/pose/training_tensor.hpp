// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// Windowed training data: fixed node set, fixed candidate edges, and for each
// window L input frames plus the frame that follows.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "duetgraph/core/error.hpp"
#include "duetgraph/core/rng.hpp"
#include "duetgraph/core/tensor_file.hpp"
#include "duetgraph/model/graph.hpp"
#include "duetgraph/model/nri.hpp"
#include "duetgraph/sim/particles.hpp"

namespace duetgraph::pose {

inline constexpr const char* kTensorFormat = "duetgraph.tensor/1";

/// Where a node comes from: which dancer (or particle group) and which joint.
struct NodeInfo {
  int group = 0;
  int source_index = 0;

  friend bool operator==(const NodeInfo&, const NodeInfo&) = default;
};

/// Where a window comes from: source sequence and first input frame.
struct WindowOrigin {
  std::size_t sequence = 0;
  std::size_t start = 0;

  friend bool operator==(const WindowOrigin&, const WindowOrigin&) = default;
};

struct TrainingTensor {
  std::string split = "train";
  std::size_t seq_len = 0;
  std::size_t feature_dim = 0;
  std::vector<NodeInfo> nodes;
  std::vector<model::Edge> edges;
  std::vector<float> sequences;  // [S, L, J, F]
  std::vector<float> targets;    // [S, J, F]
  std::vector<int> labels;       // [S, E] ground-truth edge classes, empty when unknown
  std::vector<WindowOrigin> origins;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_edges() const { return edges.size(); }
  std::size_t num_windows() const { return origins.size(); }
  bool has_labels() const { return !labels.empty(); }

  model::Topology topology() const { return model::Topology(num_nodes(), edges); }

  template <class T>
  model::Window<T> window(std::size_t s) const {
    const auto j = static_cast<Eigen::Index>(num_nodes()), f = static_cast<Eigen::Index>(feature_dim);
    const auto l = static_cast<Eigen::Index>(seq_len);
    model::Window<T> w{model::Mat<T>(l * j, f), model::Mat<T>(j, f)};
    const float* src = sequences.data() + s * static_cast<std::size_t>(l * j * f);
    for (Eigen::Index i = 0; i < l * j * f; ++i) w.inputs.data()[i] = static_cast<T>(src[i]);
    const float* tgt = targets.data() + s * static_cast<std::size_t>(j * f);
    for (Eigen::Index i = 0; i < j * f; ++i) w.target.data()[i] = static_cast<T>(tgt[i]);
    return w;
  }

  std::vector<int> window_labels(std::size_t s) const {
    return {labels.begin() + static_cast<std::ptrdiff_t>(s * num_edges()),
            labels.begin() + static_cast<std::ptrdiff_t>((s + 1) * num_edges())};
  }

  /// Same layout, no windows.
  TrainingTensor empty_like(std::string split_tag) const {
    TrainingTensor t;
    t.split = std::move(split_tag);
    t.seq_len = seq_len;
    t.feature_dim = feature_dim;
    t.nodes = nodes;
    t.edges = edges;
    return t;
  }

  /// Appends window `s` of `other` (same layout).
  void append_window(const TrainingTensor& other, std::size_t s) {
    const std::size_t in = seq_len * num_nodes() * feature_dim, out = num_nodes() * feature_dim;
    sequences.insert(sequences.end(), other.sequences.begin() + static_cast<std::ptrdiff_t>(s * in),
                     other.sequences.begin() + static_cast<std::ptrdiff_t>((s + 1) * in));
    targets.insert(targets.end(), other.targets.begin() + static_cast<std::ptrdiff_t>(s * out),
                   other.targets.begin() + static_cast<std::ptrdiff_t>((s + 1) * out));
    if (other.has_labels()) {
      const auto lbl = other.window_labels(s);
      labels.insert(labels.end(), lbl.begin(), lbl.end());
    }
    origins.push_back(other.origins[s]);
  }
};

/// Number of non-overlapping windows (stride L, each needing L + 1 frames).
inline std::size_t window_count(std::size_t frames, std::size_t seq_len) {
  return frames > seq_len ? (frames - 1) / seq_len : 0;
}

/// Frame accessor: features of `node` at frame `t`.
using FrameFeature = std::function<double(std::size_t t, std::size_t node, std::size_t f)>;

/// Appends every window of one sequence; nodes are picked by `node_map`.
inline void append_windows(TrainingTensor& out, std::size_t sequence_index, std::size_t frames,
                           const std::vector<std::size_t>& node_map, const FrameFeature& feature,
                           const std::vector<int>* labels = nullptr) {
  const std::size_t l = out.seq_len, f = out.feature_dim;
  for (std::size_t w = 0; w < window_count(frames, l); ++w) {
    const std::size_t start = w * l;
    for (std::size_t t = 0; t < l; ++t)
      for (std::size_t j : node_map)
        for (std::size_t c = 0; c < f; ++c) out.sequences.push_back(static_cast<float>(feature(start + t, j, c)));
    for (std::size_t j : node_map)
      for (std::size_t c = 0; c < f; ++c) out.targets.push_back(static_cast<float>(feature(start + l, j, c)));
    if (labels) out.labels.insert(out.labels.end(), labels->begin(), labels->end());
    out.origins.push_back({sequence_index, start});
  }
}

/// Number of training windows for an `fraction` split of `count` windows.
inline std::size_t split_train_count(std::size_t count, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count) + 0.5));
}

/// Shuffles windows with `seed` and splits them train / val at `fraction`.
inline std::pair<TrainingTensor, TrainingTensor> split_windows(const TrainingTensor& all, double fraction,
                                                               std::uint64_t seed) {
  std::vector<std::size_t> order(all.num_windows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = derive_rng(seed, 0x53504C4954);
  shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = split_train_count(order.size(), fraction);
  auto train = all.empty_like("train");
  auto val = all.empty_like("val");
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? train : val).append_window(all, order[i]);
  return {std::move(train), std::move(val)};
}

/// Particle windows: every particle is a node, candidates are all ordered
/// pairs, labels come from the ground-truth graph.
inline TrainingTensor particle_windows(const std::vector<sim::SimRecord>& records, std::size_t seq_len,
                                       const std::string& split = "all") {
  if (records.empty()) throw SequenceTooShort("no trajectories");
  const std::size_t n = records.front().trajectory.nodes;
  TrainingTensor t;
  t.split = split;
  t.seq_len = seq_len;
  t.feature_dim = records.front().trajectory.features;
  for (std::size_t i = 0; i < n; ++i) t.nodes.push_back({static_cast<int>(i), static_cast<int>(i)});
  t.edges = model::complete_edges(n);
  std::vector<std::size_t> node_map(n);
  std::iota(node_map.begin(), node_map.end(), std::size_t{0});
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& rec = records[k];
    std::vector<int> labels;
    for (const auto& e : t.edges)
      labels.push_back(rec.graph.label(static_cast<std::size_t>(e.source), static_cast<std::size_t>(e.target)));
    append_windows(
        t, k, rec.trajectory.frames, node_map,
        [&](std::size_t tt, std::size_t j, std::size_t c) { return rec.trajectory.at(tt, j, c); }, &labels);
  }
  if (t.num_windows() == 0) throw SequenceTooShort("seq_len " + std::to_string(seq_len) + " leaves no window");
  return t;
}

// --- file I/O ---------------------------------------------------------------

namespace detail {

inline TensorBlock int_block(const std::string& name, const std::vector<int>& v, std::vector<std::size_t> shape) {
  TensorBlock b{name, std::move(shape), {}};
  b.data.reserve(v.size());
  for (int x : v) b.data.push_back(static_cast<float>(x));
  return b;
}

inline json layout_json(const TrainingTensor& t) {
  json nodes = json::array(), edges = json::array();
  for (const auto& n : t.nodes) nodes.push_back({n.group, n.source_index});
  for (const auto& e : t.edges) edges.push_back({e.source, e.target});
  return {{"seq_len", t.seq_len}, {"feature_dim", t.feature_dim}, {"nodes", nodes}, {"edges", edges}};
}

}  // namespace detail

/// Writes a set of splits sharing one layout. `extra` is merged into the header.
inline TensorFile tensors_to_file(const std::vector<const TrainingTensor*>& splits, const json& extra = json::object(),
                                  std::vector<TensorBlock> extra_blocks = {}) {
  if (splits.empty()) throw ShapeMismatch("no splits to write");
  TensorFile file;
  file.header = extra;
  file.header["format"] = kTensorFormat;
  file.header["layout"] = detail::layout_json(*splits.front());
  json split_meta = json::array();
  for (const auto* t : splits) {
    if (t->nodes != splits.front()->nodes || t->edges != splits.front()->edges || t->seq_len != splits.front()->seq_len)
      throw ShapeMismatch("splits must share one layout");
    const std::size_t s = t->num_windows(), l = t->seq_len, j = t->num_nodes(), f = t->feature_dim;
    json origins = json::array();
    for (const auto& o : t->origins) origins.push_back({o.sequence, o.start});
    split_meta.push_back({{"name", t->split}, {"windows", s}, {"labelled", t->has_labels()}, {"origins", origins}});
    file.blocks.push_back({t->split + ".sequences", {s, l, j, f}, t->sequences});
    file.blocks.push_back({t->split + ".targets", {s, j, f}, t->targets});
    if (t->has_labels()) file.blocks.push_back(detail::int_block(t->split + ".labels", t->labels, {s, t->num_edges()}));
  }
  file.header["splits"] = split_meta;
  for (auto& b : extra_blocks) file.blocks.push_back(std::move(b));
  return file;
}

inline std::vector<TrainingTensor> tensors_from_file(const TensorFile& file) {
  if (file.header.value("format", "") != kTensorFormat) throw IoError("not a training tensor file");
  const auto& layout = file.header.at("layout");
  TrainingTensor base;
  base.seq_len = layout.at("seq_len").get<std::size_t>();
  base.feature_dim = layout.at("feature_dim").get<std::size_t>();
  for (const auto& n : layout.at("nodes")) base.nodes.push_back({n[0].get<int>(), n[1].get<int>()});
  for (const auto& e : layout.at("edges")) base.edges.push_back({e[0].get<int>(), e[1].get<int>()});
  std::vector<TrainingTensor> out;
  for (const auto& meta : file.header.at("splits")) {
    auto t = base.empty_like(meta.at("name").get<std::string>());
    t.sequences = file.block(t.split + ".sequences").data;
    t.targets = file.block(t.split + ".targets").data;
    if (meta.value("labelled", false))
      for (float v : file.block(t.split + ".labels").data) t.labels.push_back(static_cast<int>(v));
    for (const auto& o : meta.at("origins")) t.origins.push_back({o[0].get<std::size_t>(), o[1].get<std::size_t>()});
    if (t.sequences.size() != t.num_windows() * t.seq_len * t.num_nodes() * t.feature_dim)
      throw IoError("split '" + t.split + "' has inconsistent sizes");
    out.push_back(std::move(t));
  }
  return out;
}

inline const TrainingTensor& find_split(const std::vector<TrainingTensor>& splits, const std::string& name) {
  for (const auto& t : splits)
    if (t.split == name) return t;
  throw IoError("tensor file has no '" + name + "' split");
}

}  // namespace duetgraph::pose
