// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// SVG frame strips and CSV edge tables for an evaluation report.

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "duetgraph/core/error.hpp"
#include "duetgraph/pose/cleaning.hpp"
#include "duetgraph/pose/training_tensor.hpp"

namespace duetgraph::cli {

using json = nlohmann::json;

struct RenderEdge {
  std::size_t edge = 0;
  int source = 0;  // node index
  int target = 0;
  int type = 0;
  double confidence = 0.0;
};

/// High-confidence edges of a report, sorted by descending confidence (edge
/// index breaks ties). Node indices are checked against the layout.
inline std::vector<RenderEdge> report_edges(const json& report, const pose::TrainingTensor& layout) {
  std::vector<RenderEdge> out;
  const auto j = static_cast<int>(layout.num_nodes());
  if (report.contains("edge_confidences")) {
    const auto& all = report.at("edge_confidences");
    if (all.size() != layout.num_edges())
      throw IndexError("report covers " + std::to_string(all.size()) + " edges, the data has " +
                       std::to_string(layout.num_edges()));
    for (std::size_t e = 0; e < all.size(); ++e)
      if (all[e].at("source").get<int>() != layout.edges[e].source ||
          all[e].at("target").get<int>() != layout.edges[e].target)
        throw IndexError("report edge " + std::to_string(e) + " does not match the data's candidate graph");
  }
  for (const auto& h : report.at("high_confidence_edges")) {
    RenderEdge e{h.at("edge").get<std::size_t>(), h.at("source").get<int>(), h.at("target").get<int>(),
                 h.at("type").get<int>(), h.at("probability").get<double>()};
    if (e.source < 0 || e.source >= j || e.target < 0 || e.target >= j)
      throw IndexError("report edge " + std::to_string(e.edge) + " references node outside [0, " + std::to_string(j) + ")");
    if (e.edge >= layout.num_edges() || layout.edges[e.edge].source != e.source || layout.edges[e.edge].target != e.target)
      throw IndexError("report edge " + std::to_string(e.edge) + " does not match the data's candidate graph");
    out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(), [](const RenderEdge& a, const RenderEdge& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.edge < b.edge;
  });
  return out;
}

inline std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

/// CSV: one row per selected edge.
inline std::string edges_csv(const std::vector<RenderEdge>& edges, const pose::TrainingTensor& layout) {
  std::string out = "source_group,source_joint,target_group,target_joint,type,confidence\n";
  for (const auto& e : edges) {
    const auto& s = layout.nodes[static_cast<std::size_t>(e.source)];
    const auto& t = layout.nodes[static_cast<std::size_t>(e.target)];
    out += std::to_string(s.group) + "," + std::to_string(s.source_index) + "," + std::to_string(t.group) + "," +
           std::to_string(t.source_index) + "," + std::to_string(e.type) + "," + fmt(e.confidence, 6) + "\n";
  }
  return out;
}

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

namespace detail {

inline constexpr const char* kGroupColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};

inline const char* group_color(int g) { return kGroupColors[static_cast<std::size_t>(g) % 5]; }

// Orthographic x-y projection into a fixed canvas; y grows upward on screen.
struct Projection {
  double min_x, max_y, scale, pad;
  double min_z, max_z;

  static Projection fit(const std::vector<Point3>& pts, double size, double pad) {
    double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x, lo_y = lo_x, hi_y = -lo_x, lo_z = lo_x,
           hi_z = -lo_x;
    for (const auto& p : pts) {
      lo_x = std::min(lo_x, p.x), hi_x = std::max(hi_x, p.x);
      lo_y = std::min(lo_y, p.y), hi_y = std::max(hi_y, p.y);
      lo_z = std::min(lo_z, p.z), hi_z = std::max(hi_z, p.z);
    }
    if (pts.empty()) lo_x = hi_x = lo_y = hi_y = lo_z = hi_z = 0.0;
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
    return {lo_x, hi_y, (size - 2.0 * pad) / span, pad, lo_z, hi_z};
  }
  double sx(const Point3& p) const { return pad + (p.x - min_x) * scale; }
  double sy(const Point3& p) const { return pad + (max_y - p.y) * scale; }
  // Marker radius grows with height so depth survives the projection.
  double radius(const Point3& p) const {
    const double span = max_z - min_z;
    return 2.0 + (span > 1e-12 ? 4.0 * (p.z - min_z) / span : 2.0);
  }
};

}  // namespace detail

/// One frame: skeleton bones per group (parent index per node, -1 for none),
/// node markers, optional trails, and the selected edges.
struct FrameScene {
  std::vector<Point3> nodes;
  std::vector<int> groups;
  std::vector<int> parents;                // per node, -1 when unlinked
  std::vector<std::vector<Point3>> trails;  // per node, may be empty
  std::vector<std::pair<std::size_t, std::size_t>> edge_nodes;  // scene indices of each selected edge
  std::vector<double> edge_opacity;
  std::string title;
};

inline std::string render_svg(const FrameScene& scene, double size = 480.0) {
  std::vector<Point3> all = scene.nodes;
  for (const auto& t : scene.trails) all.insert(all.end(), t.begin(), t.end());
  const auto proj = detail::Projection::fit(all, size, 24.0);
  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(size, 0) + "\" height=\"" + fmt(size, 0) +
       "\" viewBox=\"0 0 " + fmt(size, 0) + " " + fmt(size, 0) + "\">\n";
  s += "  <title>" + scene.title + "</title>\n";
  s += "  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  s += "  <g id=\"trails\" fill=\"none\" stroke-width=\"1\">\n";
  for (std::size_t i = 0; i < scene.trails.size(); ++i) {
    if (scene.trails[i].size() < 2) continue;
    s += "    <polyline stroke=\"" + std::string(detail::group_color(scene.groups[i])) + "\" stroke-opacity=\"0.4\" points=\"";
    for (std::size_t k = 0; k < scene.trails[i].size(); ++k) {
      if (k) s += " ";
      s += fmt(proj.sx(scene.trails[i][k])) + "," + fmt(proj.sy(scene.trails[i][k]));
    }
    s += "\"/>\n";
  }
  s += "  </g>\n  <g id=\"bones\" stroke-width=\"2\">\n";
  for (std::size_t i = 0; i < scene.nodes.size(); ++i) {
    const int p = scene.parents[i];
    if (p < 0) continue;
    const auto& a = scene.nodes[i];
    const auto& b = scene.nodes[static_cast<std::size_t>(p)];
    s += "    <line x1=\"" + fmt(proj.sx(a)) + "\" y1=\"" + fmt(proj.sy(a)) + "\" x2=\"" + fmt(proj.sx(b)) + "\" y2=\"" +
         fmt(proj.sy(b)) + "\" stroke=\"" + detail::group_color(scene.groups[i]) + "\"/>\n";
  }
  s += "  </g>\n  <g id=\"joints\">\n";
  for (std::size_t i = 0; i < scene.nodes.size(); ++i)
    s += "    <circle cx=\"" + fmt(proj.sx(scene.nodes[i])) + "\" cy=\"" + fmt(proj.sy(scene.nodes[i])) + "\" r=\"" +
         fmt(proj.radius(scene.nodes[i])) + "\" fill=\"" + detail::group_color(scene.groups[i]) + "\"/>\n";
  s += "  </g>\n  <g id=\"edges\" stroke=\"#000000\" stroke-width=\"2.5\">\n";
  for (std::size_t k = 0; k < scene.edge_nodes.size(); ++k) {
    const auto& a = scene.nodes[scene.edge_nodes[k].first];
    const auto& b = scene.nodes[scene.edge_nodes[k].second];
    s += "    <line class=\"edge\" x1=\"" + fmt(proj.sx(a)) + "\" y1=\"" + fmt(proj.sy(a)) + "\" x2=\"" + fmt(proj.sx(b)) +
         "\" y2=\"" + fmt(proj.sy(b)) + "\" stroke-opacity=\"" + fmt(std::clamp(scene.edge_opacity[k], 0.0, 1.0)) + "\"/>\n";
  }
  s += "  </g>\n</svg>\n";
  return s;
}

/// Cleaned pose sequence `index` stored alongside a tensor file, if present.
inline bool stored_poses(const TensorFile& file, std::size_t index, std::vector<float>& data, std::size_t& frames) {
  const std::string name = "poses." + std::to_string(index);
  if (!file.has_block(name)) return false;
  const auto& b = file.block(name);
  data = b.data;
  frames = b.shape.at(0);
  return true;
}

/// Scenes for `count` evenly spaced timesteps. Poses are drawn as full
/// skeletons; otherwise nodes are drawn from the windows with their trails.
inline std::vector<FrameScene> build_scenes(const TensorFile& file, const pose::TrainingTensor& data,
                                            const std::vector<RenderEdge>& edges, std::size_t count) {
  std::vector<FrameScene> scenes;
  std::vector<float> poses;
  std::size_t frames = 0;
  if (stored_poses(file, 0, poses, frames)) {
    constexpr std::size_t J = pose::kNumJoints;
    for (std::size_t k = 0; k < count && frames > 0; ++k) {
      const std::size_t t = count == 1 ? 0 : k * (frames - 1) / (count - 1);
      FrameScene sc;
      sc.title = "frame " + std::to_string(t);
      for (std::size_t d = 0; d < 2; ++d)
        for (std::size_t j = 0; j < J; ++j) {
          const float* p = poses.data() + ((t * 2 + d) * J + j) * 3;
          sc.nodes.push_back({p[0], p[1], p[2]});
          sc.groups.push_back(static_cast<int>(d));
          const int parent = pose::kSkeletonParents[j];
          sc.parents.push_back(parent < 0 ? -1 : static_cast<int>(d * J) + parent);
        }
      sc.trails.assign(sc.nodes.size(), {});
      for (const auto& e : edges) {
        const auto& a = data.nodes[static_cast<std::size_t>(e.source)];
        const auto& b = data.nodes[static_cast<std::size_t>(e.target)];
        sc.edge_nodes.push_back({static_cast<std::size_t>(a.group) * J + static_cast<std::size_t>(a.source_index),
                                 static_cast<std::size_t>(b.group) * J + static_cast<std::size_t>(b.source_index)});
        sc.edge_opacity.push_back(e.confidence);
      }
      scenes.push_back(std::move(sc));
    }
    return scenes;
  }
  const std::size_t windows = data.num_windows(), n = data.num_nodes(), f = data.feature_dim;
  for (std::size_t k = 0; k < count && windows > 0; ++k) {
    const std::size_t s = count == 1 ? 0 : k * (windows - 1) / (count - 1);
    const auto w = data.window<double>(s);
    FrameScene sc;
    sc.title = "window " + std::to_string(s);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>((data.seq_len - 1) * n + i);
      sc.nodes.push_back({w.inputs(row, 0), w.inputs(row, 1), f >= 6 ? w.inputs(row, 2) : 0.0});
      sc.groups.push_back(data.nodes[i].group);
      sc.parents.push_back(-1);
      std::vector<Point3> trail;
      for (std::size_t t = 0; t < data.seq_len; ++t) {
        const auto r = static_cast<Eigen::Index>(t * n + i);
        trail.push_back({w.inputs(r, 0), w.inputs(r, 1), f >= 6 ? w.inputs(r, 2) : 0.0});
      }
      sc.trails.push_back(std::move(trail));
    }
    for (const auto& e : edges) {
      sc.edge_nodes.push_back({static_cast<std::size_t>(e.source), static_cast<std::size_t>(e.target)});
      sc.edge_opacity.push_back(e.confidence);
    }
    scenes.push_back(std::move(sc));
  }
  return scenes;
}

}  // namespace duetgraph::cli
