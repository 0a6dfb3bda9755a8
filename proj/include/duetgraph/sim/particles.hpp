// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// Charged-particle n-body benchmark: the interaction graph is fixed by the
// particle charges (like charges repel, opposite charges attract), so every
// simulated trajectory comes with a ground-truth edge labelling.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "duetgraph/core/config.hpp"
#include "duetgraph/core/error.hpp"
#include "duetgraph/core/rng.hpp"
#include "duetgraph/core/tensor_file.hpp"

namespace duetgraph::sim {

inline constexpr int kDim = 2;
inline constexpr const char* kDatasetFormat = "duetgraph.sim/1";

struct SimConfig {
  std::size_t num_trajectories = 1000;
  std::size_t num_particles = 5;
  std::size_t frames = 49;
  std::size_t substeps_per_frame = 100;
  double dt = 0.001;
  double force_softening = 0.1;
  double box_halfwidth = 5.0;
  // Initial positions are uniform in [-spawn, spawn]^2. Zero means the whole box.
  double spawn_halfwidth = 0.0;
  double velocity_scale = 0.5;
  std::uint64_t seed = 0;

  double spawn() const { return spawn_halfwidth > 0.0 ? spawn_halfwidth : box_halfwidth; }

  void validate() const {
    if (num_trajectories < 1) throw ConfigError("num_trajectories", "must be >= 1");
    if (num_particles < 1) throw ConfigError("num_particles", "must be >= 1");
    if (frames < 2) throw ConfigError("frames", "must be >= 2");
    if (substeps_per_frame < 1) throw ConfigError("substeps_per_frame", "must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("dt", "must be > 0");
    if (!(force_softening > 0.0)) throw ConfigError("force_softening", "must be > 0");
    if (!(box_halfwidth > 0.0)) throw ConfigError("box_halfwidth", "must be > 0");
    if (spawn_halfwidth < 0.0 || spawn_halfwidth > box_halfwidth)
      throw ConfigError("spawn_halfwidth", "must lie in [0, box_halfwidth]");
    if (!(velocity_scale >= 0.0)) throw ConfigError("velocity_scale", "must be >= 0");
  }
};

inline void to_json(json& j, const SimConfig& c) {
  j = json{{"num_trajectories", c.num_trajectories},
           {"num_particles", c.num_particles},
           {"frames", c.frames},
           {"substeps_per_frame", c.substeps_per_frame},
           {"dt", c.dt},
           {"force_softening", c.force_softening},
           {"box_halfwidth", c.box_halfwidth},
           {"spawn_halfwidth", c.spawn_halfwidth},
           {"velocity_scale", c.velocity_scale},
           {"seed", c.seed}};
}

inline SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  read_optional(j, "num_trajectories", c.num_trajectories);
  read_optional(j, "num_particles", c.num_particles);
  read_optional(j, "frames", c.frames);
  read_optional(j, "substeps_per_frame", c.substeps_per_frame);
  read_optional(j, "dt", c.dt);
  read_optional(j, "force_softening", c.force_softening);
  read_optional(j, "box_halfwidth", c.box_halfwidth);
  read_optional(j, "spawn_halfwidth", c.spawn_halfwidth);
  read_optional(j, "velocity_scale", c.velocity_scale);
  read_optional(j, "seed", c.seed);
  c.validate();
  return c;
}

using Points = Eigen::Matrix<double, Eigen::Dynamic, kDim>;

struct ParticleSystem {
  std::vector<int> charges;
  Points positions;
  Points velocities;

  std::size_t size() const { return charges.size(); }

  Eigen::RowVector2d momentum() const { return velocities.colwise().sum(); }
};

/// sign(i, j) = q_i * q_j: +1 repels, -1 attracts. The diagonal is unused (0).
struct GroundTruthGraph {
  Eigen::MatrixXi sign;

  static GroundTruthGraph from_charges(const std::vector<int>& charges) {
    const auto n = static_cast<Eigen::Index>(charges.size());
    GroundTruthGraph g{Eigen::MatrixXi::Zero(n, n)};
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) g.sign(i, j) = charges[i] * charges[j];
    return g;
  }

  /// Class label of the directed edge (i, j): 1 for repulsive, 0 for attractive.
  int label(std::size_t i, std::size_t j) const {
    return sign(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0 ? 1 : 0;
  }
};

/// Draws charges, positions and velocities for one trajectory.
inline std::pair<ParticleSystem, GroundTruthGraph> sample_system(const SimConfig& config, Rng& rng) {
  const auto n = config.num_particles;
  ParticleSystem sys;
  sys.charges.resize(n);
  sys.positions.resize(static_cast<Eigen::Index>(n), kDim);
  sys.velocities.resize(static_cast<Eigen::Index>(n), kDim);
  for (std::size_t i = 0; i < n; ++i) sys.charges[i] = uniform01(rng) < 0.5 ? 1 : -1;
  const double spawn = config.spawn();
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < kDim; ++d)
      sys.positions(static_cast<Eigen::Index>(i), d) = uniform(rng, -spawn, spawn);
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < kDim; ++d)
      sys.velocities(static_cast<Eigen::Index>(i), d) = config.velocity_scale * standard_normal(rng);
  auto graph = GroundTruthGraph::from_charges(sys.charges);
  return {std::move(sys), std::move(graph)};
}

/// Softened pairwise inverse-square accelerations (unit masses).
inline Points accelerations(const Points& positions, const GroundTruthGraph& graph, double softening) {
  const Eigen::Index n = positions.rows();
  Points acc = Points::Zero(n, kDim);
  const double eps2 = softening * softening;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Eigen::RowVector2d r = positions.row(i) - positions.row(j);
      const double d2 = r.squaredNorm() + eps2;
      const Eigen::RowVector2d f = static_cast<double>(graph.sign(i, j)) * r / (d2 * std::sqrt(d2));
      acc.row(i) += f;
      acc.row(j) -= f;
    }
  }
  return acc;
}

struct StepResult {
  ParticleSystem system;
  bool wall_contact = false;
};

/// One kick-drift leapfrog step followed by elastic reflection at the box walls.
/// Velocities are the staggered half-step velocities of the leapfrog scheme.
inline StepResult step(const ParticleSystem& system, const GroundTruthGraph& graph, double dt,
                       double softening, double box_halfwidth) {
  StepResult out{system, false};
  auto& s = out.system;
  s.velocities += dt * accelerations(s.positions, graph, softening);
  s.positions += dt * s.velocities;
  for (Eigen::Index i = 0; i < s.positions.rows(); ++i) {
    for (int d = 0; d < kDim; ++d) {
      double& x = s.positions(i, d);
      double& v = s.velocities(i, d);
      if (x > box_halfwidth) {
        x = 2.0 * box_halfwidth - x;
        v = -std::abs(v);
        out.wall_contact = true;
      } else if (x < -box_halfwidth) {
        x = -2.0 * box_halfwidth - x;
        v = std::abs(v);
        out.wall_contact = true;
      }
      if (!std::isfinite(x) || !std::isfinite(v))
        throw NonFiniteState("particle state became non-finite; reduce dt");
    }
  }
  return out;
}

/// Time-major node feature array [frames, nodes, features].
struct Trajectory {
  std::size_t frames = 0;
  std::size_t nodes = 0;
  std::size_t features = 0;
  std::vector<double> data;

  Trajectory() = default;
  Trajectory(std::size_t t, std::size_t n, std::size_t f) : frames(t), nodes(n), features(f), data(t * n * f, 0.0) {}

  double& at(std::size_t t, std::size_t n, std::size_t f) { return data[(t * nodes + n) * features + f]; }
  double at(std::size_t t, std::size_t n, std::size_t f) const { return data[(t * nodes + n) * features + f]; }
};

struct SimRecord {
  Trajectory trajectory;  // [frames, N, 4]: x, y, vx, vy
  GroundTruthGraph graph;
  std::vector<int> charges;
  std::size_t wall_contacts = 0;
};

inline void record_frame(Trajectory& traj, std::size_t t, const ParticleSystem& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    traj.at(t, i, 0) = s.positions(r, 0);
    traj.at(t, i, 1) = s.positions(r, 1);
    traj.at(t, i, 2) = s.velocities(r, 0);
    traj.at(t, i, 3) = s.velocities(r, 1);
  }
}

/// Integrates an already-sampled system for config.frames frames.
inline SimRecord integrate(const SimConfig& config, ParticleSystem system, GroundTruthGraph graph) {
  SimRecord rec;
  rec.trajectory = Trajectory(config.frames, system.size(), 2 * kDim);
  rec.charges = system.charges;
  record_frame(rec.trajectory, 0, system);
  for (std::size_t t = 1; t < config.frames; ++t) {
    for (std::size_t k = 0; k < config.substeps_per_frame; ++k) {
      auto res = step(system, graph, config.dt, config.force_softening, config.box_halfwidth);
      system = std::move(res.system);
      rec.wall_contacts += res.wall_contact ? 1 : 0;
    }
    record_frame(rec.trajectory, t, system);
  }
  rec.graph = std::move(graph);
  return rec;
}

/// Trajectory `index` of the dataset; its RNG stream depends only on (seed, index).
inline SimRecord simulate_trajectory(const SimConfig& config, std::size_t index) {
  Rng rng = derive_rng(config.seed, 0x53494D, index);
  auto [system, graph] = sample_system(config, rng);
  try {
    return integrate(config, std::move(system), std::move(graph));
  } catch (const NonFiniteState& e) {
    throw NonFiniteState("trajectory " + std::to_string(index) + ": " + e.what());
  }
}

inline std::vector<SimRecord> simulate_dataset(const SimConfig& config) {
  config.validate();
  std::vector<SimRecord> out;
  out.reserve(config.num_trajectories);
  for (std::size_t i = 0; i < config.num_trajectories; ++i) out.push_back(simulate_trajectory(config, i));
  return out;
}

// --- dataset file --------------------------------------------------------

inline TensorFile dataset_to_file(const SimConfig& config, const std::vector<SimRecord>& records) {
  TensorFile file;
  const std::size_t frames = config.frames, n = config.num_particles, f = 2 * kDim;
  json graphs = json::array();
  json contacts = json::array();
  TensorBlock block{"trajectories", {records.size(), frames, n, f}, {}};
  block.data.reserve(records.size() * frames * n * f);
  for (const auto& rec : records) {
    for (double v : rec.trajectory.data) block.data.push_back(static_cast<float>(v));
    json edges = json::array();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) edges.push_back({i, j, rec.graph.sign(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    graphs.push_back({{"charges", rec.charges}, {"edges", edges}});
    contacts.push_back(rec.wall_contacts);
  }
  file.header = {{"format", kDatasetFormat},
                 {"config", config},
                 {"num_trajectories", records.size()},
                 {"shape", {frames, n, f}},
                 {"feature_names", {"x", "y", "vx", "vy"}},
                 {"graphs", graphs},
                 {"wall_contacts", contacts}};
  file.blocks.push_back(std::move(block));
  return file;
}

inline void write_dataset(const std::string& path, const SimConfig& config, const std::vector<SimRecord>& records) {
  write_tensor_file(path, dataset_to_file(config, records));
}

/// Loads a dataset file. Trajectory values come back at float32 precision.
inline std::vector<SimRecord> read_dataset(const std::string& path, SimConfig* config_out = nullptr) {
  TensorFile file = read_tensor_file(path);
  if (file.header.value("format", "") != kDatasetFormat)
    throw IoError("'" + path + "' is not a simulated particle dataset");
  const auto shape = file.header.at("shape").get<std::vector<std::size_t>>();
  const auto& block = file.block("trajectories");
  const std::size_t count = file.header.at("num_trajectories").get<std::size_t>();
  const std::size_t per = shape[0] * shape[1] * shape[2];
  if (block.data.size() != count * per) throw IoError("'" + path + "' trajectory block has the wrong size");
  if (config_out) *config_out = sim_config_from_json(file.header.at("config"));

  std::vector<SimRecord> out(count);
  const auto& graphs = file.header.at("graphs");
  const auto& contacts = file.header.at("wall_contacts");
  for (std::size_t k = 0; k < count; ++k) {
    auto& rec = out[k];
    rec.trajectory = Trajectory(shape[0], shape[1], shape[2]);
    for (std::size_t i = 0; i < per; ++i) rec.trajectory.data[i] = block.data[k * per + i];
    rec.charges = graphs[k].at("charges").get<std::vector<int>>();
    rec.graph = GroundTruthGraph::from_charges(rec.charges);
    rec.wall_contacts = contacts[k].get<std::size_t>();
  }
  return out;
}

}  // namespace duetgraph::sim
