// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural duet generator: two 29-joint skeletons whose limb swings are
// partly coupled (dancer 1 echoes dancer 0 with a lag), rendered as a raw
// tracker stream with optional dropouts, spurious detections and ID swaps.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Geometry>

#include "duetgraph/core/config.hpp"
#include "duetgraph/core/error.hpp"
#include "duetgraph/core/rng.hpp"
#include "duetgraph/pose/cleaning.hpp"

namespace duetgraph::pose {

struct SynthConfig {
  std::size_t num_sequences = 4;
  std::size_t frames = 240;
  double fps = 30.0;
  double separation = 1.5;  // metres between the two roots
  double coupling = 0.8;    // fraction of dancer 1's joints that echo dancer 0
  std::size_t lag_frames = 3;
  double jitter = 0.005;  // per-coordinate noise, metres
  double drop_frame_prob = 0.0;
  double miss_prob = 0.0;   // one dancer undetected
  double extra_prob = 0.0;  // one spurious low-confidence detection
  double swap_prob = 0.0;   // tracker swaps the two IDs from this frame on
  std::uint64_t seed = 0;

  void validate() const {
    if (num_sequences < 1) throw ConfigError("num_sequences", "must be >= 1");
    if (frames < 2) throw ConfigError("frames", "must be >= 2");
    if (!(fps > 0.0)) throw ConfigError("fps", "must be > 0");
    if (!(coupling >= 0.0 && coupling <= 1.0)) throw ConfigError("coupling", "must lie in [0, 1]");
    for (auto [name, p] : {std::pair{"drop_frame_prob", drop_frame_prob}, std::pair{"miss_prob", miss_prob},
                           std::pair{"extra_prob", extra_prob}, std::pair{"swap_prob", swap_prob}})
      if (!(p >= 0.0 && p < 1.0)) throw ConfigError(name, "must lie in [0, 1)");
  }
};

inline void to_json(json& j, const SynthConfig& c) {
  j = json{{"num_sequences", c.num_sequences},
           {"frames", c.frames},
           {"fps", c.fps},
           {"separation", c.separation},
           {"coupling", c.coupling},
           {"lag_frames", c.lag_frames},
           {"jitter", c.jitter},
           {"drop_frame_prob", c.drop_frame_prob},
           {"miss_prob", c.miss_prob},
           {"extra_prob", c.extra_prob},
           {"swap_prob", c.swap_prob},
           {"seed", c.seed}};
}

inline SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  read_optional(j, "num_sequences", c.num_sequences);
  read_optional(j, "frames", c.frames);
  read_optional(j, "fps", c.fps);
  read_optional(j, "separation", c.separation);
  read_optional(j, "coupling", c.coupling);
  read_optional(j, "lag_frames", c.lag_frames);
  read_optional(j, "jitter", c.jitter);
  read_optional(j, "drop_frame_prob", c.drop_frame_prob);
  read_optional(j, "miss_prob", c.miss_prob);
  read_optional(j, "extra_prob", c.extra_prob);
  read_optional(j, "swap_prob", c.swap_prob);
  read_optional(j, "seed", c.seed);
  c.validate();
  return c;
}

namespace detail {

// Rest offsets from each joint's parent, z up, dancer facing +y. Joint 0 is
// the pelvis and carries the standing height.
inline const std::array<Eigen::Vector3d, kNumJoints>& rest_offsets() {
  static const std::array<Eigen::Vector3d, kNumJoints> offsets = {{
      {0.0, 0.0, 0.95},    {0.1, 0.0, -0.08},  {-0.1, 0.0, -0.08}, {0.0, 0.0, 0.12},   {0.0, 0.0, -0.4},
      {0.0, 0.0, -0.4},    {0.0, 0.0, 0.14},   {0.0, 0.0, -0.42},  {0.0, 0.0, -0.42},  {0.0, 0.0, 0.06},
      {0.0, 0.12, -0.05},  {0.0, 0.12, -0.05}, {0.0, 0.0, 0.22},   {0.08, 0.0, 0.12},  {-0.08, 0.0, 0.12},
      {0.0, 0.0, 0.1},     {0.12, 0.0, 0.02},  {-0.12, 0.0, 0.02}, {0.26, 0.0, 0.0},   {-0.26, 0.0, 0.0},
      {0.25, 0.0, 0.0},    {-0.25, 0.0, 0.0},  {0.08, 0.0, 0.0},   {-0.08, 0.0, 0.0},  {0.0, 0.05, 0.1},
      {0.03, 0.03, 0.0},   {-0.03, 0.03, 0.0}, {0.02, 0.05, 0.0},  {-0.02, 0.05, 0.0},
  }};
  return offsets;
}

struct Swing {
  double amplitude, frequency, phase;
  Eigen::Vector3d axis;
};

inline Swing random_swing(Rng& rng) {
  Eigen::Vector3d axis(standard_normal(rng), standard_normal(rng), standard_normal(rng));
  return {uniform(rng, 0.1, 0.6), uniform(rng, 0.2, 1.2), uniform(rng, 0.0, 2.0 * std::numbers::pi), axis.normalized()};
}

// Forward kinematics with one swing rotation per joint, applied in world space
// about the joint's parent. Parents always precede children.
inline Joints pose_at(double time, const std::array<Swing, kNumJoints>& swings, const Eigen::Vector3d& root,
                      double heading) {
  const auto& offsets = rest_offsets();
  std::array<Eigen::Matrix3d, kNumJoints> frames;
  Joints out;
  const Eigen::Matrix3d face(Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitZ()));
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& s = swings[static_cast<std::size_t>(j)];
    const double angle = s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * time + s.phase);
    const Eigen::Matrix3d local(Eigen::AngleAxisd(angle, s.axis));
    const int p = kSkeletonParents[j];
    if (p < 0) {
      frames[0] = face * local;
      out.row(0) = (root + Eigen::Vector3d(0.0, 0.0, offsets[0].z())).transpose();
    } else {
      frames[static_cast<std::size_t>(j)] = frames[static_cast<std::size_t>(p)] * local;
      out.row(j) = out.row(p) + (frames[static_cast<std::size_t>(p)] * offsets[static_cast<std::size_t>(j)]).transpose();
    }
  }
  return out;
}

}  // namespace detail

/// Clean positions of one synthetic duet: [frames] x 2 dancers.
inline std::vector<std::array<Joints, 2>> synth_duet_poses(const SynthConfig& cfg, std::size_t index) {
  Rng rng = derive_rng(cfg.seed, 0x4455455421, index);
  std::array<detail::Swing, kNumJoints> lead, follow_own;
  for (auto& s : lead) s = detail::random_swing(rng);
  for (auto& s : follow_own) s = detail::random_swing(rng);
  std::array<bool, kNumJoints> echoes{};
  for (auto& e : echoes) e = uniform01(rng) < cfg.coupling;
  const double drift_freq = uniform(rng, 0.05, 0.15), drift_amp = uniform(rng, 0.1, 0.3);
  const double lag = static_cast<double>(cfg.lag_frames) / cfg.fps;

  std::vector<std::array<Joints, 2>> out(cfg.frames);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    const double time = static_cast<double>(t) / cfg.fps;
    auto root_at = [&](double tt) {
      return Eigen::Vector3d(drift_amp * std::sin(2.0 * std::numbers::pi * drift_freq * tt), 0.0, 0.0);
    };
    const Eigen::Vector3d root_a = root_at(time) - Eigen::Vector3d(0.0, cfg.separation / 2.0, 0.0);
    const Eigen::Vector3d root_b = root_at(time - lag) + Eigen::Vector3d(0.0, cfg.separation / 2.0, 0.0);
    // The follower evaluates the leader's swings at a delayed time.
    std::array<detail::Swing, kNumJoints> now_b;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      now_b[j] = echoes[j] ? lead[j] : follow_own[j];
      if (echoes[j]) now_b[j].phase -= 2.0 * std::numbers::pi * lead[j].frequency * lag;
    }
    out[t][0] = detail::pose_at(time, lead, root_a, 0.0);
    out[t][1] = detail::pose_at(time, now_b, root_b, std::numbers::pi);
    for (auto& d : out[t])
      for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] += cfg.jitter * standard_normal(rng);
  }
  return out;
}

/// The duet as a tracker would report it, with the configured corruptions.
inline RawFrameStream synth_duet_stream(const SynthConfig& cfg, std::size_t index) {
  cfg.validate();
  const auto poses = synth_duet_poses(cfg, index);
  Rng rng = derive_rng(cfg.seed, 0x4E4F495345, index);
  RawFrameStream stream;
  stream.fps = cfg.fps;
  stream.frames.resize(poses.size());
  bool swapped = false;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    auto& f = stream.frames[t];
    const bool first = t == 0;
    if (!first && uniform01(rng) < cfg.swap_prob) swapped = !swapped;
    if (!first && uniform01(rng) < cfg.drop_frame_prob) continue;
    for (int d = 0; d < 2; ++d) {
      const int who = swapped ? 1 - d : d;
      f.detections.push_back({poses[t][static_cast<std::size_t>(who)], uniform(rng, 0.85, 0.99), d});
    }
    if (!first && uniform01(rng) < cfg.miss_prob)
      f.detections.erase(f.detections.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, 2)));
    if (uniform01(rng) < cfg.extra_prob && f.detections.size() == 2) {
      Detection ghost{poses[t][0], uniform(rng, 0.1, 0.5), 2};
      ghost.joints.rowwise() += Eigen::RowVector3d(uniform(rng, -3.0, 3.0), uniform(rng, 2.0, 4.0), 0.0);
      f.detections.insert(f.detections.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, f.detections.size() + 1)),
                          ghost);
    }
  }
  return stream;
}

inline std::vector<RawFrameStream> synth_duet_streams(const SynthConfig& cfg) {
  std::vector<RawFrameStream> out;
  for (std::size_t i = 0; i < cfg.num_sequences; ++i) out.push_back(synth_duet_stream(cfg, i));
  return out;
}

}  // namespace duetgraph::pose
