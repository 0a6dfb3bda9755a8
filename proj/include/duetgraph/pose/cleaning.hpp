// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// Repair of raw two-person keypoint streams: missing frames, missed and extra
// detections, and identity swaps between the two tracks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "duetgraph/core/error.hpp"

namespace duetgraph::pose {

using json = nlohmann::json;

inline constexpr int kNumJoints = 29;

/// Parent of each joint in the 29-joint skeleton (root is -1).
inline constexpr int kSkeletonParents[kNumJoints] = {-1, 0,  0,  0,  1,  2,  3,  4,  5,  6,  7,  8,  9,  9, 9,
                                                     12, 13, 14, 16, 17, 18, 19, 20, 21, 15, 22, 23, 10, 11};

using Joints = Eigen::Matrix<double, kNumJoints, 3, Eigen::RowMajor>;

struct Detection {
  Joints joints = Joints::Zero();
  double confidence = 1.0;
  int person_id = 0;
};

/// What the cleaning pipeline did to a frame.
enum FrameFlag : unsigned {
  kFlagNone = 0,
  kFlagFilled = 1u << 0,     // copied from the previous frame
  kFlagMatched = 1u << 1,    // a missing dancer was copied in
  kFlagPruned = 1u << 2,     // extra detections dropped
  kFlagSwapped = 1u << 3,    // labels swapped to stay consistent
  kFlagAmbiguous = 1u << 4,  // a tie was broken by index
};

struct FrameRecord {
  std::vector<Detection> detections;
  unsigned flags = kFlagNone;
};

struct RawFrameStream {
  double fps = 30.0;
  std::vector<FrameRecord> frames;
};

/// Sum over joints of Euclidean distances between two poses.
inline double pose_distance(const Joints& a, const Joints& b) { return (a - b).rowwise().norm().sum(); }

/// Empty frames take a copy of the previous frame's detections.
inline RawFrameStream fill_missing_frames(RawFrameStream stream) {
  if (stream.frames.empty() || stream.frames.front().detections.empty())
    throw EmptyLeadingFrames("the stream must start with a frame that has at least one detection");
  for (std::size_t t = 1; t < stream.frames.size(); ++t) {
    auto& f = stream.frames[t];
    if (!f.detections.empty()) continue;
    f.detections = stream.frames[t - 1].detections;
    f.flags |= kFlagFilled;
  }
  return stream;
}

/// A frame with one detection gets the missing dancer from `prev`: the
/// previous person farther from the detection is assumed unseen and copied
/// in. The output keeps `prev`'s person order.
inline FrameRecord resolve_single_detection(const FrameRecord& frame, const FrameRecord& prev) {
  if (prev.detections.size() != 2)
    throw BadArity("previous frame has " + std::to_string(prev.detections.size()) + " detections, expected 2");
  if (frame.detections.size() != 1)
    throw BadArity("frame has " + std::to_string(frame.detections.size()) + " detections, expected 1");
  const auto& seen = frame.detections.front();
  const double d0 = pose_distance(seen.joints, prev.detections[0].joints);
  const double d1 = pose_distance(seen.joints, prev.detections[1].joints);
  FrameRecord out = frame;
  out.flags |= kFlagMatched;
  if (d0 == d1) out.flags |= kFlagAmbiguous;
  // The detection belongs to the closer person; ties go to person 0.
  const std::size_t matched = d1 < d0 ? 1 : 0;
  out.detections.assign(2, Detection{});
  out.detections[matched] = seen;
  out.detections[1 - matched] = prev.detections[1 - matched];
  return out;
}

/// Keeps the two most confident detections in their original order.
inline FrameRecord prune_extra_detections(const FrameRecord& frame) {
  if (frame.detections.size() <= 2) return frame;
  std::vector<std::size_t> order(frame.detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frame.detections[a].confidence > frame.detections[b].confidence;
  });
  const std::size_t first = std::min(order[0], order[1]), second = std::max(order[0], order[1]);
  FrameRecord out;
  out.flags = frame.flags | kFlagPruned;
  if (frame.detections[order[1]].confidence == frame.detections[order[2]].confidence) out.flags |= kFlagAmbiguous;
  out.detections = {frame.detections[first], frame.detections[second]};
  return out;
}

/// Forward scan: each frame's two labels are swapped when the crossed
/// assignment to the (already corrected) previous frame is strictly cheaper.
inline RawFrameStream enforce_index_consistency(RawFrameStream stream) {
  for (std::size_t t = 0; t < stream.frames.size(); ++t)
    if (stream.frames[t].detections.size() != 2)
      throw BadArity("frame " + std::to_string(t) + " has " + std::to_string(stream.frames[t].detections.size()) +
                     " detections, expected 2");
  for (std::size_t t = 1; t < stream.frames.size(); ++t) {
    const auto& prev = stream.frames[t - 1].detections;
    auto& cur = stream.frames[t];
    const double keep = pose_distance(cur.detections[0].joints, prev[0].joints) +
                        pose_distance(cur.detections[1].joints, prev[1].joints);
    const double cross = pose_distance(cur.detections[0].joints, prev[1].joints) +
                         pose_distance(cur.detections[1].joints, prev[0].joints);
    if (cross < keep) {
      std::swap(cur.detections[0], cur.detections[1]);
      cur.flags |= kFlagSwapped;
    }
  }
  return stream;
}

/// Cleaned two-dancer positions.
struct PoseSequence {
  double fps = 30.0;
  std::size_t frames = 0;
  std::vector<double> data;     // [T, 2, 29, 3]
  std::vector<unsigned> flags;  // per frame

  double& at(std::size_t t, std::size_t dancer, std::size_t joint, std::size_t c) {
    return data[((t * 2 + dancer) * kNumJoints + joint) * 3 + c];
  }
  double at(std::size_t t, std::size_t dancer, std::size_t joint, std::size_t c) const {
    return data[((t * 2 + dancer) * kNumJoints + joint) * 3 + c];
  }
};

/// Full repair: fill, prune, resolve single detections, then fix identities.
inline PoseSequence clean_stream(const RawFrameStream& raw) {
  if (!(raw.fps > 0.0)) throw BadArity("fps must be positive");
  auto stream = fill_missing_frames(raw);
  for (std::size_t t = 0; t < stream.frames.size(); ++t) {
    auto& f = stream.frames[t];
    if (f.detections.size() > 2) f = prune_extra_detections(f);
    if (f.detections.size() == 1) {
      if (t == 0) throw BadArity("the first frame must show both dancers");
      f = resolve_single_detection(f, stream.frames[t - 1]);
    }
  }
  stream = enforce_index_consistency(std::move(stream));

  PoseSequence seq;
  seq.fps = stream.fps;
  seq.frames = stream.frames.size();
  seq.data.resize(seq.frames * 2 * kNumJoints * 3);
  for (std::size_t t = 0; t < seq.frames; ++t) {
    seq.flags.push_back(stream.frames[t].flags);
    for (std::size_t d = 0; d < 2; ++d)
      for (std::size_t j = 0; j < kNumJoints; ++j)
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = stream.frames[t].detections[d].joints(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
          if (!std::isfinite(v))
            throw NonFiniteState("frame " + std::to_string(t) + " dancer " + std::to_string(d) + " has a non-finite joint");
          seq.at(t, d, j, c) = v;
        }
  }
  return seq;
}

// --- JSON lines -------------------------------------------------------------
//
// One frame per line:
//   {"frame": 12, "detections": [{"person_id": 0, "confidence": 0.93,
//                                 "joints": [[x, y, z], ... 29 rows]}]}
// An optional line {"fps": 29.97} sets the frame rate. Frame indices that are
// skipped become empty frames.

inline Detection detection_from_json(const json& j, const std::string& where) {
  Detection d;
  d.person_id = j.value("person_id", 0);
  d.confidence = j.value("confidence", 1.0);
  const auto& rows = j.at("joints");
  if (!rows.is_array() || rows.size() != kNumJoints)
    throw IoError(where + ": expected " + std::to_string(kNumJoints) + " joints");
  for (int r = 0; r < kNumJoints; ++r) {
    if (!rows[r].is_array() || rows[r].size() != 3) throw IoError(where + ": joint rows must have 3 coordinates");
    for (int c = 0; c < 3; ++c) d.joints(r, c) = rows[r][c].get<double>();
  }
  return d;
}

inline json detection_to_json(const Detection& d) {
  json rows = json::array();
  for (int r = 0; r < kNumJoints; ++r) rows.push_back({d.joints(r, 0), d.joints(r, 1), d.joints(r, 2)});
  return {{"person_id", d.person_id}, {"confidence", d.confidence}, {"joints", rows}};
}

inline RawFrameStream read_keypoints_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  RawFrameStream stream;
  std::map<std::size_t, FrameRecord> frames;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      if (j.contains("fps") && !j.contains("detections")) {
        stream.fps = j.at("fps").get<double>();
        continue;
      }
      const auto index = j.at("frame").get<std::size_t>();
      auto& rec = frames[index];
      for (const auto& d : j.at("detections")) rec.detections.push_back(detection_from_json(d, where));
    } catch (const json::exception& e) {
      throw IoError(where + ": " + e.what());
    }
  }
  if (frames.empty()) throw IoError("'" + path + "' holds no frames");
  const std::size_t first = frames.begin()->first, last = frames.rbegin()->first;
  stream.frames.resize(last - first + 1);
  for (auto& [index, rec] : frames) stream.frames[index - first] = std::move(rec);
  return stream;
}

inline void write_keypoints_jsonl(const std::string& path, const RawFrameStream& stream) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << json{{"fps", stream.fps}}.dump() << '\n';
  for (std::size_t t = 0; t < stream.frames.size(); ++t) {
    json dets = json::array();
    for (const auto& d : stream.frames[t].detections) dets.push_back(detection_to_json(d));
    os << json{{"frame", t}, {"detections", dets}}.dump() << '\n';
  }
  if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace duetgraph::pose
