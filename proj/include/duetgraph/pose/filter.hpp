// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <fftw3.h>

#include "duetgraph/core/error.hpp"
#include "duetgraph/pose/cleaning.hpp"

namespace duetgraph::pose {

namespace detail {

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

// Runs one r2r transform of `kind` over `count` interleaved tracks of length n
// stored column-wise (track c occupies buf[t * count + c]).
inline void r2r_columns(std::vector<double>& buf, int n, int count, fftw_r2r_kind kind) {
  const int dims[1] = {n};
  Plan plan(fftw_plan_many_r2r(1, dims, count, buf.data(), nullptr, count, 1, buf.data(), nullptr, count, 1, &kind,
                               FFTW_ESTIMATE));
  if (!plan) throw ShapeMismatch("could not plan DCT of length " + std::to_string(n));
  fftw_execute(plan.get());
}

}  // namespace detail

/// Number of coefficients kept for a track of length `t`: ceil(keep_ratio * t).
/// A relative slack absorbs products such as 0.1 * 30 landing above 3.
inline std::size_t lowpass_cutoff(std::size_t t, double keep_ratio) {
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) throw ShapeMismatch("keep_ratio must lie in (0, 1]");
  const double x = keep_ratio * static_cast<double>(t);
  const auto k = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
  return std::min(std::max<std::size_t>(k, 1), t);
}

/// Orthonormal DCT-II of a track.
inline std::vector<double> dct2(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> buf(x.begin(), x.end());
  detail::r2r_columns(buf, n, 1, FFTW_REDFT10);
  const double s0 = std::sqrt(1.0 / (4.0 * n)), s = std::sqrt(1.0 / (2.0 * n));
  for (int k = 0; k < n; ++k) buf[static_cast<std::size_t>(k)] *= k == 0 ? s0 : s;
  return buf;
}

/// Orthonormal DCT-III, the inverse of dct2.
inline std::vector<double> idct2(std::span<const double> c) {
  const int n = static_cast<int>(c.size());
  std::vector<double> buf(c.begin(), c.end());
  const double s0 = 1.0 / std::sqrt(static_cast<double>(n)), s = 1.0 / std::sqrt(2.0 * n);
  for (int k = 0; k < n; ++k) buf[static_cast<std::size_t>(k)] *= k == 0 ? s0 : s;
  detail::r2r_columns(buf, n, 1, FFTW_REDFT01);
  return buf;
}

/// Low-pass filter of many equal-length tracks at once. `tracks` holds
/// `count` tracks column-wise: element (t, c) sits at t * count + c.
inline void dct_lowpass_columns(std::vector<double>& tracks, std::size_t t, std::size_t count, double keep_ratio) {
  if (t < 2) throw SequenceTooShort("dct_lowpass needs at least 2 samples");
  if (tracks.size() != t * count) throw ShapeMismatch("dct_lowpass: buffer does not hold the stated tracks");
  const std::size_t cutoff = lowpass_cutoff(t, keep_ratio);
  if (cutoff == t) return;  // nothing removed; skip the round trip
  detail::r2r_columns(tracks, static_cast<int>(t), static_cast<int>(count), FFTW_REDFT10);
  std::fill(tracks.begin() + static_cast<std::ptrdiff_t>(cutoff * count), tracks.end(), 0.0);
  detail::r2r_columns(tracks, static_cast<int>(t), static_cast<int>(count), FFTW_REDFT01);
  // REDFT10 followed by REDFT01 scales by 2n; the orthonormal pair does not.
  const double scale = 1.0 / (2.0 * static_cast<double>(t));
  for (double& v : tracks) v *= scale;
}

/// Zeroes DCT-II coefficients with index >= ceil(keep_ratio * T) and inverts.
inline std::vector<double> dct_lowpass(std::span<const double> series, double keep_ratio) {
  std::vector<double> out(series.begin(), series.end());
  dct_lowpass_columns(out, out.size(), 1, keep_ratio);
  return out;
}

/// Filters every joint coordinate of both dancers independently.
inline PoseSequence smooth_sequence(PoseSequence seq, double keep_ratio) {
  const std::size_t count = 2 * kNumJoints * 3;
  dct_lowpass_columns(seq.data, seq.frames, count, keep_ratio);
  return seq;
}

/// Positions and forward-difference velocities per frame: [T, 2, 29, 6].
/// The last frame repeats the previous velocity.
inline std::vector<double> estimate_velocities(const PoseSequence& seq) {
  if (seq.frames < 2) throw SequenceTooShort("velocity estimation needs at least 2 frames");
  const std::size_t per_frame = 2 * kNumJoints;
  std::vector<double> out(seq.frames * per_frame * 6);
  for (std::size_t t = 0; t < seq.frames; ++t) {
    const std::size_t a = t + 1 < seq.frames ? t : t - 1;
    for (std::size_t p = 0; p < per_frame; ++p)
      for (std::size_t c = 0; c < 3; ++c) {
        const double now = seq.data[(t * per_frame + p) * 3 + c];
        const double v = (seq.data[((a + 1) * per_frame + p) * 3 + c] - seq.data[(a * per_frame + p) * 3 + c]) * seq.fps;
        out[(t * per_frame + p) * 6 + c] = now;
        out[(t * per_frame + p) * 6 + 3 + c] = v;
      }
  }
  return out;
}

}  // namespace duetgraph::pose
