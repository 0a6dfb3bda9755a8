// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "duetgraph/core/error.hpp"
#include "duetgraph/model/tensor.hpp"

namespace duetgraph::pose {

/// Rotates feature rows [pos | vel] about the global z axis by `theta`.
/// The feature width must be 4 (x, y, vx, vy) or 6 (x, y, z, vx, vy, vz);
/// x-y components of position and velocity rotate, z is untouched.
template <class T>
void rotate_z_inplace(model::Mat<T>& rows, double theta) {
  const auto f = rows.cols();
  if (f != 4 && f != 6) throw ShapeMismatch("rotate_z: feature width must be 4 or 6");
  const auto half = f / 2;
  const T c = static_cast<T>(std::cos(theta)), s = static_cast<T>(std::sin(theta));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index base : {Eigen::Index{0}, half}) {
      const T x = rows(r, base), y = rows(r, base + 1);
      rows(r, base) = c * x - s * y;
      rows(r, base + 1) = s * x + c * y;
    }
  }
}

template <class T>
model::Mat<T> rotate_z(model::Mat<T> rows, double theta) {
  rotate_z_inplace(rows, theta);
  return rows;
}

/// Shifts every window so the centroid of its input positions is the origin.
/// Targets move with the inputs.
template <class T>
void center_window(model::Mat<T>& inputs, model::Mat<T>& target) {
  const auto half = inputs.cols() / 2;
  const model::RowVec<T> centroid = inputs.leftCols(half).colwise().mean();
  inputs.leftCols(half).rowwise() -= centroid;
  target.leftCols(half).rowwise() -= centroid;
}

}  // namespace duetgraph::pose
