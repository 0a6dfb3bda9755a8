// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

namespace duetgraph::model {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <class T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

}  // namespace duetgraph::model
