// Copyright 2026 The IKMR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>

#include "ikmr/tensor.hpp"

namespace ikmr {

// Elementwise ops accept exactly matching shapes, or a rank-0 scalar on
// either side; no other broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor tanh_op(const Tensor& a);

// Full reductions to shape [].
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean of squared differences over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

// Structural ops. The last axis is the channel axis.
Tensor concat_last(const std::vector<Tensor>& parts);
Tensor slice_last(const Tensor& a, Eigen::Index c0, Eigen::Index c1);
Tensor slice_first(const Tensor& a, Eigen::Index i0, Eigen::Index i1);
Tensor reshape(const Tensor& a, Shape shape);

/// Normalizes each length-`row` group along the last axis to unit L2 norm.
/// Rows with squared norm below 1e-30 are replaced by (1, 0, ..., 0) and
/// receive no gradient.
Tensor row_l2_normalize(const Tensor& a);

/// 1-D cross-correlation over the leading (time) axis.
/// input [T x C_in], weight [C_out x C_in x K] with K odd, optional bias
/// [C_out]; output [T' x C_out] with T' = (T + 2*padding - K)/stride + 1.
Tensor temporal_conv1d(const Tensor& input, const Tensor& weight,
                       const Tensor& bias, int stride = 1, int padding = 0);

/// y[.., c] = x[.., c] + b[c] for a bias vector matching the last axis.
Tensor add_channel_bias(const Tensor& x, const Tensor& b);

// Rank-3 grid ops on [T x J x C] tensors.
Tensor select_joint(const Tensor& x, Eigen::Index j);           // -> [T x C]
Tensor stack_joints(const std::vector<Tensor>& joints);         // -> [T x J x C]
Tensor tile_time(const Tensor& x, Eigen::Index t);              // [1 x J x C] -> [T x J x C]

/// Spatio-temporal average pooling: channels of each coarse joint are the
/// mean over its preimage; time is mean-pooled with the given stride.
/// assign maps fine joint -> coarse joint and must cover [0, coarse).
Tensor grid_pool(const Tensor& x, const std::vector<int>& assign, int coarse,
                 int temporal_stride);

/// Inverse of grid_pool's shape change: fine joints copy their coarse
/// joint's channels, time is nearest-neighbor upsampled by the stride.
Tensor grid_unpool(const Tensor& x, const std::vector<int>& assign,
                   Eigen::Index fine, int temporal_stride);

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for a scalar-valued function of one tensor. h must lie in [1e-7, 1e-3].
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& point, double h);

/// Multi-parameter variant: perturbs every coordinate of every point.
double grad_check_many(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& points, double h);

}  // namespace ikmr
