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

#include "ikmr/kinematics.hpp"
#include "ikmr/ops.hpp"

namespace ikmr {

/// Forward kinematics inside the autodiff graph. Rotations are raw
/// [T x J x 4] network outputs (normalized to unit quaternions as part of
/// the graph); root_translation is [T x 3]. Returns positions [T x J x 3].
Tensor fk_differentiable(const SkeletonTopology& skel, const Tensor& rotations,
                         const Tensor& root_translation);

/// End-effector columns of fk_differentiable, [T x |EE| x 3], declaration
/// order.
Tensor fk_differentiable_ee(const SkeletonTopology& skel,
                            const Tensor& rotations,
                            const Tensor& root_translation);

}  // namespace ikmr
