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

#include "ikmr/motion.hpp"

namespace ikmr {

/// World-frame joint positions, T x J.
struct JointPositions {
  int frames = 0;
  int joints = 0;
  std::vector<Vec3d> positions;  // row-major [t][j]

  const Vec3d& at(int t, int j) const {
    return positions[static_cast<std::size_t>(t) * joints + j];
  }
  Vec3d& at(int t, int j) {
    return positions[static_cast<std::size_t>(t) * joints + j];
  }
};

/// Forward kinematics. The root's local rotation is the first rotation in
/// every chain; the root position equals root_translation.
JointPositions fk(const SkeletonTopology& skel, const MotionClip& clip);

/// World-frame rotation of every joint (chain products of local rotations).
std::vector<Quatd> fk_global_rotations(const SkeletonTopology& skel,
                                       const MotionClip& clip);

/// fk() restricted to the skeleton's end-effectors, columns in declaration
/// order. Throws EmptyEndEffectorSetError when the skeleton declares none.
JointPositions end_effector_positions(const SkeletonTopology& skel,
                                      const MotionClip& clip);

}  // namespace ikmr
