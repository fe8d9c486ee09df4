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

#include <string>
#include <vector>

#include "ikmr/quaternion.hpp"

namespace ikmr {

inline constexpr int kNoParent = -1;

/// Joint tree with rest-pose offsets. Immutable after validate(); shared
/// read-only across workers.
struct SkeletonTopology {
  std::string name;
  std::vector<std::string> joint_names;
  std::vector<int> parent;          // kNoParent for the root
  std::vector<Vec3d> offset;        // meters, in the parent frame
  std::vector<int> end_effectors;   // leaf joints, declaration order
  int neighbor_distance = 1;
  std::vector<Vec3d> axes;          // per-joint dominant rotation axis (unit)

  int joint_count() const { return static_cast<int>(parent.size()); }
  int root() const;
  bool is_leaf(int joint) const;
  int joint_index(const std::string& joint_name) const;  // -1 if unknown

  std::vector<std::vector<int>> children() const;

  /// Neighborhoods N_i: all joints within tree distance d of i, i included.
  /// Symmetric by construction. Indices sorted ascending.
  std::vector<std::vector<int>> neighborhoods(int distance) const;
  std::vector<std::vector<int>> neighborhoods() const {
    return neighborhoods(neighbor_distance);
  }

  /// Default dominant axis for joints without an explicit one: the unit axes
  /// x, y, z cycling with the joint index.
  static Vec3d default_axis(int joint);

  /// Checks every structural invariant; throws InvalidSkeletonError with a
  /// description of the first violation. Also fills missing axes with the
  /// default rule and normalizes explicit ones.
  void validate();
};

/// Builds a skeleton from parallel arrays, validating it.
SkeletonTopology make_skeleton(std::string name,
                               std::vector<std::string> joint_names,
                               std::vector<int> parent,
                               std::vector<Vec3d> offset,
                               std::vector<int> end_effectors,
                               int neighbor_distance = 1);

}  // namespace ikmr
