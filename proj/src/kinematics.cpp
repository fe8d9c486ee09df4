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

#include "ikmr/kinematics.hpp"

namespace ikmr {

namespace {

// Joint indices ordered so that parents precede children.
std::vector<int> topological_order(const SkeletonTopology& skel) {
  std::vector<int> order;
  order.reserve(skel.joint_count());
  std::vector<char> placed(skel.joint_count(), 0);
  order.push_back(skel.root());
  placed[skel.root()] = 1;
  const auto kids = skel.children();
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (const int c : kids[order[head]]) {
      if (!placed[c]) {
        order.push_back(c);
        placed[c] = 1;
      }
    }
  }
  return order;
}

}  // namespace

JointPositions fk(const SkeletonTopology& skel, const MotionClip& clip) {
  clip.validate(&skel);
  const int t_count = clip.frames();
  const int j_count = clip.joints();
  const auto order = topological_order(skel);

  JointPositions out;
  out.frames = t_count;
  out.joints = j_count;
  out.positions.resize(static_cast<std::size_t>(t_count) * j_count);

  std::vector<Quatd> global(j_count);
  for (int t = 0; t < t_count; ++t) {
    for (const int j : order) {
      const int p = skel.parent[j];
      if (p == kNoParent) {
        global[j] = clip.rot(t, j);
        out.at(t, j) = clip.root_translation[t];
      } else {
        out.at(t, j) = out.at(t, p) + quat_rotate(global[p], skel.offset[j]);
        global[j] = quat_mul(global[p], clip.rot(t, j));
      }
    }
  }
  return out;
}

std::vector<Quatd> fk_global_rotations(const SkeletonTopology& skel,
                                       const MotionClip& clip) {
  clip.validate(&skel);
  const int t_count = clip.frames();
  const int j_count = clip.joints();
  const auto order = topological_order(skel);

  std::vector<Quatd> global(static_cast<std::size_t>(t_count) * j_count);
  for (int t = 0; t < t_count; ++t) {
    for (const int j : order) {
      const int p = skel.parent[j];
      const std::size_t idx = static_cast<std::size_t>(t) * j_count + j;
      if (p == kNoParent) {
        global[idx] = clip.rot(t, j);
      } else {
        global[idx] =
            quat_mul(global[static_cast<std::size_t>(t) * j_count + p],
                     clip.rot(t, j));
      }
    }
  }
  return global;
}

JointPositions end_effector_positions(const SkeletonTopology& skel,
                                      const MotionClip& clip) {
  if (skel.end_effectors.empty()) {
    throw EmptyEndEffectorSetError("skeleton '" + skel.name +
                                   "' declares no end-effectors");
  }
  const JointPositions full = fk(skel, clip);
  JointPositions out;
  out.frames = full.frames;
  out.joints = static_cast<int>(skel.end_effectors.size());
  out.positions.resize(static_cast<std::size_t>(out.frames) * out.joints);
  for (int t = 0; t < out.frames; ++t) {
    for (int e = 0; e < out.joints; ++e) {
      out.at(t, e) = full.at(t, skel.end_effectors[e]);
    }
  }
  return out;
}

}  // namespace ikmr
