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

#include "ikmr/skeleton.hpp"

namespace ikmr {

inline constexpr double kQuatUnitTol = 1e-6;

/// Fixed-length motion window: per-frame root translation plus per-joint
/// local rotations, (w,x,y,z) unit quaternions relative to the parent frame.
struct MotionClip {
  std::string skeleton;             // name of the SkeletonTopology
  double fps = 30.0;
  std::vector<Vec3d> root_translation;  // length T
  std::vector<Quatd> rotations;         // T*J, row-major [t][j]

  int frames() const { return static_cast<int>(root_translation.size()); }
  int joints() const {
    return frames() == 0 ? 0
                         : static_cast<int>(rotations.size()) / frames();
  }

  const Quatd& rot(int t, int j) const {
    return rotations[static_cast<std::size_t>(t) * joints() + j];
  }
  Quatd& rot(int t, int j) {
    return rotations[static_cast<std::size_t>(t) * joints() + j];
  }

  /// Throws InvalidClipError / SkeletonMismatchError unless every invariant
  /// holds: unit hemisphere-canonical quaternions, consistent array sizes,
  /// positive fps, and (when a skeleton is given) matching joint count.
  void validate(const SkeletonTopology* skel = nullptr) const;
};

/// Rest-pose clip: identity rotations, zero root translation.
MotionClip make_rest_clip(const SkeletonTopology& skel, int frames,
                          double fps = 30.0);

/// Splits a clip of T >= window frames into windows with the given overlap
/// between consecutive starts; the final window is aligned to the clip end.
/// Returns the windows and their start frames.
struct WindowSplit {
  std::vector<MotionClip> windows;
  std::vector<int> starts;
};
WindowSplit split_windows(const MotionClip& clip, int window, int overlap);

/// Reassembles windows produced by split_windows back into one clip,
/// cross-fading overlapping frames linearly in quaternion log space
/// (root translation is lerped).
MotionClip blend_windows(const WindowSplit& split, int total_frames,
                         int overlap);

}  // namespace ikmr
