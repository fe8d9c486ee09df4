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

#include "ikmr/motion.hpp"

#include <algorithm>
#include <cmath>

namespace ikmr {

namespace {

bool is_canonical(const Quatd& q) {
  if (q.w() > 0.0) return true;
  if (q.w() < 0.0) return false;
  if (q.x() != 0.0) return q.x() > 0.0;
  if (q.y() != 0.0) return q.y() > 0.0;
  if (q.z() != 0.0) return q.z() > 0.0;
  return true;
}

}  // namespace

void MotionClip::validate(const SkeletonTopology* skel) const {
  const int t_count = frames();
  if (t_count < 1) throw InvalidClipError("clip has no frames");
  if (!(fps > 0.0)) throw InvalidClipError("fps must be > 0");
  if (rotations.size() % root_translation.size() != 0) {
    throw InvalidClipError("rotation array is not T x J");
  }
  const int j_count = joints();
  if (j_count < 1) throw InvalidClipError("clip has no joints");
  if (skel != nullptr) {
    if (skel->name != skeleton) {
      throw SkeletonMismatchError("clip references skeleton '" + skeleton +
                                  "', expected '" + skel->name + "'");
    }
    if (skel->joint_count() != j_count) {
      throw SkeletonMismatchError(
          "clip joint count " + std::to_string(j_count) +
          " != skeleton joint count " + std::to_string(skel->joint_count()));
    }
  }
  for (int t = 0; t < t_count; ++t) {
    for (int j = 0; j < j_count; ++j) {
      const Quatd& q = rot(t, j);
      if (std::abs(q.norm() - 1.0) > kQuatUnitTol) {
        throw InvalidClipError("non-unit quaternion at frame " +
                               std::to_string(t) + " joint " +
                               std::to_string(j));
      }
      if (!is_canonical(q)) {
        throw InvalidClipError("non-canonical quaternion at frame " +
                               std::to_string(t) + " joint " +
                               std::to_string(j));
      }
    }
  }
}

MotionClip make_rest_clip(const SkeletonTopology& skel, int frames,
                          double fps) {
  MotionClip clip;
  clip.skeleton = skel.name;
  clip.fps = fps;
  clip.root_translation.assign(frames, Vec3d::Zero());
  clip.rotations.assign(static_cast<std::size_t>(frames) * skel.joint_count(),
                        Quatd::Identity());
  return clip;
}

WindowSplit split_windows(const MotionClip& clip, int window, int overlap) {
  if (window < 2 || overlap < 0 || overlap >= window) {
    throw InvalidClipError("invalid window/overlap");
  }
  const int total = clip.frames();
  if (total < window) {
    throw InvalidClipError("clip shorter than one window");
  }
  const int j_count = clip.joints();
  const int stride = window - overlap;

  std::vector<int> starts;
  for (int s = 0; s + window < total; s += stride) starts.push_back(s);
  starts.push_back(total - window);
  // Drop a duplicate start produced when the clip length is an exact fit.
  if (starts.size() >= 2 && starts[starts.size() - 2] == starts.back()) {
    starts.pop_back();
  }

  WindowSplit out;
  out.starts = starts;
  for (const int s : starts) {
    MotionClip w;
    w.skeleton = clip.skeleton;
    w.fps = clip.fps;
    w.root_translation.assign(clip.root_translation.begin() + s,
                              clip.root_translation.begin() + s + window);
    w.rotations.assign(
        clip.rotations.begin() + static_cast<std::size_t>(s) * j_count,
        clip.rotations.begin() + static_cast<std::size_t>(s + window) * j_count);
    out.windows.push_back(std::move(w));
  }
  return out;
}

MotionClip blend_windows(const WindowSplit& split, int total_frames,
                         int overlap) {
  if (split.windows.empty()) throw InvalidClipError("no windows to blend");
  const MotionClip& first = split.windows.front();
  const int window = first.frames();
  const int j_count = first.joints();

  MotionClip out;
  out.skeleton = first.skeleton;
  out.fps = first.fps;
  out.root_translation.assign(total_frames, Vec3d::Zero());
  out.rotations.assign(static_cast<std::size_t>(total_frames) * j_count,
                       Quatd::Identity());

  // Fill from each window in order; frames covered by two windows are
  // cross-faded with weight ramping linearly across the overlap region.
  std::vector<int> covered(total_frames, -1);
  for (std::size_t w = 0; w < split.windows.size(); ++w) {
    const MotionClip& win = split.windows[w];
    const int start = split.starts[w];
    for (int f = 0; f < window; ++f) {
      const int t = start + f;
      if (covered[t] < 0) {
        out.root_translation[t] = win.root_translation[f];
        for (int j = 0; j < j_count; ++j) out.rot(t, j) = win.rot(f, j);
        covered[t] = static_cast<int>(w);
      } else {
        // Seam frame: fade old -> new across the actual overlap width.
        const int prev_end = split.starts[covered[t]] + window;  // exclusive
        const int n = std::min(overlap, prev_end - start);
        const int idx = t - start;
        const double lambda =
            n <= 0 ? 1.0 : static_cast<double>(idx + 1) / (n + 1);
        out.root_translation[t] = (1.0 - lambda) * out.root_translation[t] +
                                  lambda * win.root_translation[f];
        for (int j = 0; j < j_count; ++j) {
          out.rot(t, j) =
              quat_slerp_log(out.rot(t, j), win.rot(f, j), lambda);
        }
        covered[t] = static_cast<int>(w);
      }
    }
  }
  for (auto& q : out.rotations) q = quat_normalize(q);
  return out;
}

}  // namespace ikmr
