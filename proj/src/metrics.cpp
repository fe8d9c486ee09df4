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

#include "ikmr/metrics.hpp"

#include <cctype>
#include <cmath>

#include "ikmr/rng.hpp"

namespace ikmr {

SmoothnessReport mean_angular_acc_jerk(const MotionClip& clip) {
  const int t_count = clip.frames();
  const int j_count = clip.joints();
  if (t_count < 4) {
    throw TooShortError("smoothness metrics need at least 4 frames");
  }
  const double fps = clip.fps;
  SmoothnessReport rep;
  long acc_n = 0, jerk_n = 0;
  for (int j = 0; j < j_count; ++j) {
    std::vector<double> omega(t_count - 1);
    for (int t = 0; t + 1 < t_count; ++t) {
      omega[t] = quat_geodesic_angle(clip.rot(t, j), clip.rot(t + 1, j)) * fps;
    }
    std::vector<double> acc(omega.size() - 1);
    for (std::size_t t = 0; t + 1 < omega.size(); ++t) {
      acc[t] = std::abs(omega[t + 1] - omega[t]) * fps;
      rep.mean_acc += acc[t];
      ++acc_n;
    }
    for (std::size_t t = 0; t + 1 < acc.size(); ++t) {
      rep.mean_jerk += std::abs(acc[t + 1] - acc[t]) * fps;
      ++jerk_n;
    }
  }
  rep.mean_acc /= static_cast<double>(acc_n);
  rep.mean_jerk /= static_cast<double>(jerk_n);
  return rep;
}

double akte(const JointPositions& test, const JointPositions& reference,
            const std::vector<int>& key_joints) {
  if (test.frames != reference.frames || test.joints != reference.joints) {
    throw ShapeMismatchError("akte: trajectory shapes differ");
  }
  if (key_joints.empty()) throw ShapeMismatchError("akte: no key joints");
  for (const int k : key_joints) {
    if (k < 0 || k >= test.joints) {
      throw ShapeMismatchError("akte: key joint out of range");
    }
  }
  double acc = 0.0;
  for (int t = 0; t < test.frames; ++t) {
    for (const int k : key_joints) {
      acc += (test.at(t, k) - reference.at(t, k)).norm();
    }
  }
  return acc / (static_cast<double>(test.frames) * key_joints.size());
}

double akja(const JointPositions& positions, const std::vector<int>& key_joints,
            double fps) {
  if (positions.frames < 3) {
    throw TooShortError("akja needs at least 3 frames");
  }
  if (key_joints.empty()) throw ShapeMismatchError("akja: no key joints");
  double acc = 0.0;
  long n = 0;
  for (int t = 1; t + 1 < positions.frames; ++t) {
    for (const int k : key_joints) {
      const Vec3d second = positions.at(t + 1, k) - 2.0 * positions.at(t, k) +
                           positions.at(t - 1, k);
      acc += second.norm() * fps * fps;
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

double pearson(const ArrayXd& x, const ArrayXd& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ShapeMismatchError("pearson: vectors must match and have n >= 2");
  }
  const double mx = x.mean();
  const double my = y.mean();
  const ArrayXd dx = x - mx;
  const ArrayXd dy = y - my;
  const double vx = dx.square().sum();
  const double vy = dy.square().sum();
  if (vx <= 0.0 || vy <= 0.0) {
    throw ZeroVarianceError("pearson: constant input vector");
  }
  return (dx * dy).sum() / std::sqrt(vx * vy);
}

std::vector<int> metric_key_joints(const SkeletonTopology& skel) {
  std::vector<int> named;
  for (int j = 0; j < skel.joint_count(); ++j) {
    std::string lower;
    for (const char c : skel.joint_names[j]) {
      lower.push_back(static_cast<char>(std::tolower(c)));
    }
    if (lower.find("ankle") != std::string::npos ||
        lower.find("wrist") != std::string::npos ||
        lower.find("knee") != std::string::npos) {
      named.push_back(j);
    }
  }
  std::vector<int> out{skel.root()};
  if (!named.empty()) {
    out.insert(out.end(), named.begin(), named.end());
  } else {
    out.insert(out.end(), skel.end_effectors.begin(),
               skel.end_effectors.end());
  }
  return out;
}

Eigen::MatrixXd latent_correlation_matrix(const RetargetModel& model,
                                          const PairedDataset& pairs) {
  const int n = static_cast<int>(pairs.size());
  if (n < 2) {
    throw ConfigError("latent correlation needs at least 2 pairs");
  }
  std::vector<ArrayXd> lat_a(n), lat_b(n);
  for (int i = 0; i < n; ++i) {
    lat_a[i] = encode(model, Side::A, pairs.pairs[i].first).v;
    lat_b[i] = encode(model, Side::B, pairs.pairs[i].second).v;
  }
  Eigen::MatrixXd corr(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      corr(i, j) = pearson(lat_a[i], lat_b[j]);
    }
  }
  return corr;
}

std::vector<NoiseSweepPoint> noise_sweep(const RetargetModel& model,
                                         const std::vector<MotionClip>& clips_a,
                                         const std::vector<double>& noise_levels,
                                         std::uint64_t seed) {
  if (clips_a.empty()) throw EmptyDatasetError("noise_sweep: no clips");
  for (std::size_t i = 0; i < noise_levels.size(); ++i) {
    if (noise_levels[i] < 0.0 ||
        (i > 0 && noise_levels[i] < noise_levels[i - 1])) {
      throw ConfigError("noise levels must be non-negative and ascending");
    }
  }
  const std::vector<int> keys = metric_key_joints(model.skel_b);

  std::vector<MotionClip> clean_out;
  clean_out.reserve(clips_a.size());
  for (const auto& clip : clips_a) clean_out.push_back(retarget(model, clip));

  std::vector<NoiseSweepPoint> out;
  for (std::size_t li = 0; li < noise_levels.size(); ++li) {
    const double sigma = noise_levels[li];
    NoiseSweepPoint point;
    point.noise_std = sigma;
    for (std::size_t ci = 0; ci < clips_a.size(); ++ci) {
      Rng rng(fnv1a("noise_sweep") ^ (seed + 0x9e3779b97f4a7c15ull * (li + 1)) ^
              (0x517cc1b727220a95ull * (ci + 1)));
      MotionClip noisy = clips_a[ci];
      for (auto& rt : noisy.root_translation) {
        rt += sigma * Vec3d(rng.normal(), rng.normal(), rng.normal());
      }
      const MotionClip noisy_out = retarget(model, noisy);
      const JointPositions p_noisy = fk(model.skel_b, noisy_out);
      const JointPositions p_clean = fk(model.skel_b, clean_out[ci]);
      point.akte += akte(p_noisy, p_clean, keys);
      point.akja += akja(p_noisy, keys, noisy_out.fps);

      // The noisy source root trajectory itself (root position equals the
      // root translation).
      JointPositions root_only;
      root_only.frames = noisy.frames();
      root_only.joints = 1;
      root_only.positions = noisy.root_translation;
      point.akja_source_root += akja(root_only, {0}, noisy.fps);
    }
    point.akte /= static_cast<double>(clips_a.size());
    point.akja /= static_cast<double>(clips_a.size());
    point.akja_source_root /= static_cast<double>(clips_a.size());
    out.push_back(point);
  }
  return out;
}

}  // namespace ikmr
