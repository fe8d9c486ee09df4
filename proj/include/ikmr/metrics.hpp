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

#include "ikmr/dynamics.hpp"
#include "ikmr/training.hpp"

namespace ikmr {

/// Mean angular acceleration and jerk over all joints and frames, from
/// forward differences of the per-joint angular speed.
struct SmoothnessReport {
  double mean_acc = 0.0;   // rad/s^2
  double mean_jerk = 0.0;  // rad/s^3
};
SmoothnessReport mean_angular_acc_jerk(const MotionClip& clip);

/// Mean Euclidean distance between corresponding key-joint positions.
double akte(const JointPositions& test, const JointPositions& reference,
            const std::vector<int>& key_joints);

/// Mean linear-acceleration magnitude of the key joints (second central
/// differences, interior frames only).
double akja(const JointPositions& positions, const std::vector<int>& key_joints,
            double fps);

/// Pearson correlation of two equally sized vectors.
double pearson(const ArrayXd& x, const ArrayXd& y);

/// Key joints for the evaluation metrics: named ankle/wrist/knee joints plus
/// the root when present, otherwise root + end-effectors.
std::vector<int> metric_key_joints(const SkeletonTopology& skel);

/// corr(i, j) between flattened encode_A(clip_a_i) and encode_B(clip_b_j)
/// over the dataset. Throws ZeroVarianceError on constant latents.
Eigen::MatrixXd latent_correlation_matrix(const RetargetModel& model,
                                          const PairedDataset& pairs);

struct NoiseSweepPoint {
  double noise_std = 0.0;        // meters
  double akte = 0.0;             // meters
  double akja = 0.0;             // m/s^2, retargeted output
  double akja_source_root = 0.0; // m/s^2, noisy source root trajectory
};

/// Injects seeded Gaussian noise into the source root translations and
/// measures AKTE of the noisy retarget against the clean retarget plus AKJA
/// of the noisy retarget, averaged over clips. Deterministic per seed.
std::vector<NoiseSweepPoint> noise_sweep(const RetargetModel& model,
                                         const std::vector<MotionClip>& clips_a,
                                         const std::vector<double>& noise_levels,
                                         std::uint64_t seed);

}  // namespace ikmr
