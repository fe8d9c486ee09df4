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

#include <map>
#include <span>

#include "ikmr/kinematics.hpp"

namespace ikmr {

struct JointLimit {
  double lo = 0.0, hi = 0.0;  // radians
};

/// Per-joint position bounds plus global rate, acceleration, and ground
/// constraints.
struct DynamicsLimits {
  std::map<std::string, JointLimit> joints;
  double v_max = 0.0;          // rad/s
  double a_max = 0.0;          // rad/s^2
  double ground_height = 0.0;  // meters

  void validate() const;
};

struct FeasibilityReport {
  int position_violations = 0;
  int velocity_violations = 0;
  int acceleration_violations = 0;
  int ground_violations = 0;
  double max_position_excess = 0.0;
  double max_velocity_excess = 0.0;
  double max_acceleration_excess = 0.0;
  double max_ground_excess = 0.0;

  bool all_zero() const {
    return position_violations == 0 && velocity_violations == 0 &&
           acceleration_violations == 0 && ground_violations == 0;
  }
};

/// Excesses below this are treated as rounding noise, not violations.
inline constexpr double kViolationTol = 1e-9;

/// End-effectors owning the ground constraint: those whose name mentions
/// foot/ankle, or the lowest rest-pose end-effector when none match.
std::vector<int> foot_end_effectors(const SkeletonTopology& skel);

/// Projects the clip onto the limit set: per-joint twist angles about the
/// dominant axes are clamped to position bounds and swept with rate,
/// acceleration, and wall-braking windows; the root is raised so the feet
/// stay above ground. Feasible clips pass through bit-exactly.
MotionClip dynamics_filter(const SkeletonTopology& skel, const MotionClip& clip,
                           const DynamicsLimits& limits);

/// Violation counts (per joint-frame) and maximal excesses for every limit
/// family. All-zero exactly when dynamics_filter is the identity.
FeasibilityReport feasibility_report(const SkeletonTopology& skel,
                                     const MotionClip& clip,
                                     const DynamicsLimits& limits);

/// exp(-||q - q_hat||^2 / sigma); in (0, 1], and 1 iff the vectors match.
double tracking_reward(std::span<const double> q, std::span<const double> q_hat,
                       double sigma_jpos);

/// Sum of gamma^t * r_t for gamma in [0, 1).
double discounted_return(std::span<const double> rewards, double gamma);

inline constexpr double kDefaultGamma = 0.99;
inline constexpr double kDefaultSigmaJpos = 0.5;  // rad^2

/// Per-frame tracking rewards of a trajectory against a reference, used as
/// an evaluator of how well a motion tracks its target.
struct RewardTrace {
  std::vector<double> rewards;  // each in (0, 1]
  double gamma = kDefaultGamma;
  double sigma_jpos = kDefaultSigmaJpos;

  void validate() const;
  double discounted() const { return discounted_return(rewards, gamma); }
};

/// Frame-by-frame joint-position rewards between two equally shaped
/// trajectories.
RewardTrace make_reward_trace(const JointPositions& positions,
                              const JointPositions& reference,
                              double sigma_jpos = kDefaultSigmaJpos,
                              double gamma = kDefaultGamma);

}  // namespace ikmr
