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

#include "ikmr/dynamics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace ikmr {

void DynamicsLimits::validate() const {
  for (const auto& [name, lim] : joints) {
    if (!(lim.lo < lim.hi)) {
      throw LimitsMismatchError("joint '" + name + "' has lo >= hi");
    }
  }
  if (!(v_max > 0.0)) throw LimitsMismatchError("v_max must be > 0");
  if (!(a_max > 0.0)) throw LimitsMismatchError("a_max must be > 0");
}

std::vector<int> foot_end_effectors(const SkeletonTopology& skel) {
  std::vector<int> feet;
  for (const int e : skel.end_effectors) {
    std::string lower;
    for (const char c : skel.joint_names[e]) {
      lower.push_back(static_cast<char>(std::tolower(c)));
    }
    if (lower.find("foot") != std::string::npos ||
        lower.find("ankle") != std::string::npos) {
      feet.push_back(e);
    }
  }
  if (feet.empty() && !skel.end_effectors.empty()) {
    // Fall back to the lowest rest-pose end-effector.
    const MotionClip rest = make_rest_clip(skel, 1);
    const JointPositions pos = fk(skel, rest);
    int best = skel.end_effectors[0];
    for (const int e : skel.end_effectors) {
      if (pos.at(0, e).z() < pos.at(0, best).z()) best = e;
    }
    feet.push_back(best);
  }
  return feet;
}

namespace {

struct JointBounds {
  double lo, hi;
};

std::vector<JointBounds> resolve_bounds(const SkeletonTopology& skel,
                                        const DynamicsLimits& limits) {
  limits.validate();
  std::vector<JointBounds> out(skel.joint_count());
  for (int j = 0; j < skel.joint_count(); ++j) {
    const auto it = limits.joints.find(skel.joint_names[j]);
    if (it == limits.joints.end()) {
      throw LimitsMismatchError("limits file lacks joint '" +
                                skel.joint_names[j] + "'");
    }
    out[j] = {it->second.lo, it->second.hi};
  }
  return out;
}

// Total distance covered when decelerating from speed v by a per step until
// stopped: k*v - a*k*(k-1)/2 with k = ceil(v/a) steps.
double stopping_distance(double v, double a) {
  if (v <= 0.0) return 0.0;
  const double k = std::ceil(v / a);
  return k * v - a * k * (k - 1.0) / 2.0;
}

// Largest per-step speed toward a wall at distance d that can still stop
// before it under deceleration a per step.
double brake_max(double dist, double a) {
  if (dist <= 0.0) return 0.0;
  double k = std::ceil((-1.0 + std::sqrt(1.0 + 8.0 * dist / a)) / 2.0);
  if (k < 1.0) k = 1.0;
  double v = (dist + a * k * (k - 1.0) / 2.0) / k;
  v = std::min(v, k * a);
  for (int guard = 0; guard < 4 && stopping_distance(v, a) > dist; ++guard) {
    v = std::nexttoward(v, 0.0L);
  }
  if (stopping_distance(v, a) > dist) v = std::min(v, dist);
  return v;
}

// Forward sweep: positions clamped, per-step speed limited by the rate
// window, the acceleration window, and braking headroom toward both walls.
std::vector<double> project_angles(const std::vector<double>& theta,
                                   double lo, double hi, double vdt,
                                   double adt) {
  const std::size_t n = theta.size();
  std::vector<double> out(n);
  double p = std::clamp(theta[0], lo, hi);
  out[0] = p;
  double v = 0.0;
  bool have_v = false;
  for (std::size_t t = 1; t < n; ++t) {
    const double des = std::clamp(theta[t], lo, hi) - p;
    double hi_w = std::min(vdt, brake_max(hi - p, adt));
    double lo_w = -std::min(vdt, brake_max(p - lo, adt));
    if (have_v) {
      hi_w = std::min(hi_w, v + adt);
      lo_w = std::max(lo_w, v - adt);
    }
    if (lo_w > hi_w) {  // rounding collapse; pick the midpoint
      lo_w = hi_w = 0.5 * (lo_w + hi_w);
    }
    v = std::clamp(des, lo_w, hi_w);
    p = std::clamp(p + v, lo, hi);
    out[t] = p;
    have_v = true;
  }
  return out;
}

}  // namespace

FeasibilityReport feasibility_report(const SkeletonTopology& skel,
                                     const MotionClip& clip,
                                     const DynamicsLimits& limits) {
  clip.validate(&skel);
  const std::vector<JointBounds> bounds = resolve_bounds(skel, limits);
  const int t_count = clip.frames();
  const int j_count = clip.joints();
  const double fps = clip.fps;

  FeasibilityReport rep;
  for (int j = 0; j < j_count; ++j) {
    std::vector<double> theta(t_count);
    for (int t = 0; t < t_count; ++t) {
      theta[t] = twist_angle(clip.rot(t, j), skel.axes[j]);
    }
    for (int t = 0; t < t_count; ++t) {
      const double excess =
          std::max(theta[t] - bounds[j].hi, bounds[j].lo - theta[t]);
      if (excess > kViolationTol) {
        ++rep.position_violations;
        rep.max_position_excess = std::max(rep.max_position_excess, excess);
      }
    }
    for (int t = 0; t + 1 < t_count; ++t) {
      const double rate = std::abs(theta[t + 1] - theta[t]) * fps;
      if (rate - limits.v_max > kViolationTol) {
        ++rep.velocity_violations;
        rep.max_velocity_excess =
            std::max(rep.max_velocity_excess, rate - limits.v_max);
      }
    }
    for (int t = 0; t + 2 < t_count; ++t) {
      const double acc =
          std::abs(theta[t + 2] - 2.0 * theta[t + 1] + theta[t]) * fps * fps;
      if (acc - limits.a_max > kViolationTol) {
        ++rep.acceleration_violations;
        rep.max_acceleration_excess =
            std::max(rep.max_acceleration_excess, acc - limits.a_max);
      }
    }
  }

  const std::vector<int> feet = foot_end_effectors(skel);
  if (!feet.empty()) {
    const JointPositions pos = fk(skel, clip);
    for (int t = 0; t < t_count; ++t) {
      double lowest = pos.at(t, feet[0]).z();
      for (const int f : feet) lowest = std::min(lowest, pos.at(t, f).z());
      const double excess = limits.ground_height - lowest;
      if (excess > kViolationTol) {
        ++rep.ground_violations;
        rep.max_ground_excess = std::max(rep.max_ground_excess, excess);
      }
    }
  }
  return rep;
}

MotionClip dynamics_filter(const SkeletonTopology& skel, const MotionClip& clip,
                           const DynamicsLimits& limits) {
  const FeasibilityReport before = feasibility_report(skel, clip, limits);
  if (before.all_zero()) return clip;

  const std::vector<JointBounds> bounds = resolve_bounds(skel, limits);
  const int t_count = clip.frames();
  const int j_count = clip.joints();
  const double vdt = limits.v_max / clip.fps;
  const double adt = limits.a_max / (clip.fps * clip.fps);

  MotionClip out = clip;
  for (int j = 0; j < j_count; ++j) {
    std::vector<double> theta(t_count);
    for (int t = 0; t < t_count; ++t) {
      theta[t] = twist_angle(clip.rot(t, j), skel.axes[j]);
    }
    const std::vector<double> filtered =
        project_angles(theta, bounds[j].lo, bounds[j].hi, vdt, adt);
    for (int t = 0; t < t_count; ++t) {
      out.rot(t, j) = quat_with_twist(clip.rot(t, j), skel.axes[j], filtered[t]);
    }
  }

  const std::vector<int> feet = foot_end_effectors(skel);
  if (!feet.empty()) {
    const JointPositions pos = fk(skel, out);
    for (int t = 0; t < t_count; ++t) {
      double lowest = pos.at(t, feet[0]).z();
      for (const int f : feet) lowest = std::min(lowest, pos.at(t, f).z());
      if (lowest < limits.ground_height) {
        out.root_translation[t].z() += limits.ground_height - lowest;
      }
    }
  }
  return out;
}

double tracking_reward(std::span<const double> q, std::span<const double> q_hat,
                       double sigma_jpos) {
  if (!(sigma_jpos > 0.0)) {
    throw NonPositiveSigmaError("sigma_jpos must be > 0");
  }
  if (q.size() != q_hat.size()) {
    throw ShapeMismatchError("tracking_reward: vector lengths differ");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double d = q[i] - q_hat[i];
    sq += d * d;
  }
  return std::exp(-sq / sigma_jpos);
}

double discounted_return(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw InvalidGammaError("gamma must lie in [0, 1)");
  }
  double acc = 0.0;
  double weight = 1.0;
  for (const double r : rewards) {
    acc += weight * r;
    weight *= gamma;
  }
  return acc;
}

void RewardTrace::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw InvalidGammaError("gamma must lie in [0, 1)");
  }
  if (!(sigma_jpos > 0.0)) {
    throw NonPositiveSigmaError("sigma_jpos must be > 0");
  }
  for (const double r : rewards) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw LimitsMismatchError("reward outside (0, 1]");
    }
  }
}

RewardTrace make_reward_trace(const JointPositions& positions,
                              const JointPositions& reference,
                              double sigma_jpos, double gamma) {
  if (positions.frames != reference.frames ||
      positions.joints != reference.joints) {
    throw ShapeMismatchError("make_reward_trace: trajectory shapes differ");
  }
  RewardTrace trace;
  trace.gamma = gamma;
  trace.sigma_jpos = sigma_jpos;
  trace.rewards.reserve(positions.frames);
  std::vector<double> q(positions.joints * 3), q_hat(positions.joints * 3);
  for (int t = 0; t < positions.frames; ++t) {
    for (int j = 0; j < positions.joints; ++j) {
      for (int d = 0; d < 3; ++d) {
        q[j * 3 + d] = positions.at(t, j)(d);
        q_hat[j * 3 + d] = reference.at(t, j)(d);
      }
    }
    trace.rewards.push_back(tracking_reward(q, q_hat, sigma_jpos));
  }
  trace.validate();
  return trace;
}

}  // namespace ikmr
