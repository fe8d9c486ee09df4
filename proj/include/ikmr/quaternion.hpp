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

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

#include "ikmr/error.hpp"

namespace ikmr {

// Quaternions follow the Hamilton convention with components stored
// (w, x, y, z). Local rotations are expressed in the parent joint's frame.
template <typename S>
using Quat = Eigen::Quaternion<S>;
template <typename S>
using Vec3 = Eigen::Matrix<S, 3, 1>;

using Quatd = Quat<double>;
using Vec3d = Vec3<double>;

inline constexpr double kZeroQuatNorm = 1e-12;

/// Sign-flip onto the canonical hemisphere: w >= 0, and if w == 0 the first
/// nonzero of (x, y, z) is >= 0. Idempotent; does not change the rotation.
template <typename S>
Quat<S> quat_canonical(const Quat<S>& q) {
  bool flip = false;
  if (q.w() < S(0)) {
    flip = true;
  } else if (q.w() == S(0)) {
    if (q.x() != S(0)) {
      flip = q.x() < S(0);
    } else if (q.y() != S(0)) {
      flip = q.y() < S(0);
    } else {
      flip = q.z() < S(0);
    }
  }
  return flip ? Quat<S>(-q.w(), -q.x(), -q.y(), -q.z()) : q;
}

/// Unit-norm, hemisphere-canonical copy of q.
template <typename S>
Quat<S> quat_normalize(const Quat<S>& q) {
  const S n = q.norm();
  if (!(n > S(kZeroQuatNorm))) {
    throw ZeroQuaternionError("quat_normalize: norm below 1e-12");
  }
  Quat<S> out(q.w() / n, q.x() / n, q.y() / n, q.z() / n);
  return quat_canonical(out);
}

/// Hamilton product a*b, renormalized.
template <typename S>
Quat<S> quat_mul(const Quat<S>& a, const Quat<S>& b) {
  return quat_normalize(Quat<S>(a * b));
}

template <typename S, typename Derived>
Vec3<S> quat_rotate(const Quat<S>& q, const Eigen::MatrixBase<Derived>& v) {
  return q * Vec3<S>(v);
}

/// Geodesic angle between the rotations represented by a and b, in [0, pi].
/// Zero iff a == +/-b.
template <typename S>
S quat_geodesic_angle(const Quat<S>& a, const Quat<S>& b) {
  const S dot = std::abs(a.coeffs().dot(b.coeffs()));
  return S(2) * std::acos(std::min(dot, S(1)));
}

template <typename S, typename Derived>
Quat<S> quat_from_axis_angle(const Eigen::MatrixBase<Derived>& axis, S angle) {
  return Quat<S>(Eigen::AngleAxis<S>(angle, Vec3<S>(axis).normalized()));
}

/// Log map of a unit quaternion: rotation vector of length angle/2 such that
/// quat_exp(quat_log(q)) reproduces q up to sign.
template <typename S>
Vec3<S> quat_log(const Quat<S>& q) {
  const Quat<S> c = quat_canonical(q);
  const S vnorm = c.vec().norm();
  if (vnorm < S(1e-14)) return Vec3<S>::Zero();
  const S half_angle = std::atan2(vnorm, c.w());
  return c.vec() * (half_angle / vnorm);
}

template <typename S>
Quat<S> quat_exp(const Vec3<S>& v) {
  const S half_angle = v.norm();
  if (half_angle < S(1e-14)) {
    return Quat<S>(S(1), v.x(), v.y(), v.z()).normalized();
  }
  const S s = std::sin(half_angle) / half_angle;
  return Quat<S>(std::cos(half_angle), s * v.x(), s * v.y(), s * v.z());
}

/// Geodesic interpolation from a toward b: a * exp(t * log(a^-1 b)).
template <typename S>
Quat<S> quat_slerp_log(const Quat<S>& a, const Quat<S>& b, S t) {
  const Quat<S> rel = Quat<S>(a.conjugate() * b);
  const Vec3<S> step = quat_log(rel) * t;
  return quat_normalize(Quat<S>(a * quat_exp(step)));
}

/// Rotation angle of q about the given unit axis (twist component of the
/// swing-twist split), in [-pi, pi] for canonical q.
template <typename S, typename Derived>
S twist_angle(const Quat<S>& q, const Eigen::MatrixBase<Derived>& axis_in) {
  const Vec3<S> axis(axis_in);
  const Quat<S> c = quat_canonical(q);
  const S proj = c.vec().dot(axis);
  return S(2) * std::atan2(proj, c.w());
}

/// Replace the twist of q about axis with the given angle, keeping the swing
/// component. twist_angle(with_twist(q, a, th), a) == th.
template <typename S, typename Derived>
Quat<S> quat_with_twist(const Quat<S>& q,
                        const Eigen::MatrixBase<Derived>& axis_in, S angle) {
  const Vec3<S> axis(axis_in);
  const Quat<S> c = quat_canonical(q);
  const S proj = c.vec().dot(axis);
  Quat<S> twist(c.w(), proj * axis.x(), proj * axis.y(), proj * axis.z());
  const S tn = twist.norm();
  Quat<S> swing;
  if (tn < S(kZeroQuatNorm)) {
    // Pure swing by pi about an orthogonal axis; twist is the identity.
    swing = c;
  } else {
    twist.coeffs() /= tn;
    swing = Quat<S>(c * twist.conjugate());
  }
  return quat_mul(swing, quat_from_axis_angle(axis, angle));
}

}  // namespace ikmr
