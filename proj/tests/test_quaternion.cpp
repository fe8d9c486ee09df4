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

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ikmr/quaternion.hpp"
#include "ikmr/rng.hpp"

using namespace ikmr;

namespace {

constexpr double kPi = std::numbers::pi;

Quatd random_unit_quat(Rng& rng) {
  Quatd q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return quat_normalize(q);
}

// Independent oracle: rotation matrix built element-by-element from the
// textbook formula, never through Eigen's quaternion-to-matrix path.
Eigen::Matrix3d rotation_matrix_oracle(const Quatd& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Eigen::Matrix3d m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

}  // namespace

TEST_CASE("quat_normalize scaling identity") {
  const Quatd q = quat_normalize(Quatd(2, 0, 0, 0));
  CHECK(q.w() == doctest::Approx(1.0));
  CHECK(q.x() == 0.0);
  CHECK(q.y() == 0.0);
  CHECK(q.z() == 0.0);
}

TEST_CASE("quat_normalize 3-4-5 with hemisphere flip") {
  // w = 0, first nonzero of (x,y,z) negative: must flip sign.
  const Quatd q = quat_normalize(Quatd(0, -3, -4, 0));
  CHECK(q.w() == doctest::Approx(0.0));
  CHECK(q.x() == doctest::Approx(0.6));
  CHECK(q.y() == doctest::Approx(0.8));
  CHECK(q.z() == doctest::Approx(0.0));
}

TEST_CASE("quat_normalize rejects near-zero quaternions") {
  CHECK_THROWS_AS(quat_normalize(Quatd(1e-13, 0, 0, 0)), ZeroQuaternionError);
}

TEST_CASE("hemisphere canonicalization is idempotent") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    Quatd q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    if (q.norm() < 1e-6) continue;
    q.normalize();
    const Quatd once = quat_canonical(q);
    const Quatd twice = quat_canonical(once);
    CHECK(once.coeffs() == twice.coeffs());
  }
  // Boundary: w == 0 exactly.
  const Quatd edge = quat_canonical(Quatd(0, 0, -1, 0));
  CHECK(edge.y() == 1.0);
  CHECK(quat_canonical(edge).coeffs() == edge.coeffs());
}

TEST_CASE("quat_mul identity and angle addition") {
  Rng rng(12);
  const Quatd q = random_unit_quat(rng);
  const Quatd r = quat_mul(Quatd::Identity(), q);
  CHECK((r.coeffs() - q.coeffs()).norm() < 1e-15);

  const Quatd z90 = quat_from_axis_angle(Vec3d::UnitZ(), kPi / 2);
  const Quatd z180 = quat_mul(z90, z90);
  CHECK(z180.w() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(z180.z() == doctest::Approx(1.0));
}

TEST_CASE("quat_mul agrees with rotation-matrix product oracle") {
  Rng rng(13);
  for (int i = 0; i < 150; ++i) {
    const Quatd a = random_unit_quat(rng);
    const Quatd b = random_unit_quat(rng);
    const Quatd ab = quat_mul(a, b);
    const Eigen::Matrix3d expect =
        rotation_matrix_oracle(a) * rotation_matrix_oracle(b);
    const Eigen::Matrix3d got = rotation_matrix_oracle(ab);
    CHECK((expect - got).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("quat_rotate basics") {
  const Vec3d v(1, 2, 3);
  CHECK((quat_rotate(Quatd::Identity(), v) - v).norm() == 0.0);

  const Quatd z90 = quat_from_axis_angle(Vec3d::UnitZ(), kPi / 2);
  const Vec3d r = quat_rotate(z90, Vec3d(1, 0, 0));
  CHECK(r.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.y() == doctest::Approx(1.0));
  CHECK(r.z() == doctest::Approx(0.0));
}

TEST_CASE("quat_rotate agrees with matrix oracle and preserves norms") {
  Rng rng(14);
  for (int i = 0; i < 150; ++i) {
    const Quatd q = random_unit_quat(rng);
    const Vec3d v(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec3d got = quat_rotate(q, v);
    const Vec3d expect = rotation_matrix_oracle(q) * v;
    CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(got.norm() - v.norm()) < 1e-9);
  }
}

TEST_CASE("rotation composition property") {
  Rng rng(15);
  for (int i = 0; i < 100; ++i) {
    const Quatd a = random_unit_quat(rng);
    const Quatd b = random_unit_quat(rng);
    const Vec3d v(rng.normal(), rng.normal(), rng.normal());
    const Vec3d lhs = quat_rotate(quat_mul(a, b), v);
    const Vec3d rhs = quat_rotate(a, quat_rotate(b, v));
    CHECK((lhs - rhs).norm() < 1e-9);
  }
}

TEST_CASE("geodesic angle basics") {
  Rng rng(16);
  const Quatd q = random_unit_quat(rng);
  CHECK(quat_geodesic_angle(q, q) == doctest::Approx(0.0));

  const Quatd x90 = quat_from_axis_angle(Vec3d::UnitX(), kPi / 2);
  CHECK(quat_geodesic_angle(Quatd::Identity(), x90) ==
        doctest::Approx(kPi / 2));

  // Symmetric, and zero for the antipode.
  const Quatd neg(-q.w(), -q.x(), -q.y(), -q.z());
  CHECK(quat_geodesic_angle(q, neg) == doctest::Approx(0.0));
}

TEST_CASE("geodesic angle matches extended-precision dot oracle") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const Quatd a = random_unit_quat(rng);
    const Quatd b = random_unit_quat(rng);
    const long double dot =
        std::abs(static_cast<long double>(a.w()) * b.w() +
                 static_cast<long double>(a.x()) * b.x() +
                 static_cast<long double>(a.y()) * b.y() +
                 static_cast<long double>(a.z()) * b.z());
    const long double expect = 2.0L * std::acos(std::min(dot, 1.0L));
    const double got = quat_geodesic_angle(a, b);
    CHECK(std::abs(got - static_cast<double>(expect)) < 1e-9);
    CHECK(got >= 0.0);
    CHECK(got <= kPi + 1e-12);
    CHECK(got == quat_geodesic_angle(b, a));
  }
}

TEST_CASE("log/exp round-trip and twist extraction") {
  Rng rng(18);
  for (int i = 0; i < 100; ++i) {
    const Quatd q = random_unit_quat(rng);
    const Quatd back = quat_canonical(quat_exp(quat_log(q)));
    CHECK((back.coeffs() - q.coeffs()).cwiseAbs().maxCoeff() < 1e-12);
  }
  // twist_angle inverts quat_from_axis_angle on the same axis.
  const Vec3d axis = Vec3d::UnitY();
  for (int i = 0; i < 100; ++i) {
    const double theta = rng.uniform(-3.0, 3.0);
    const Quatd q = quat_from_axis_angle(axis, theta);
    CHECK(twist_angle(q, axis) == doctest::Approx(theta).epsilon(1e-12));
  }
}

TEST_CASE("quat_with_twist replaces twist and keeps swing") {
  Rng rng(19);
  const Vec3d axis = Vec3d::UnitZ();
  for (int i = 0; i < 100; ++i) {
    const Quatd q = random_unit_quat(rng);
    const double target = rng.uniform(-2.5, 2.5);
    const Quatd r = quat_with_twist(q, axis, target);
    CHECK(twist_angle(r, axis) == doctest::Approx(target).epsilon(1e-9));
  }
  // Replacing the twist with itself reproduces the rotation.
  for (int i = 0; i < 100; ++i) {
    const Quatd q = quat_canonical(random_unit_quat(rng));
    const Quatd r = quat_with_twist(q, axis, twist_angle(q, axis));
    CHECK((r.coeffs() - q.coeffs()).cwiseAbs().maxCoeff() < 1e-12);
  }
}
