// Copyright 2026 The chainforge Authors
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

#include <random>

#include "chainforge/errors.hpp"
#include "chainforge/geometry.hpp"
#include "doctest.h"
#include "support.hpp"

namespace chainforge {
namespace {

bool near(const Pose& a, const Pose& b, double tol = 1e-9) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff() <= tol;
}

bool near(const Vec3& a, const Vec3& b, double tol = 1e-12) { return (a - b).norm() <= tol; }

TEST_CASE("compose follows the rotation group") {
  CHECK(near(compose(Pose::Identity(), Pose::Identity()), Pose::Identity(), 0.0));
  CHECK(near(compose(Pose::RotZ(90), Pose::RotZ(90)), Pose::RotZ(180)));
  const Pose p = Pose(Pose::RotX(30).rotation(), Vec3(1, -2, 3)) * Pose::RotY(-70);
  CHECK(near(compose(p, invert(p)), Pose::Identity()));
  CHECK(near(compose(invert(p), p), Pose::Identity()));
}

TEST_CASE("rotations act on points as right-handed rotations") {
  CHECK(near(Pose::RotZ(90) * Vec3(1, 0, 0), Vec3(0, 1, 0)));
  CHECK(near(Pose::RotX(90) * Vec3(0, 1, 0), Vec3(0, 0, 1)));
  CHECK(near(Pose::RotY(90) * Vec3(0, 0, 1), Vec3(1, 0, 0)));
  // Translation applies after rotation.
  const Pose p(Pose::RotZ(90).rotation(), Vec3(10, 0, 0));
  CHECK(near(p * Vec3(1, 0, 0), Vec3(10, 1, 0)));
}

TEST_CASE("relative pose cancels the reference") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const Pose n = testing::random_pose(rng), t = testing::random_pose(rng);
    CHECK(near(relative(n, n), Pose::Identity()));
    CHECK(near(relative(Pose::Identity(), t), t, 0.0));
    CHECK(near(relative(n, n * t), t, 1e-9));
  }
}

TEST_CASE("quaternions round-trip in the canonical hemisphere") {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 100; ++k) {
    const Pose p = testing::random_pose(rng);
    const auto q = p.quaternion_xyzw();
    CHECK(q[3] >= 0.0);
    CHECK(near(Pose::FromQuaternion(p.translation(), q), p, 1e-12));
  }
  // 180 degrees about z: x=y=w=0, z=1.
  const auto q = Pose::RotZ(180).quaternion_xyzw();
  CHECK(std::abs(q[2]) == doctest::Approx(1.0));
  CHECK_THROWS_AS(Pose::FromQuaternion(Vec3::Zero(), {0, 0, 0, 0}), ValidationError);
}

TEST_CASE("drifted rotations are re-orthonormalized") {
  Mat3 r = Pose::RotZ(20).rotation();
  r(0, 0) += 1e-4;
  const Pose p(r, Vec3::Zero());
  CHECK(p.orthonormality_error() < 1e-12);
  CHECK(p.rotation().determinant() == doctest::Approx(1.0));
  CHECK(near(p, Pose::RotZ(20), 1e-4));
}

TEST_CASE("pose distance") {
  WeightMatrix unit{1.0, 1.0};
  SUBCASE("hand-evaluated entries") {
    CHECK(pose_distance(Pose::Translation(1, 0, 0), Pose::Identity(), unit) == doctest::Approx(1.0));
    // w_t = 0.01/mm on a 3-4-5 offset.
    CHECK(pose_distance(Pose::Translation(3, 4, 0), Pose::Identity(), WeightMatrix{}) ==
          doctest::Approx(0.05));
    // Rot_z(90) - I has four unit entries off the diagonal pattern: Frobenius norm 2.
    CHECK(pose_distance(Pose::RotZ(90), Pose::Identity(), unit) == doctest::Approx(2.0));
  }
  SUBCASE("linear in w_t for pure translations") {
    const Pose t = Pose::Translation(2, -7, 1);
    const double base = pose_distance(t, Pose::Identity(), WeightMatrix{1.0, 1.0});
    for (double w : {0.001, 0.5, 3.0}) {
      CHECK(pose_distance(t, Pose::Identity(), WeightMatrix{1.0, w}) == doctest::Approx(w * base));
    }
  }
  SUBCASE("metric properties on random pairs") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 500; ++k) {
      const Pose a = testing::random_pose(rng), b = testing::random_pose(rng);
      CHECK(pose_distance(a, a, WeightMatrix{}) == 0.0);
      CHECK(pose_distance(a, b, WeightMatrix{}) == doctest::Approx(pose_distance(b, a, WeightMatrix{})));
      CHECK(pose_distance(a, b, WeightMatrix{}) > 0.0);
    }
  }
  CHECK_THROWS_AS(WeightMatrix({0.0, 1.0}).validate(), ValidationError);
  CHECK_THROWS_AS(WeightMatrix({1.0, -1.0}).validate(), ValidationError);
}

TEST_CASE("axes are rotation columns") {
  CHECK(near(y_axis(Pose::Identity()), Vec3(0, 1, 0)));
  CHECK(near(z_axis(Pose::Identity()), Vec3(0, 0, 1)));
  CHECK(near(y_axis(Pose::RotZ(90)), Vec3(-1, 0, 0)));
}

TEST_CASE("unit_between") {
  CHECK(near(unit_between(Pose::Identity(), Pose::Translation(0, 100, 0)), Vec3(0, 1, 0)));
  CHECK(near(unit_between(Pose::Translation(1, 1, 1), Pose::Translation(1, 1, 2)), Vec3(0, 0, 1)));
  CHECK_THROWS_AS(unit_between(Pose::Translation(5, 5, 5), Pose::Translation(5, 5, 5)),
                  DegenerateGeometry);
}

TEST_CASE("raw connection angle") {
  const Vec3 u(0, 1, 0);
  CHECK(raw_connection_angle(Vec3(0, 0, 1), Vec3(0, 0, 1), u) == doctest::Approx(0.0));
  CHECK(raw_connection_angle(Vec3(0, 0, 1), Vec3(0, 0, -1), u) == 180.0);
  // z_p x z_c = (0,0,1) x (1,0,0) = (0,1,0), along u: positive.
  CHECK(raw_connection_angle(Vec3(0, 0, 1), Vec3(1, 0, 0), u) == doctest::Approx(90.0));
  CHECK(raw_connection_angle(Vec3(0, 0, 1), Vec3(-1, 0, 0), u) == doctest::Approx(-90.0));
  // Pose overload derives u from the origins.
  const Pose c(Pose::RotY(90).rotation(), Vec3(0, 50, 0));
  CHECK(raw_connection_angle(Pose::Identity(), c) == doctest::Approx(90.0));
  // A child rolled by c about the mating axis reads back c.
  for (int deg = -179; deg <= 180; deg += 7) {
    const Pose rolled(Pose::RotY(deg).rotation(), Vec3(0, 80, 0));
    CHECK(raw_connection_angle(Pose::Identity(), rolled) == doctest::Approx(deg));
  }
}

TEST_CASE("discretize_angle") {
  CHECK(discretize_angle(-85) == ConnectionAngle::kMinus90);
  CHECK(discretize_angle(170) == ConnectionAngle::k180);
  CHECK(discretize_angle(-170) == ConnectionAngle::k180);
  CHECK(discretize_angle(44.9) == ConnectionAngle::kZero);
  CHECK(discretize_angle(45.1) == ConnectionAngle::kPlus90);
  // Exact midpoints prefer the smaller magnitude.
  CHECK(discretize_angle(45) == ConnectionAngle::kZero);
  CHECK(discretize_angle(-45) == ConnectionAngle::kZero);
  CHECK(discretize_angle(135) == ConnectionAngle::kPlus90);
  CHECK(discretize_angle(-135) == ConnectionAngle::kMinus90);
  CHECK(discretize_angle(360 + 90) == ConnectionAngle::kPlus90);
}

TEST_CASE("discretize_angle matches brute-force nearest element") {
  for (int tenth = -1799; tenth <= 1800; ++tenth) {
    const double raw = tenth / 10.0;
    double best = 1e9;
    for (ConnectionAngle c : kConnectionAngles) {
      best = std::min(best, std::abs(wrap_degrees(raw - degrees(c))));
    }
    const ConnectionAngle got = discretize_angle(raw);
    CHECK(std::abs(wrap_degrees(raw - degrees(got))) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("wrap_degrees lands in (-180, 180]") {
  CHECK(wrap_degrees(190) == doctest::Approx(-170));
  CHECK(wrap_degrees(-180) == 180);
  CHECK(wrap_degrees(180) == 180);
  CHECK(wrap_degrees(540) == 180);
  CHECK(wrap_degrees(-190) == doctest::Approx(170));
}

TEST_CASE("signed angles about an axis") {
  CHECK(signed_angle_about(Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()) == doctest::Approx(90));
  CHECK(signed_angle_about(Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitX()) == doctest::Approx(-90));
  // Components along the axis are ignored.
  CHECK(signed_angle_about(Vec3::UnitZ(), Vec3(1, 0, 5), Vec3(0, 1, -3)) == doctest::Approx(90));
}

TEST_CASE("rotation_angle_about recovers pure rotations") {
  for (double deg : {-179.0, -120.0, -37.0, 0.0, 37.0, 90.0, 179.5}) {
    CHECK(rotation_angle_about(Pose::RotY(deg).rotation(), Vec3::UnitY()) == doctest::Approx(deg));
    CHECK(rotation_angle_about(Pose::RotZ(deg).rotation(), Vec3::UnitZ()) == doctest::Approx(deg));
    CHECK(rotation_angle_about(Pose::RotZ(deg).rotation(), -Vec3::UnitZ()) == doctest::Approx(-deg));
  }
  // A small off-axis tilt barely moves the estimate.
  const Mat3 tilted = Pose::RotY(40).rotation() * Pose::RotX(1).rotation();
  CHECK(rotation_angle_about(tilted, Vec3::UnitY()) == doctest::Approx(40).epsilon(1e-3));
}

}  // namespace
}  // namespace chainforge
