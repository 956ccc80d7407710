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

// Rigid transforms and the handful of pose measurements the identifier needs.
// Units: millimeters and degrees everywhere outside this file's internals.

#pragma once

#include <Eigen/Geometry>
#include <array>
#include <optional>
#include <string>

namespace chainforge {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wraps an angle in degrees into (-180, 180].
double wrap_degrees(double deg);

/// Rigid transform: rotation (orthonormal, det +1) and translation in mm.
class Pose {
 public:
  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  /// Rotation is re-orthonormalized when it drifts more than 1e-9 from SO(3).
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose Identity() { return {}; }
  static Pose Translation(double x, double y, double z);
  static Pose RotX(double deg);
  static Pose RotY(double deg);
  static Pose RotZ(double deg);
  static Pose AxisAngle(const Vec3& axis, double deg);
  /// Quaternion given as (x, y, z, w); normalized on the way in.
  static Pose FromQuaternion(const Vec3& t, const std::array<double, 4>& xyzw);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat4 matrix() const;
  std::array<double, 4> quaternion_xyzw() const;

  Pose operator*(const Pose& other) const;
  Vec3 operator*(const Vec3& point) const { return rotation_ * point + translation_; }
  Pose inverse() const;

  /// Max-norm of R^T R - I.
  double orthonormality_error() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);

/// Transform from frame n to frame c: n^-1 * c.
Pose relative(const Pose& n, const Pose& c);

/// Element-wise weights of the pose-difference metric.
struct WeightMatrix {
  double orientation = 1.0;   // w_o, dimensionless
  double translation = 0.01;  // w_t, 1/mm

  /// Throws ValidationError unless both weights are positive.
  void validate() const;
};

/// Frobenius norm of W o (T - T_ref), with w_o on the rotation block, w_t on the
/// translation column and zero on the homogeneous row.
double pose_distance(const Pose& t, const Pose& t_ref, const WeightMatrix& w);

inline Vec3 x_axis(const Pose& p) { return p.rotation().col(0); }
inline Vec3 y_axis(const Pose& p) { return p.rotation().col(1); }
inline Vec3 z_axis(const Pose& p) { return p.rotation().col(2); }

/// Unit vector from the origin of p to the origin of c. Throws
/// DegenerateGeometry when the origins are within 1e-6 mm.
Vec3 unit_between(const Pose& p, const Pose& c);

/// Signed angle in degrees between the z-axes of two mated frames, positive
/// when z_p x z_c points along the p->c direction. Result in (-180, 180].
double raw_connection_angle(const Pose& p, const Pose& c);
/// Same, with the sign axis supplied explicitly.
double raw_connection_angle(const Vec3& z_p, const Vec3& z_c, const Vec3& u);

/// The four admissible relative rolls of mated connectors.
enum class ConnectionAngle : int { kMinus90 = -90, kZero = 0, kPlus90 = 90, k180 = 180 };

inline constexpr std::array<ConnectionAngle, 4> kConnectionAngles = {
    ConnectionAngle::kMinus90, ConnectionAngle::kZero, ConnectionAngle::kPlus90,
    ConnectionAngle::k180};

inline double degrees(ConnectionAngle c) { return static_cast<double>(static_cast<int>(c)); }
std::optional<ConnectionAngle> connection_angle_from_degrees(int deg);

/// Nearest admissible connection angle under circular distance. Exact midpoints
/// go to the candidate with smaller magnitude, then to the positive one.
ConnectionAngle discretize_angle(double raw_deg);

/// Signed angle (degrees) rotating unit vector `from` onto `to` about `axis`,
/// using only the components perpendicular to the axis.
double signed_angle_about(const Vec3& axis, const Vec3& from, const Vec3& to);

/// Angle of the rotation about `axis` closest (in Frobenius norm) to R.
double rotation_angle_about(const Mat3& r, const Vec3& axis);

std::string to_string(const Pose& p);

}  // namespace chainforge
