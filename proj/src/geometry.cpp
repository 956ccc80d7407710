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

#include "chainforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chainforge/errors.hpp"

namespace chainforge {

namespace {

constexpr double kOrthoTolerance = 1e-9;

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 r = u * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (orthonormality_error() > kOrthoTolerance ||
      std::abs(rotation_.determinant() - 1.0) > kOrthoTolerance) {
    rotation_ = nearest_rotation(rotation_);
  }
}

Pose Pose::Translation(double x, double y, double z) { return {Mat3::Identity(), Vec3(x, y, z)}; }

Pose Pose::RotX(double deg) { return AxisAngle(Vec3::UnitX(), deg); }
Pose Pose::RotY(double deg) { return AxisAngle(Vec3::UnitY(), deg); }
Pose Pose::RotZ(double deg) { return AxisAngle(Vec3::UnitZ(), deg); }

Pose Pose::AxisAngle(const Vec3& axis, double deg) {
  Pose p;
  p.rotation_ = Eigen::AngleAxisd(deg2rad(deg), axis.normalized()).toRotationMatrix();
  return p;
}

Pose Pose::FromQuaternion(const Vec3& t, const std::array<double, 4>& q) {
  Eigen::Quaterniond quat(q[3], q[0], q[1], q[2]);
  if (quat.norm() < 1e-12) throw ValidationError("zero-norm quaternion");
  quat.normalize();
  return {quat.toRotationMatrix(), t};
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

std::array<double, 4> Pose::quaternion_xyzw() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  // Canonical hemisphere so equal rotations serialize identically.
  if (q.w() < 0) q.coeffs() *= -1.0;
  return {q.x(), q.y(), q.z(), q.w()};
}

Pose Pose::operator*(const Pose& other) const {
  return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
}

Pose Pose::inverse() const {
  Pose p;
  p.rotation_ = rotation_.transpose();
  p.translation_ = -(p.rotation_ * translation_);
  return p;
}

double Pose::orthonormality_error() const {
  return (rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Pose compose(const Pose& a, const Pose& b) { return a * b; }
Pose invert(const Pose& p) { return p.inverse(); }
Pose relative(const Pose& n, const Pose& c) { return n.inverse() * c; }

void WeightMatrix::validate() const {
  if (!(orientation > 0.0) || !(translation > 0.0)) {
    throw ValidationError("pose weights must be positive (w_o=" + std::to_string(orientation) +
                          ", w_t=" + std::to_string(translation) + ")");
  }
}

double pose_distance(const Pose& t, const Pose& t_ref, const WeightMatrix& w) {
  const double rot = (t.rotation() - t_ref.rotation()).squaredNorm();
  const double trans = (t.translation() - t_ref.translation()).squaredNorm();
  return std::sqrt(w.orientation * w.orientation * rot + w.translation * w.translation * trans);
}

Vec3 unit_between(const Pose& p, const Pose& c) {
  const Vec3 d = c.translation() - p.translation();
  const double n = d.norm();
  if (n <= 1e-6) {
    throw DegenerateGeometry("coincident frame origins at " + to_string(p));
  }
  return d / n;
}

double raw_connection_angle(const Vec3& z_p, const Vec3& z_c, const Vec3& u) {
  const double magnitude = rad2deg(std::acos(clamp_unit(z_p.dot(z_c))));
  const double angle = z_p.cross(z_c).dot(u) >= 0.0 ? magnitude : -magnitude;
  return angle == -180.0 ? 180.0 : angle;
}

double raw_connection_angle(const Pose& p, const Pose& c) {
  return raw_connection_angle(z_axis(p), z_axis(c), unit_between(p, c));
}

std::optional<ConnectionAngle> connection_angle_from_degrees(int deg) {
  switch (deg) {
    case -90: return ConnectionAngle::kMinus90;
    case 0: return ConnectionAngle::kZero;
    case 90: return ConnectionAngle::kPlus90;
    case 180:
    case -180: return ConnectionAngle::k180;
    default: return std::nullopt;
  }
}

ConnectionAngle discretize_angle(double raw_deg) {
  const double raw = wrap_degrees(raw_deg);
  ConnectionAngle best = ConnectionAngle::kZero;
  double best_dist = 1e300;
  for (ConnectionAngle c : kConnectionAngles) {
    const double d = std::abs(wrap_degrees(raw - degrees(c)));
    const double mag = std::abs(degrees(c));
    const double best_mag = std::abs(degrees(best));
    if (d < best_dist || (d == best_dist && (mag < best_mag || (mag == best_mag && degrees(c) > 0)))) {
      best = c;
      best_dist = d;
    }
  }
  return best;
}

double signed_angle_about(const Vec3& axis, const Vec3& from, const Vec3& to) {
  const Vec3 a = axis.normalized();
  const Vec3 f = from - a * a.dot(from);
  const Vec3 t = to - a * a.dot(to);
  return rad2deg(std::atan2(f.cross(t).dot(a), f.dot(t)));
}

double rotation_angle_about(const Mat3& r, const Vec3& axis) {
  // Maximizes tr(Rot(axis, phi)^T r) = cos(phi) K + sin(phi) S + const.
  const Vec3 a = axis.normalized();
  Mat3 skew;
  skew << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  const double k = r.trace() - a.dot(r * a);
  const double s = (skew.array() * r.array()).sum();
  return rad2deg(std::atan2(s, k));
}

std::string to_string(const Pose& p) {
  std::ostringstream os;
  const auto q = p.quaternion_xyzw();
  os << "{t=[" << p.translation().x() << "," << p.translation().y() << "," << p.translation().z()
     << "] q=[" << q[0] << "," << q[1] << "," << q[2] << "," << q[3] << "]}";
  return os.str();
}

}  // namespace chainforge
