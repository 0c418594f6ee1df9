#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace grounding {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle in degrees to (-180, 180].
inline double wrap_deg_signed(double deg) {
  double a = std::fmod(deg, 360.0);
  if (a <= -180.0) a += 360.0;
  if (a > 180.0) a -= 360.0;
  return a;
}

/// Absolute angular difference in degrees, wrapped to [0, 180].
inline double angular_distance_deg(double a, double b) {
  return std::abs(wrap_deg_signed(a - b));
}

/// True when R is orthonormal with determinant +1 within tol.
inline bool is_rotation(const Mat3& r, double tol = 1e-6) {
  const Mat3 should_be_identity = r.transpose() * r;
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace grounding
