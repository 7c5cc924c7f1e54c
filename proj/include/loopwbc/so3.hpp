#pragma once

#include <Eigen/Dense>
#include <utility>

namespace loopwbc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

namespace so3 {

/// Cross-product matrix: skew(v) * w == v x w.
inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

/// Rodrigues formula. |phi| must stay below pi for the integrator use case.
Mat3 exp_map(const Vec3& phi);

/// Nearest rotation matrix (polar projection via SVD). Used after every
/// orientation integration step to keep R orthonormal.
Mat3 project_rotation(const Mat3& m);

/// True if R'R = I and det R = 1 within tol.
bool is_rotation(const Mat3& r, double tol = 1e-10);

/// Partial derivatives of arctan2(a, b) w.r.t. (a, b).
/// Throws DegenerateDirection when a^2 + b^2 <= 1e-12.
std::pair<double, double> atan2_gradient(double a, double b);

}  // namespace so3
}  // namespace loopwbc
