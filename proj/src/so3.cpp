#include "loopwbc/so3.hpp"

#include <cmath>

#include "loopwbc/errors.hpp"

namespace loopwbc::so3 {

Mat3 exp_map(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle < 1e-12) {
    // Second-order Taylor expansion; exact enough below the branch point.
    const Mat3 k = skew(phi);
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const Vec3 axis = phi / angle;
  const Mat3 k = skew(axis);
  return Mat3::Identity() + std::sin(angle) * k +
         (1.0 - std::cos(angle)) * k * k;
}

Mat3 project_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

bool is_rotation(const Mat3& r, double tol) {
  if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
    return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

std::pair<double, double> atan2_gradient(double a, double b) {
  const double n2 = a * a + b * b;
  if (n2 <= 1e-12) {
    throw DegenerateDirection(
        "atan2_gradient: direction magnitude below 1e-12");
  }
  return {b / n2, -a / n2};
}

}  // namespace loopwbc::so3
