#include "loopwbc/lqr.hpp"

#include <cmath>

#include "loopwbc/errors.hpp"
#include "loopwbc/so3.hpp"

namespace loopwbc {

namespace {

bool is_wheel_body(const RobotModel& model, int body) {
  for (const Wheel& w : model.wheels)
    if (w.body == body) return true;
  return false;
}

}  // namespace

LumpedPendulum lump_pendulum(const RobotModel& model,
                             const KinematicsCache& kin, const Mat3& R_IN) {
  LumpedPendulum p;
  p.J_rot = MatX::Zero(3, model.n_u);

  Vec3 weighted_com = Vec3::Zero();
  for (size_t k = 0; k < model.bodies.size(); ++k) {
    if (is_wheel_body(model, static_cast<int>(k))) continue;
    p.mass += model.bodies[k].mass;
    weighted_com += model.bodies[k].mass * kin.body[k].com;
  }
  p.com = weighted_com / p.mass;

  // Lumped inertia as the plain sum of the bodies' CoM tensors in the world
  // frame; this keeps a rigid motion of the whole lump mapping to the same
  // angular velocity.
  MatX weighted_J = MatX::Zero(3, model.n_u);
  VecX weighted_drift = VecX::Zero(3);
  Mat3 inertia_dot = Mat3::Zero();
  for (size_t k = 0; k < model.bodies.size(); ++k) {
    if (is_wheel_body(model, static_cast<int>(k))) continue;
    const Body& body = model.bodies[k];
    const BodyKin& bk = kin.body[k];
    const Mat3 Iw = bk.R * body.inertia * bk.R.transpose();
    p.inertia += Iw;
    const Mat3 Iw_dot =
        so3::skew(bk.omega) * Iw - Iw * so3::skew(bk.omega);
    inertia_dot += Iw_dot;

    const Mat3X Jr = rotational_jacobian(model, kin, static_cast<int>(k));
    weighted_J.noalias() += Iw * Jr;
    weighted_drift.noalias() += Iw_dot * bk.omega + Iw * bk.alpha_bias;
  }

  const Eigen::LDLT<Mat3> inertia_ldlt(p.inertia);
  p.J_rot = inertia_ldlt.solve(weighted_J);

  // angular velocity of the substitute body from the summed momentum
  Vec3 omega_pi = Vec3::Zero();
  {
    Vec3 momentum = Vec3::Zero();
    for (size_t k = 0; k < model.bodies.size(); ++k) {
      if (is_wheel_body(model, static_cast<int>(k))) continue;
      const Mat3 Iw =
          kin.body[k].R * model.bodies[k].inertia * kin.body[k].R.transpose();
      momentum += Iw * kin.body[k].omega;
    }
    omega_pi = inertia_ldlt.solve(momentum);
  }
  p.Jdot_u = inertia_ldlt.solve(VecX(weighted_drift.matrix() -
                                     (inertia_dot * omega_pi)));

  // axle midpoint and ground velocity
  Vec3 hub_vel = Vec3::Zero();
  for (const Wheel& w : model.wheels) {
    p.axle_midpoint += kin.body[w.body].p;
    hub_vel += kin.body[w.body].v;
  }
  p.axle_midpoint /= static_cast<double>(model.wheels.size());
  hub_vel /= static_cast<double>(model.wheels.size());

  const Vec3 heading = R_IN.col(0);
  const Vec3 lateral = R_IN.col(1);
  const Vec3 lever = p.com - p.axle_midpoint;
  p.length = lever.norm();
  if (p.length > 1e-12)
    p.pitch = std::asin(
        std::clamp(heading.dot(lever) / p.length, -1.0, 1.0));
  p.pitch_rate = lateral.dot(omega_pi);
  p.ground_velocity = heading.dot(hub_vel);
  return p;
}

SimplifiedLinearModel linearize_simplified(const LumpedPendulum& pend,
                                           const RobotModel& model) {
  if (pend.length < 1e-3)
    throw DegeneratePendulum("lumped pendulum length " +
                             std::to_string(pend.length) + " m");

  double wheel_mass = 0.0;
  double wheel_spin_inertia = 0.0;
  double radius = 0.0;
  for (const Wheel& w : model.wheels) {
    wheel_mass += model.bodies[w.body].mass;
    wheel_spin_inertia += model.bodies[w.body].inertia(1, 1);
    radius = w.radius;
  }

  const double m = pend.mass;
  const double l = pend.length;
  const double i_pitch = pend.inertia(1, 1);  // about the lateral axis
  const double denom =
      radius * (wheel_mass + m + wheel_spin_inertia / (radius * radius)) +
      m * l;

  SimplifiedLinearModel lin;
  lin.a31 = m * kGravity * l / denom;
  lin.a32 = 0.0;
  lin.b31 = -(i_pitch + m * l * l + radius * m * l) / denom;
  lin.A << 0, 1, 0, 0, 0, 0, lin.a31, lin.a32, 0;
  lin.B << 0, 1, lin.b31;
  return lin;
}

MatX expm(const MatX& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  MatX scaled = a;
  while (norm / std::pow(2.0, squarings) > 0.5) ++squarings;
  scaled /= std::pow(2.0, squarings);

  MatX result = MatX::Identity(a.rows(), a.cols());
  MatX term = result;
  for (int k = 1; k <= 18; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    result += term;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

void discretize_zoh(const Mat3& A, const Vec3& B, double T_s, Mat3& A_d,
                    Vec3& B_d) {
  MatX aug = MatX::Zero(4, 4);
  aug.topLeftCorner<3, 3>() = A;
  aug.topRightCorner<3, 1>() = B;
  const MatX e = expm(aug * T_s);
  A_d = e.topLeftCorner<3, 3>();
  B_d = e.topRightCorner<3, 1>();
}

namespace {

double dare_residual(const Mat3& A, const Vec3& B, const Mat3& Q, double R,
                     const Mat3& P) {
  const double denom = R + B.dot(P * B);
  const Mat3 res = A.transpose() * P * A - P -
                   (A.transpose() * P * B) * (B.transpose() * P * A) / denom +
                   Q;
  return res.cwiseAbs().maxCoeff();
}

void check_stabilizable(const Mat3& A, const Vec3& B) {
  Eigen::EigenSolver<Mat3> eig(A);
  for (int i = 0; i < 3; ++i) {
    const std::complex<double> lambda = eig.eigenvalues()[i];
    if (std::abs(lambda) < 1.0 - 1e-9) continue;
    Eigen::Matrix<std::complex<double>, 3, 4> pbh;
    pbh.leftCols<3>() =
        lambda * Mat3::Identity().cast<std::complex<double>>() -
        A.cast<std::complex<double>>();
    pbh.rightCols<1>() = B.cast<std::complex<double>>();
    Eigen::ColPivHouseholderQR<Eigen::Matrix<std::complex<double>, 3, 4>> qr(
        pbh);
    if (qr.rank() < 3)
      throw NotStabilizable("uncontrollable unstable mode at |lambda| = " +
                            std::to_string(std::abs(lambda)));
  }
}

}  // namespace

LqrGains DareSolver::solve(const Mat3& A_d, const Vec3& B_d, const Mat3& Q,
                           double R) {
  check_stabilizable(A_d, B_d);

  Mat3 P;
  bool warm_ok = false;
  if (has_prev_ && dare_residual(A_d, B_d, Q, R, prev_P_) < 1e-12) {
    P = prev_P_;
    warm_ok = true;
  }
  if (!warm_ok) {
    // structure-preserving doubling
    Mat3 Ak = A_d;
    Mat3 Gk = B_d * B_d.transpose() / R;
    Mat3 Hk = Q;
    const int cap = 1000000;
    bool converged = false;
    for (int it = 0; it < cap; ++it) {
      const Mat3 W = Mat3::Identity() + Gk * Hk;
      const Eigen::PartialPivLU<Mat3> lu(W);
      const Mat3 W_inv_A = lu.solve(Ak);
      const Mat3 H_next =
          Hk + Ak.transpose() * Hk * W_inv_A;
      const Mat3 G_next =
          Gk + Ak * lu.solve(Gk * Ak.transpose());
      const Mat3 A_next = Ak * W_inv_A;
      const double delta = (H_next - Hk).cwiseAbs().maxCoeff();
      Ak = A_next;
      Gk = G_next;
      Hk = 0.5 * (H_next + H_next.transpose());
      if (delta < 1e-12 * (1.0 + Hk.cwiseAbs().maxCoeff())) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NoConvergence("doubling iteration did not converge");
    P = Hk;
  }

  if (dare_residual(A_d, B_d, Q, R, P) > 1e-9)
    throw NoConvergence("Riccati residual above tolerance");

  LqrGains gains;
  gains.P = P;
  const double denom = R + B_d.dot(P * B_d);
  gains.K = (B_d.transpose() * P * A_d) / denom;
  const Mat3 closed = A_d - B_d * gains.K;
  gains.closed_loop_radius = closed.eigenvalues().cwiseAbs().maxCoeff();

  prev_P_ = P;
  has_prev_ = true;
  return gains;
}

double lqr_pitch_command(const LqrGains& gains, double pitch_ref,
                         double pitch_rate_ref, double velocity_ref,
                         const LumpedPendulum& pend) {
  return gains.K[0] * (pitch_ref - pend.pitch) +
         gains.K[1] * (pitch_rate_ref - pend.pitch_rate) +
         gains.K[2] * (velocity_ref - pend.ground_velocity);
}

}  // namespace loopwbc
