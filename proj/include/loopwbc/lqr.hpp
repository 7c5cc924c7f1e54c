#pragma once

#include <Eigen/Dense>
#include <optional>

#include "loopwbc/model.hpp"

namespace loopwbc {

/// All non-wheel bodies aggregated into one pendulum via average angular
/// momentum.
struct LumpedPendulum {
  double mass = 0.0;              // kg
  Mat3 inertia = Mat3::Zero();    // world frame, about the lumped CoM
  Vec3 com = Vec3::Zero();        // O_Pi, world
  double length = 0.0;            // O_Pi to wheel-axle midpoint, m
  double pitch = 0.0;             // rad, + leaning along the heading
  double pitch_rate = 0.0;        // rad/s
  double ground_velocity = 0.0;   // m/s, average hub velocity along heading
  MatX J_rot;                     // 3 x n_u lumped rotational Jacobian
  VecX Jdot_u;                    // 3, its drift
  Vec3 axle_midpoint = Vec3::Zero();
};

/// Pitch/velocity state-space model with the commanded pitch acceleration
/// as input.
struct SimplifiedLinearModel {
  double a31 = 0.0;  // dv/dt sensitivity to pitch, 1/s^2
  double a32 = 0.0;  // damping term, kept zero (no damping modeled)
  double b31 = 0.0;  // dv/dt sensitivity to pitch acceleration, m
  Mat3 A = Mat3::Zero();
  Vec3 B = Vec3::Zero();
  Mat3 A_d = Mat3::Identity();
  Vec3 B_d = Vec3::Zero();
  double T_s = 0.0;
};

struct LqrGains {
  Eigen::RowVector3d K = Eigen::RowVector3d::Zero();  // (k_theta, k_rate, k_v)
  Mat3 P = Mat3::Zero();
  double closed_loop_radius = 0.0;
};

/// R_IN columns: x heading, y along the line of support, z up.
LumpedPendulum lump_pendulum(const RobotModel& model,
                             const KinematicsCache& kin, const Mat3& R_IN);

/// Linearization of the wheeled-pendulum coupling at the operating point.
/// Throws DegeneratePendulum when the pendulum length is below 1 mm.
SimplifiedLinearModel linearize_simplified(const LumpedPendulum& pend,
                                           const RobotModel& model);

/// Zero-order-hold discretization: A_d = exp(A T_s), B_d = int exp(As) ds B.
void discretize_zoh(const Mat3& A, const Vec3& B, double T_s, Mat3& A_d,
                    Vec3& B_d);

/// General matrix exponential by scaling-and-squaring on a Taylor series.
MatX expm(const MatX& a);

/// Infinite-horizon discrete LQR via structure-preserving doubling, with an
/// optional warm start accepted when it already satisfies the equation.
class DareSolver {
 public:
  LqrGains solve(const Mat3& A_d, const Vec3& B_d, const Mat3& Q, double R);
  void reset() { has_prev_ = false; }

 private:
  Mat3 prev_P_ = Mat3::Zero();
  bool has_prev_ = false;
};

/// Feedback law producing the commanded pitch acceleration.
double lqr_pitch_command(const LqrGains& gains, double pitch_ref,
                         double pitch_rate_ref, double velocity_ref,
                         const LumpedPendulum& pend);

}  // namespace loopwbc
