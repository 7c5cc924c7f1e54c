#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "loopwbc/so3.hpp"

namespace loopwbc {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

struct Body {
  std::string name;
  double mass = 0.0;
  Vec3 com = Vec3::Zero();   // body frame
  Mat3 inertia = Mat3::Zero();  // about com, body frame
};

struct Joint {
  std::string name;
  int parent = -1;
  int child = -1;
  Vec3 origin_xyz = Vec3::Zero();  // in parent frame
  Mat3 origin_rot = Mat3::Identity();
  Vec3 axis = Vec3::UnitY();  // in child frame
};

/// One opened kinematic loop: body-fixed points P and Q that coincide when
/// the loop is closed. Closure forces act in the x/z plane of the base frame.
struct Loop {
  int p_body = -1;
  Vec3 p_point = Vec3::Zero();
  int q_body = -1;
  Vec3 q_point = Vec3::Zero();
};

struct Wheel {
  int body = -1;     // hub frame W == body frame
  double radius = 0.0;
};

struct TorsionSpring {
  int joint = -1;
  double stiffness = 0.0;   // N*m/rad
  double rest_angle = 0.0;  // rad
};

struct RobotModel {
  std::string name;
  std::vector<Body> bodies;  // [0] is the base
  std::vector<Joint> joints;
  bool floating = true;
  std::vector<Loop> loops;
  std::vector<Wheel> wheels;
  std::vector<TorsionSpring> springs;
  std::vector<int> actuated_joints;  // order defines tau layout
  double mu_s = 0.8;
  double mu_h = 0.8;
  VecX tau_sat;  // per actuator, N*m
  double height_min = 0.0;
  double height_max = 1e9;

  // Derived by finalize().
  int n_j = 0;
  int n_u = 0;
  int n_tau = 0;
  int vel_offset = 0;  // 6 when floating, 0 when fixed
  MatX S;              // n_tau x n_u selection matrix
  std::vector<std::vector<int>> ancestors;  // per body: joints on path from base

  /// Computes derived quantities and checks tree consistency. Throws
  /// ValidationError on structural problems. load_model() additionally
  /// enforces the full file-level invariants.
  void finalize();

  int body_index(const std::string& name) const;
  int joint_index(const std::string& name) const;
  double total_mass() const;
};

/// Loads and validates a model file (JSON). Throws ParseError on malformed
/// input and ValidationError when an invariant is violated.
RobotModel load_model(const std::string& path);
RobotModel parse_model(const std::string& json_text, const std::string& origin);

struct GeneralizedState {
  Vec3 r = Vec3::Zero();       // base position, I frame
  Mat3 R = Mat3::Identity();   // R_IB
  VecX phi;                    // joint angles
  VecX u;                      // [v_IB; omega_IB; phidot] (floating) or [phidot]

  static GeneralizedState zero(const RobotModel& model);
};

struct BodyKin {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();    // frame origin, world
  Vec3 com = Vec3::Zero();  // world
  Vec3 v = Vec3::Zero();    // origin velocity
  Vec3 omega = Vec3::Zero();
  Vec3 v_com = Vec3::Zero();
  Vec3 a_bias = Vec3::Zero();      // origin acceleration at udot = 0
  Vec3 alpha_bias = Vec3::Zero();  // angular acceleration at udot = 0
  Vec3 a_com_bias = Vec3::Zero();
};

struct KinematicsCache {
  std::vector<BodyKin> body;
  std::vector<Vec3> joint_axis_w;
  std::vector<Vec3> joint_origin_w;
  bool has_velocity = false;
};

/// Pose-only pass (joint angles and base pose; velocities left zero).
KinematicsCache forward_kinematics(const RobotModel& model,
                                   const GeneralizedState& q);

/// Full pass: poses, velocities and bias accelerations (u-dot = 0 terms).
KinematicsCache kinematics(const RobotModel& model,
                           const GeneralizedState& state);

/// Positional Jacobian of a world point attached to `body`: J*u = v_point.
Mat3X point_jacobian(const RobotModel& model, const KinematicsCache& kin,
                     int body, const Vec3& point_w);

/// Rotational Jacobian of `body`: J*u = omega.
Mat3X rotational_jacobian(const RobotModel& model, const KinematicsCache& kin,
                          int body);

/// d/dt(J)*u for the material point, i.e. its acceleration at u-dot = 0.
Vec3 point_bias_accel(const KinematicsCache& kin, int body,
                      const Vec3& point_w);

/// Mass matrix via projected Newton-Euler: sum of J_com' m J_com + J_R' I J_R.
MatX mass_matrix(const RobotModel& model, const KinematicsCache& kin);

/// Coriolis/centrifugal plus gravity vector b(q,u) + g(q), left-hand-side
/// convention: M udot + (b+g) + s = S' tau.
VecX nonlinear_terms(const RobotModel& model, const KinematicsCache& kin);

/// Gravity part alone (same sign convention as nonlinear_terms).
VecX gravity_terms(const RobotModel& model, const KinematicsCache& kin);

/// Knee spring torques s(q), nonzero only at spring joints.
VecX spring_torques(const RobotModel& model, const GeneralizedState& state);

double kinetic_energy(const RobotModel& model, const KinematicsCache& kin);
double potential_energy(const RobotModel& model, const KinematicsCache& kin);
double spring_energy(const RobotModel& model, const GeneralizedState& state);

inline constexpr double kGravity = 9.81;

}  // namespace loopwbc
