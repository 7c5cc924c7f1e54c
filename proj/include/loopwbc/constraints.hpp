#pragma once

#include <Eigen/Dense>
#include <vector>

#include "loopwbc/model.hpp"

namespace loopwbc {

/// Geometry of one wheel-ground contact.
struct ContactGeometry {
  Vec3 normal = Vec3::UnitZ();      // ground normal, I frame
  double sigma = 0.0;               // contour parameter, rad
  double sigma_dot = 0.0;           // rad/s
  Vec3 contact_point = Vec3::Zero();  // world
  Mat3 R_IC = Mat3::Identity();     // x: wheel heading, z: ground normal
  Vec3 tangent_w = Vec3::Zero();    // contour tangent d(r_WC)/dsigma, world
};

/// Stacked per-step constraint system. Loop rows come first (2 per loop,
/// x/z in base frame), then rolling rows (2 per wheel, x/z in contact frame).
struct ConstraintData {
  MatX J_L;      // loop force directions
  VecX X_u;      // loop drift
  MatX Y;        // loop constraint matrix (velocity of r_PQ in base frame)
  MatX J_A;      // rolling constraint rows
  VecX JA_dot_u; // rolling drift incl. contour compensation
  MatX J_F;      // lateral slip rows (one per wheel)
  MatX C_F;      // friction map, n_wheels x (2*n_wheels)
  MatX J;        // stacked force directions: [J_L; J_A + C_F' J_F]
  MatX W;        // stacked constraint matrix: [Y; J_A]
  VecX V_u;      // stacked drift: [X u; JA_dot u]
  VecX loop_gap; // in-plane components of r_PQ per loop (diagnostic)
  std::vector<ContactGeometry> contact;

  int rows() const { return static_cast<int>(W.rows()); }
};

struct ConstraintForces {
  VecX F_L;  // in-plane loop closure forces, base frame
  VecX F_C;  // contact forces, per wheel (x, z) in contact frame
};

/// Contour parameter from the ground normal, Jacobian convention
/// sigma = arctan2(row1(R_WI) n, row3(R_WI) n). Throws DegenerateContact
/// when the normal is (nearly) parallel to the wheel axis.
double contour_parameter(const Mat3& R_WI, const Vec3& n);

/// Rate of the contour parameter for a static ground normal.
/// omega_WI_in_W is the angular velocity of I relative to W, in W coordinates.
double contour_rate(const Mat3& R_WI, const Vec3& omega_WI_in_W, const Vec3& n);

ContactGeometry contact_geometry(const RobotModel& model,
                                 const KinematicsCache& kin, int wheel_index,
                                 const Vec3& normal);

/// Loop closure for one loop: returns the two in-plane rows of J_L and Y and
/// the drift X*u.
void loop_closure_rows(const RobotModel& model, const KinematicsCache& kin,
                       const Loop& loop, Eigen::Ref<MatX> J_L_rows,
                       Eigen::Ref<MatX> Y_rows, Eigen::Ref<VecX> X_u_rows,
                       Eigen::Ref<VecX> gap_rows);

/// Velocity-dependent lateral friction map (tanh law).
MatX friction_matrix(const MatX& J_F, const VecX& u, double mu_s);

/// Builds the full constraint system at the current state. `normals` must
/// hold one ground normal per wheel; pass an empty vector to assemble the
/// loop constraints only (no ground contact).
ConstraintData assemble_constraints(const RobotModel& model,
                                    const GeneralizedState& state,
                                    const KinematicsCache& kin,
                                    const std::vector<Vec3>& normals);

/// Everything the constrained dynamics needs at one state; computed once and
/// shared between the simulator step and the controller.
struct DynamicsTerms {
  KinematicsCache kin;
  MatX M;
  Eigen::LLT<MatX> M_llt;
  VecX h;  // b + g
  VecX s;  // spring torques
  ConstraintData cons;
};

DynamicsTerms compute_dynamics_terms(const RobotModel& model,
                                     const GeneralizedState& state,
                                     const std::vector<Vec3>& normals);

/// Solves the stacked constraint-force system
///   F = (W M^-1 J')^-1 (V u + W M^-1 (S' tau - b - g - s)).
/// Throws SingularConstraintSystem when the Schur complement is
/// ill-conditioned (reports the condition number).
ConstraintForces solve_constraint_forces(const RobotModel& model,
                                         const DynamicsTerms& dyn,
                                         const VecX& tau);

/// Constrained forward dynamics u_dot = M^-1 (S' tau - b - g - s - J' F).
VecX forward_dynamics(const RobotModel& model, const DynamicsTerms& dyn,
                      const VecX& tau);

/// Convenience wrapper: assembles terms and integrates nothing.
VecX forward_dynamics(const RobotModel& model, const GeneralizedState& state,
                      const VecX& tau, const std::vector<Vec3>& normals);

/// Minimum-kinetic-energy velocity correction: returns u such that
/// W u = target while M-weighted distance to state.u is minimal. Used to
/// start scenarios on the constraint manifold and to realize impulsive
/// ground-velocity changes.
VecX constrained_velocity(const RobotModel& model, const DynamicsTerms& dyn,
                          const VecX& u, const VecX& target);

}  // namespace loopwbc
