#include "loopwbc/constraints.hpp"

#include <cmath>
#include <string>

#include "loopwbc/errors.hpp"
#include "loopwbc/logging.hpp"

namespace loopwbc {

namespace {
constexpr double kPlaneProjectionMin = 1e-9;
constexpr double kLoopGapWarn = 1e-4;
}  // namespace

double contour_parameter(const Mat3& R_WI, const Vec3& n) {
  const Vec3 n_w = R_WI * n;
  const double planar = std::sqrt(n_w.x() * n_w.x() + n_w.z() * n_w.z());
  if (planar < kPlaneProjectionMin) {
    throw DegenerateContact(
        "ground normal nearly parallel to the wheel axis (in-plane "
        "projection " +
        std::to_string(planar) + ")");
  }
  return std::atan2(n_w.x(), n_w.z());
}

double contour_rate(const Mat3& R_WI, const Vec3& omega_WI_in_W,
                    const Vec3& n) {
  const Vec3 n_w = R_WI * n;
  const double planar2 = n_w.x() * n_w.x() + n_w.z() * n_w.z();
  if (planar2 < kPlaneProjectionMin * kPlaneProjectionMin) {
    throw DegenerateContact("contour rate undefined: degenerate contact");
  }
  const Vec3 n_w_dot = omega_WI_in_W.cross(n_w);  // I-fixed normal seen from W
  const auto [da, db] = so3::atan2_gradient(n_w.x(), n_w.z());
  return da * n_w_dot.x() + db * n_w_dot.z();
}

ContactGeometry contact_geometry(const RobotModel& model,
                                 const KinematicsCache& kin, int wheel_index,
                                 const Vec3& normal) {
  const Wheel& wheel = model.wheels[wheel_index];
  const BodyKin& hub = kin.body[wheel.body];
  const Mat3 R_WI = hub.R.transpose();

  ContactGeometry geo;
  geo.normal = normal;
  geo.sigma = contour_parameter(R_WI, normal);

  const Vec3 r_wc_local(wheel.radius * std::sin(geo.sigma), 0.0,
                        wheel.radius * std::cos(geo.sigma));
  geo.contact_point = hub.p + hub.R * r_wc_local;
  geo.tangent_w = hub.R * Vec3(wheel.radius * std::cos(geo.sigma), 0.0,
                               -wheel.radius * std::sin(geo.sigma));

  if (kin.has_velocity) {
    const Vec3 omega_wi_w = -(R_WI * hub.omega);
    geo.sigma_dot = contour_rate(R_WI, omega_wi_w, normal);
  }

  const Vec3 axle = hub.R.col(1);
  Vec3 heading = axle.cross(normal);
  const double hn = heading.norm();
  if (hn < kPlaneProjectionMin)
    throw DegenerateContact("wheel axis parallel to ground normal");
  heading /= hn;
  geo.R_IC.col(0) = heading;
  geo.R_IC.col(1) = normal.cross(heading);
  geo.R_IC.col(2) = normal;
  return geo;
}

void loop_closure_rows(const RobotModel& model, const KinematicsCache& kin,
                       const Loop& loop, Eigen::Ref<MatX> J_L_rows,
                       Eigen::Ref<MatX> Y_rows, Eigen::Ref<VecX> X_u_rows,
                       Eigen::Ref<VecX> gap_rows) {
  const BodyKin& pb = kin.body[loop.p_body];
  const BodyKin& qb = kin.body[loop.q_body];
  const Vec3 p_w = pb.p + pb.R * loop.p_point;
  const Vec3 q_w = qb.p + qb.R * loop.q_point;
  const Vec3 r_pq = q_w - p_w;
  const Mat3 R_BI = kin.body[0].R.transpose();

  const Mat3X J_p = point_jacobian(model, kin, loop.p_body, p_w);
  const Mat3X J_q = point_jacobian(model, kin, loop.q_body, q_w);
  const Mat3X J_base_rot = rotational_jacobian(model, kin, 0);

  const Mat3X J_l_full = R_BI * (J_p - J_q);
  const Mat3X Y_full = R_BI * (so3::skew(r_pq) * J_base_rot + (J_q - J_p));

  // Drift X*u, fully expanded so the constraint stays exact for any gap.
  const Vec3 omega_b = kin.body[0].omega;
  const Vec3 v_p = pb.v + pb.omega.cross(p_w - pb.p);
  const Vec3 v_q = qb.v + qb.omega.cross(q_w - qb.p);
  const Vec3 bias_p = point_bias_accel(kin, loop.p_body, p_w);
  const Vec3 bias_q = point_bias_accel(kin, loop.q_body, q_w);
  const Vec3 x_u_full =
      R_BI * (-omega_b.cross(r_pq.cross(omega_b)) +
              r_pq.cross(kin.body[0].alpha_bias) -
              2.0 * omega_b.cross(v_q - v_p) + (bias_q - bias_p));

  J_L_rows.row(0) = J_l_full.row(0);
  J_L_rows.row(1) = J_l_full.row(2);
  Y_rows.row(0) = Y_full.row(0);
  Y_rows.row(1) = Y_full.row(2);
  X_u_rows[0] = x_u_full.x();
  X_u_rows[1] = x_u_full.z();
  const Vec3 gap_b = R_BI * r_pq;
  gap_rows[0] = gap_b.x();
  gap_rows[1] = gap_b.z();
}

MatX friction_matrix(const MatX& J_F, const VecX& u, double mu_s) {
  const int n_wheels = static_cast<int>(J_F.rows());
  MatX C = MatX::Zero(n_wheels, 2 * n_wheels);
  for (int w = 0; w < n_wheels; ++w) {
    const double lateral_rate = J_F.row(w).dot(u);
    C(w, 2 * w + 1) = -mu_s * std::tanh(lateral_rate);
  }
  return C;
}

ConstraintData assemble_constraints(const RobotModel& model,
                                    const GeneralizedState& state,
                                    const KinematicsCache& kin,
                                    const std::vector<Vec3>& normals) {
  const int n_u = model.n_u;
  const int n_loops = static_cast<int>(model.loops.size());
  const int n_wheels = normals.empty() ? 0 : static_cast<int>(model.wheels.size());
  if (!normals.empty() &&
      normals.size() != model.wheels.size()) {
    throw ValidationError("one ground normal per wheel required");
  }

  ConstraintData c;
  c.J_L = MatX::Zero(2 * n_loops, n_u);
  c.Y = MatX::Zero(2 * n_loops, n_u);
  c.X_u = VecX::Zero(2 * n_loops);
  c.loop_gap = VecX::Zero(2 * n_loops);
  for (int l = 0; l < n_loops; ++l) {
    loop_closure_rows(model, kin, model.loops[l],
                      c.J_L.middleRows(2 * l, 2), c.Y.middleRows(2 * l, 2),
                      c.X_u.segment(2 * l, 2), c.loop_gap.segment(2 * l, 2));
  }
  if (n_loops > 0 && c.loop_gap.norm() > kLoopGapWarn) {
    log::warn("loop gap " + std::to_string(c.loop_gap.norm()) +
              " m exceeds monitor threshold");
  }

  c.J_A = MatX::Zero(2 * n_wheels, n_u);
  c.JA_dot_u = VecX::Zero(2 * n_wheels);
  c.J_F = MatX::Zero(n_wheels, n_u);
  c.contact.clear();
  for (int w = 0; w < n_wheels; ++w) {
    ContactGeometry geo = contact_geometry(model, kin, w, normals[w]);
    const int body = model.wheels[w].body;
    const Mat3X J_pt = point_jacobian(model, kin, body, geo.contact_point);
    const Vec3 bias =
        point_bias_accel(kin, body, geo.contact_point) +
        kin.body[body].omega.cross(geo.tangent_w) * geo.sigma_dot;
    const Vec3 x_c = geo.R_IC.col(0);
    const Vec3 y_c = geo.R_IC.col(1);
    const Vec3 z_c = geo.R_IC.col(2);
    c.J_A.row(2 * w) = x_c.transpose() * J_pt;
    c.J_A.row(2 * w + 1) = z_c.transpose() * J_pt;
    c.JA_dot_u[2 * w] = x_c.dot(bias);
    c.JA_dot_u[2 * w + 1] = z_c.dot(bias);
    c.J_F.row(w) = y_c.transpose() * J_pt;
    c.contact.push_back(geo);
  }

  c.C_F = friction_matrix(c.J_F, state.u, model.mu_s);

  const int rows = 2 * n_loops + 2 * n_wheels;
  c.J = MatX::Zero(rows, n_u);
  c.W = MatX::Zero(rows, n_u);
  c.V_u = VecX::Zero(rows);
  c.J.topRows(2 * n_loops) = c.J_L;
  c.W.topRows(2 * n_loops) = c.Y;
  c.V_u.head(2 * n_loops) = c.X_u;
  if (n_wheels > 0) {
    c.J.bottomRows(2 * n_wheels) = c.J_A + c.C_F.transpose() * c.J_F;
    c.W.bottomRows(2 * n_wheels) = c.J_A;
    c.V_u.tail(2 * n_wheels) = c.JA_dot_u;
  }
  return c;
}

DynamicsTerms compute_dynamics_terms(const RobotModel& model,
                                     const GeneralizedState& state,
                                     const std::vector<Vec3>& normals) {
  DynamicsTerms dyn;
  dyn.kin = kinematics(model, state);
  dyn.M = mass_matrix(model, dyn.kin);
  dyn.M_llt.compute(dyn.M);
  dyn.h = nonlinear_terms(model, dyn.kin);
  dyn.s = spring_torques(model, state);
  dyn.cons = assemble_constraints(model, state, dyn.kin, normals);
  return dyn;
}

ConstraintForces solve_constraint_forces(const RobotModel& model,
                                         const DynamicsTerms& dyn,
                                         const VecX& tau) {
  const ConstraintData& c = dyn.cons;
  const VecX rhs_free = model.S.transpose() * tau - dyn.h - dyn.s;
  const MatX Minv_Jt = dyn.M_llt.solve(c.J.transpose());
  const MatX G = c.W * Minv_Jt;

  Eigen::JacobiSVD<MatX> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  const double cond = (smin > 0.0) ? smax / smin : 1e300;
  if (cond > 1e10) {
    throw SingularConstraintSystem(
        "constraint Schur complement condition number " +
        std::to_string(cond));
  }

  const VecX rhs = c.V_u + c.W * dyn.M_llt.solve(rhs_free);
  const VecX F = svd.solve(rhs);

  const int n_loop_rows = static_cast<int>(c.J_L.rows());
  ConstraintForces out;
  out.F_L = F.head(n_loop_rows);
  out.F_C = F.tail(F.size() - n_loop_rows);
  return out;
}

VecX forward_dynamics(const RobotModel& model, const DynamicsTerms& dyn,
                      const VecX& tau) {
  const ConstraintForces F = solve_constraint_forces(model, dyn, tau);
  VecX force = model.S.transpose() * tau - dyn.h - dyn.s;
  VecX F_all(F.F_L.size() + F.F_C.size());
  F_all << F.F_L, F.F_C;
  force.noalias() -= dyn.cons.J.transpose() * F_all;
  return dyn.M_llt.solve(force);
}

VecX forward_dynamics(const RobotModel& model, const GeneralizedState& state,
                      const VecX& tau, const std::vector<Vec3>& normals) {
  const DynamicsTerms dyn = compute_dynamics_terms(model, state, normals);
  return forward_dynamics(model, dyn, tau);
}

VecX constrained_velocity(const RobotModel& model, const DynamicsTerms& dyn,
                          const VecX& u, const VecX& target) {
  (void)model;
  const MatX& W = dyn.cons.W;
  const MatX Minv_Wt = dyn.M_llt.solve(W.transpose());
  const MatX G = W * Minv_Wt;
  const VecX lambda = G.ldlt().solve(target - W * u);
  return u + Minv_Wt * lambda;
}

}  // namespace loopwbc
