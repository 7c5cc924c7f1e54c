#include "loopwbc/wbc.hpp"

#include <cmath>
#include <filesystem>

#include "loopwbc/errors.hpp"
#include "loopwbc/logging.hpp"

namespace loopwbc {

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace

ControlFrame control_frame(const RobotModel& model, const KinematicsCache& kin,
                           const std::vector<ContactGeometry>& contacts) {
  if (contacts.size() != 2)
    throw DegenerateContact("control frame needs both wheel contacts");
  ControlFrame frame;
  frame.origin =
      0.5 * (contacts[0].contact_point + contacts[1].contact_point);

  // y along the line of support, pointing to the robot's left
  Vec3 y_axis = contacts[0].contact_point - contacts[1].contact_point;
  const Vec3 base_y = kin.body[0].R.col(1);
  if (y_axis.dot(base_y) < 0.0) y_axis = -y_axis;
  const double y_len = y_axis.norm();
  if (y_len < 1e-9) throw DegenerateContact("contact points coincide");
  y_axis /= y_len;

  // heading: base x-axis made orthogonal to the LoS
  Vec3 x_axis = kin.body[0].R.col(0);
  x_axis -= x_axis.dot(y_axis) * y_axis;
  const double x_len = x_axis.norm();
  if (x_len < 1e-9)
    throw DegenerateContact("heading parallel to the line of support");
  x_axis /= x_len;

  frame.R_IN.col(0) = x_axis;
  frame.R_IN.col(1) = y_axis;
  frame.R_IN.col(2) = x_axis.cross(y_axis);
  (void)model;
  return frame;
}

double pd_acceleration(double ref, double ref_rate, double ref_acc,
                       double meas, double meas_rate, double kp, double kd) {
  return kp * (ref - meas) + kd * (ref_rate - meas_rate) + ref_acc;
}

double roll_reference_raw(double velocity, double yaw_rate,
                          double aggressiveness) {
  return aggressiveness * std::atan(velocity * yaw_rate / kGravity);
}

double zmp_along_los(const ControlFrame& frame,
                     const std::vector<ContactGeometry>& contacts,
                     const VecX& F_C) {
  const double f_left = std::abs(F_C[1]);
  const double f_right = std::abs(F_C[3]);
  if (f_left + f_right < 1e-9)
    throw NoContactForce("both normal forces vanish");
  const Vec3 y_axis = frame.R_IN.col(1);
  const double y_l = y_axis.dot(contacts[0].contact_point - frame.origin);
  const double y_r = y_axis.dot(contacts[1].contact_point - frame.origin);
  return (f_left * y_l + f_right * y_r) / (f_left + f_right);
}

InequalitySet build_inequalities(const RobotModel& model) {
  const int n = model.n_u + 12;
  const int tau_at = model.n_u + 8;
  const int fc_at = model.n_u + 4;
  InequalitySet set;
  set.C = MatX::Zero(2 * model.n_tau + 2 + 4, n);
  set.d = VecX::Zero(set.C.rows());
  int row = 0;
  for (int i = 0; i < model.n_tau; ++i) {
    set.C(row, tau_at + i) = 1.0;
    set.d[row++] = model.tau_sat[i];
    set.C(row, tau_at + i) = -1.0;
    set.d[row++] = model.tau_sat[i];
  }
  // unilateral: normal entries of F_C stay non-positive
  set.C(row, fc_at + 1) = 1.0;
  set.d[row++] = 0.0;
  set.C(row, fc_at + 3) = 1.0;
  set.d[row++] = 0.0;
  // static friction: +-F_x <= -mu_h F_z per wheel
  for (int w = 0; w < 2; ++w) {
    set.C(row, fc_at + 2 * w) = 1.0;
    set.C(row, fc_at + 2 * w + 1) = model.mu_h;
    set.d[row++] = 0.0;
    set.C(row, fc_at + 2 * w) = -1.0;
    set.C(row, fc_at + 2 * w + 1) = model.mu_h;
    set.d[row++] = 0.0;
  }
  return set;
}

std::vector<TaskLevel> build_task_stack(
    const RobotModel& model, const GeneralizedState& state,
    const DynamicsTerms& dyn, const ControlFrame& frame,
    const LumpedPendulum& pend, const References& refs,
    const ControllerGains& gains, double pitch_acc_cmd,
    double roll_ref_filtered) {
  const int n_u = model.n_u;
  const int n = n_u + 12;
  const Mat3 R_NI = frame.R_IN.transpose();
  const ConstraintData& cons = dyn.cons;

  std::vector<TaskLevel> levels;
  levels.reserve(6);

  // 1) constrained equations of motion
  {
    TaskLevel lvl;
    lvl.A = MatX::Zero(n_u + cons.rows(), n);
    lvl.A.topLeftCorner(n_u, n_u) = dyn.M;
    lvl.A.block(0, n_u, n_u, 4) = cons.J_L.transpose();
    lvl.A.block(0, n_u + 4, n_u, 4) =
        cons.J_A.transpose() + cons.J_F.transpose() * cons.C_F;
    lvl.A.block(0, n_u + 8, n_u, model.n_tau) = -model.S.transpose();
    lvl.A.block(n_u, 0, cons.rows(), n_u) = cons.W;
    lvl.b = VecX::Zero(n_u + cons.rows());
    lvl.b.head(n_u) = -(dyn.h + dyn.s);
    lvl.b.tail(cons.rows()) = -cons.V_u;
    levels.push_back(std::move(lvl));
  }

  const Mat3X J_base_p = point_jacobian(model, dyn.kin, 0, dyn.kin.body[0].p);
  const Mat3X J_base_r = rotational_jacobian(model, dyn.kin, 0);

  // 2) base height above G, shortened with pitch and roll so the system
  //    behaves like a fixed-length pendulum
  {
    const Vec3 z_axis = frame.R_IN.col(2);
    const double meas = z_axis.dot(dyn.kin.body[0].p - frame.origin);
    const double meas_rate = z_axis.dot(dyn.kin.body[0].v);
    const Mat3 R_NB = R_NI * state.R;
    const double roll_meas = std::asin(std::clamp(R_NB(1, 2), -1.0, 1.0));
    const double target =
        refs.height * std::cos(pend.pitch) * std::cos(roll_meas);
    TaskLevel lvl;
    lvl.A = MatX::Zero(1, n);
    lvl.A.block(0, 0, 1, n_u) = (R_NI * J_base_p).row(2);
    lvl.b = VecX::Constant(
        1, pd_acceleration(target, refs.height_rate, refs.height_acc, meas,
                           meas_rate, gains.height_kp, gains.height_kd));
    levels.push_back(std::move(lvl));
  }

  // 3) base roll; positive roll leans the top toward +y of the control frame
  {
    const Mat3 R_NB = R_NI * state.R;
    const double roll_meas = std::asin(std::clamp(R_NB(1, 2), -1.0, 1.0));
    const double roll_rate_meas =
        -frame.R_IN.col(0).dot(state.u.segment<3>(3));
    const double roll_ref = roll_ref_filtered;
    const double acc =
        pd_acceleration(roll_ref, refs.roll_rate, refs.roll_acc, roll_meas,
                        roll_rate_meas, gains.roll_kp, gains.roll_kd);
    TaskLevel lvl;
    lvl.A = MatX::Zero(1, n);
    lvl.A.block(0, 0, 1, n_u) = (R_NI * J_base_r).row(0);
    lvl.b = VecX::Constant(1, -acc);  // +roll is a -x rotation in N
    levels.push_back(std::move(lvl));
  }

  // 4) LQR pitch tracking through the lumped rotational Jacobian
  {
    TaskLevel lvl;
    lvl.A = MatX::Zero(1, n);
    lvl.A.block(0, 0, 1, n_u) = (R_NI * pend.J_rot).row(1);
    lvl.b = VecX::Constant(
        1, pitch_acc_cmd - frame.R_IN.col(1).dot(pend.Jdot_u));
    levels.push_back(std::move(lvl));
  }

  // 5) yaw; the caller fills b against its integrated heading target
  {
    TaskLevel lvl;
    lvl.A = MatX::Zero(1, n);
    lvl.A.block(0, 0, 1, n_u) = (R_NI * J_base_r).row(2);
    lvl.b = VecX::Constant(1, 0.0);
    levels.push_back(std::move(lvl));
  }

  // 6) actuation torque minimization
  {
    TaskLevel lvl;
    lvl.A = MatX::Zero(model.n_tau, n);
    lvl.A.block(0, n_u + 8, model.n_tau, model.n_tau) =
        MatX::Identity(model.n_tau, model.n_tau);
    lvl.b = VecX::Zero(model.n_tau);
    levels.push_back(std::move(lvl));
  }

  return levels;
}

WholeBodyController::WholeBodyController(const RobotModel& model,
                                         WbcConfig config)
    : model_(&model), config_(std::move(config)) {
  prev_tau_ = VecX::Zero(model.n_tau);
  if (!config_.dump_dir.empty())
    std::filesystem::create_directories(config_.dump_dir);
}

WbcDecision WholeBodyController::step(const GeneralizedState& state,
                                      const std::vector<Vec3>& normals,
                                      const References& refs) {
  WbcDecision out;
  const RobotModel& model = *model_;
  try {
    const DynamicsTerms dyn = compute_dynamics_terms(model, state, normals);
    const ControlFrame frame = control_frame(model, dyn.kin, dyn.cons.contact);
    const LumpedPendulum pend = lump_pendulum(model, dyn.kin, frame.R_IN);

    // task 4 machinery: relinearize, discretize, gain update
    const SimplifiedLinearModel lin = linearize_simplified(pend, model);
    Mat3 A_d;
    Vec3 B_d;
    discretize_zoh(lin.A, lin.B, config_.period, A_d, B_d);
    const Mat3 Q = config_.lqr_Q.asDiagonal();
    const LqrGains gains = dare_.solve(A_d, B_d, Q, config_.lqr_R);
    max_radius_ = std::max(max_radius_, gains.closed_loop_radius);
    const double pitch_acc = lqr_pitch_command(
        gains, refs.pitch, refs.pitch_rate, refs.velocity, pend);

    // roll reference: quasi-static lean target, first-order filtered
    const double roll_raw =
        config_.zmp_regulation
            ? roll_reference_raw(refs.velocity, refs.yaw_rate,
                                 config_.aggressiveness)
            : refs.roll;
    const double alpha =
        1.0 - std::exp(-config_.period / config_.roll_filter_time_constant);
    roll_ref_filtered_ += alpha * (roll_raw - roll_ref_filtered_);

    // yaw target integration
    yaw_target_ = wrap_angle(yaw_target_ + refs.yaw_rate * config_.period);

    std::vector<TaskLevel> levels =
        build_task_stack(model, state, dyn, frame, pend, refs, config_.gains,
                         pitch_acc, roll_ref_filtered_);
    // fill the yaw task against the integrated target
    {
      const Vec3 heading = frame.R_IN.col(0);
      const double yaw_meas = std::atan2(heading.y(), heading.x());
      const double yaw_rate_meas =
          frame.R_IN.col(2).dot(state.u.segment<3>(3));
      levels[4].b[0] = config_.gains.yaw_kp * wrap_angle(yaw_target_ - yaw_meas) +
                       config_.gains.yaw_kd * (refs.yaw_rate - yaw_rate_meas) +
                       refs.yaw_acc;
    }

    const InequalitySet ineq = build_inequalities(model);
    if (!config_.dump_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "/qp_%06d.json", step_index_);
      dump_hierarchy(config_.dump_dir + name, levels, ineq);
    }

    const HqpSolution sol = hqp_.solve(levels, ineq);

    out.x = sol.x;
    out.udot = sol.x.head(model.n_u);
    out.F_L = sol.x.segment(model.n_u, 4);
    out.F_C = sol.x.segment(model.n_u + 4, 4);
    out.tau = sol.x.tail(model.n_tau);
    out.task_residuals = sol.level_residuals;
    out.dynamics_residual = sol.level_residuals[0];
    out.closed_loop_radius = gains.closed_loop_radius;
    out.pitch = pend.pitch;
    out.velocity = pend.ground_velocity;
    const Mat3 R_NB = frame.R_IN.transpose() * state.R;
    out.roll = std::asin(std::clamp(R_NB(1, 2), -1.0, 1.0));
    out.roll_reference = roll_ref_filtered_;
    try {
      out.zmp_offset = zmp_along_los(frame, dyn.cons.contact, out.F_C);
    } catch (const NoContactForce&) {
      out.zmp_offset = 0.0;
    }

    prev_tau_ = out.tau;
    hold_count_ = 0;
  } catch (const Error& e) {
    log::warn(std::string("wbc step failed: ") + e.what());
    ++hold_count_;
    out.held = true;
    out.tau = hold_count_ <= config_.hold_limit ? prev_tau_
                                                : VecX::Zero(model.n_tau);
    if (hold_count_ > config_.hold_limit)
      throw ScenarioFailed("controller failed " +
                           std::to_string(hold_count_) +
                           " consecutive steps: " + e.what());
  }
  ++step_index_;
  return out;
}

}  // namespace loopwbc
