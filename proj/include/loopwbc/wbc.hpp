#pragma once

#include <string>
#include <vector>

#include "loopwbc/constraints.hpp"
#include "loopwbc/hqp.hpp"
#include "loopwbc/lqr.hpp"
#include "loopwbc/model.hpp"

namespace loopwbc {

/// Local control frame: origin at the midpoint of the line of support,
/// x along the heading, y along the line of support, z = x cross y.
struct ControlFrame {
  Mat3 R_IN = Mat3::Identity();
  Vec3 origin = Vec3::Zero();  // G
};

struct ControllerGains {
  double height_kp = 100.0, height_kd = 20.0;
  double roll_kp = 60.0, roll_kd = 15.5;
  double yaw_kp = 25.0, yaw_kd = 10.0;
};

struct WbcConfig {
  ControllerGains gains;
  Vec3 lqr_Q = Vec3(20.0, 2.0, 10.0);
  double lqr_R = 1.0;
  double period = 0.0025;  // T_s
  double aggressiveness = 1.0;
  bool zmp_regulation = false;
  double roll_filter_time_constant = 0.2;  // s
  int hold_limit = 10;
  std::string dump_dir;  // QP archive directory; empty disables dumping
};

/// Per-step reference sample handed to the controller by the scenario.
struct References {
  double height = 0.0;  // desired pendulum length L: base origin above G, m
  double height_rate = 0.0;
  double height_acc = 0.0;
  double roll = 0.0;  // rad; overridden when ZMP regulation is on
  double roll_rate = 0.0;
  double roll_acc = 0.0;
  double yaw_rate = 0.0;  // rad/s, integrated into the yaw target
  double yaw_acc = 0.0;
  double pitch = 0.0;
  double pitch_rate = 0.0;
  double velocity = 0.0;  // m/s ground velocity
};

struct WbcDecision {
  VecX x;  // stacked (udot, F_L, F_C, tau)
  VecX udot, F_L, F_C, tau;
  std::vector<double> task_residuals;
  double zmp_offset = 0.0;  // m along the LoS, relative to G
  double dynamics_residual = 0.0;
  double closed_loop_radius = 0.0;
  double pitch = 0.0;
  double velocity = 0.0;
  double roll = 0.0;
  double roll_reference = 0.0;
  bool held = false;  // previous torques reused after a solver failure
};

ControlFrame control_frame(const RobotModel& model, const KinematicsCache& kin,
                           const std::vector<ContactGeometry>& contacts);

/// PD law with feedforward acceleration.
double pd_acceleration(double ref, double ref_rate, double ref_acc,
                       double meas, double meas_rate, double kp, double kd);

/// Quasi-static lean target; the caller low-pass filters it.
double roll_reference_raw(double velocity, double yaw_rate,
                          double aggressiveness);

/// Normal-force weighted support position along the LoS, relative to G.
/// Throws NoContactForce when both normal entries are (near) zero.
double zmp_along_los(const ControlFrame& frame,
                     const std::vector<ContactGeometry>& contacts,
                     const VecX& F_C);

/// Saturation, unilateral-contact and static-friction rows over the stacked
/// decision variables.
InequalitySet build_inequalities(const RobotModel& model);

/// The six prioritized levels. `pitch_acc_cmd` is the LQR output tracked by
/// level 4.
std::vector<TaskLevel> build_task_stack(const RobotModel& model,
                                        const GeneralizedState& state,
                                        const DynamicsTerms& dyn,
                                        const ControlFrame& frame,
                                        const LumpedPendulum& pend,
                                        const References& refs,
                                        const ControllerGains& gains,
                                        double pitch_acc_cmd,
                                        double roll_ref_filtered);

class WholeBodyController {
 public:
  WholeBodyController(const RobotModel& model, WbcConfig config);

  WbcDecision step(const GeneralizedState& state,
                   const std::vector<Vec3>& normals, const References& refs);

  const WbcConfig& config() const { return config_; }
  double yaw_target() const { return yaw_target_; }
  void set_yaw_target(double yaw) { yaw_target_ = yaw; }
  double max_closed_loop_radius() const { return max_radius_; }
  double filtered_roll_reference() const { return roll_ref_filtered_; }

 private:
  const RobotModel* model_;
  WbcConfig config_;
  HqpSolver hqp_;
  DareSolver dare_;
  double roll_ref_filtered_ = 0.0;
  double yaw_target_ = 0.0;
  VecX prev_tau_;
  int hold_count_ = 0;
  int step_index_ = 0;
  double max_radius_ = 0.0;
};

}  // namespace loopwbc
