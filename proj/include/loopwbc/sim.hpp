#pragma once

#include <string>
#include <vector>

#include "loopwbc/scenario.hpp"
#include "loopwbc/standing.hpp"

namespace loopwbc {

/// One semi-implicit Euler step of the constrained dynamics:
/// u' = u + udot dt, positions integrate u', orientation via the exponential
/// map and re-orthonormalization. Throws EnergyBlowup when the kinetic
/// energy passes 1e6 J.
GeneralizedState integrate_step(const RobotModel& model,
                                const GeneralizedState& state, const VecX& tau,
                                double dt, const std::vector<Vec3>& normals);

/// Time-indexed record at controller rate with a fixed column schema.
struct SimLog {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;
  double value(size_t row, const std::string& name) const;
  std::vector<double> series(const std::string& name) const;
  void write_csv(const std::string& path) const;
};

struct SimSummary {
  bool success = true;
  std::string failure_reason;
  double failure_time = -1.0;
  double duration = 0.0;
  double max_abs_pitch = 0.0;
  double max_loop_gap = 0.0;
  double max_rolling_residual = 0.0;
  double max_accel_residual = 0.0;
  double max_closed_loop_radius = 0.0;
  double mean_control_seconds = 0.0;
  std::string to_json() const;
};

struct SimResult {
  SimLog log;
  SimSummary summary;
};

/// Runs a scenario to completion. Controller failures, falls and energy
/// blowups are reported in the summary (success = false) rather than thrown,
/// so partial logs stay available; scenario-file problems throw.
SimResult run_scenario(const Scenario& scenario);

}  // namespace loopwbc
