#pragma once

#include "loopwbc/constraints.hpp"
#include "loopwbc/model.hpp"

namespace loopwbc {

struct StandingState {
  GeneralizedState state;  // u = 0, loops closed, contacts at target height
  VecX tau;                // torques holding the pose
};

/// Best-effort static balance: least-squares solve of
/// S' tau - J' F = b + g + s over (tau, F); returns tau and the residual.
struct StaticBalance {
  VecX tau;
  VecX forces;
  double residual;
};
StaticBalance static_balance(const RobotModel& model, const DynamicsTerms& dyn);

/// Finds the spring-loaded standing equilibrium on flat ground by damped
/// relaxation from the zero configuration. The returned pose has the contact
/// points at z = contact_height and the contact midpoint at x = y = 0.
/// Throws NoConvergence if the relaxation does not settle.
StandingState find_standing_state(const RobotModel& model,
                                  double contact_height = 0.0,
                                  double tol = 1e-12, int max_iters = 100);

}  // namespace loopwbc
