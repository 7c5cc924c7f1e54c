#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "loopwbc/model.hpp"

namespace loopwbc {

/// One priority level: minimize ||A x - b||^2.
struct TaskLevel {
  MatX A;
  VecX b;
};

/// Shared inequality set C x <= d, enforced at every level.
struct InequalitySet {
  MatX C;
  VecX d;

  int rows() const { return static_cast<int>(C.rows()); }
};

struct HqpDiagnostics {
  double max_inequality_violation = 0.0;
  double max_lock_violation = 0.0;  // drift of locked higher-level optima
  double stationarity = 0.0;        // worst KKT stationarity across levels
  int rank_warnings = 0;
  int active_set_iterations = 0;
};

struct HqpSolution {
  VecX x;
  std::vector<double> level_residuals;
  HqpDiagnostics diag;
};

/// Equality-and-inequality constrained convex QP
///   min 1/2 x'Hx + f'x  s.t.  A_eq x = b_eq, C x <= d
/// solved with a primal active-set method. KKT residuals are driven below
/// 1e-8; throws Infeasible/MaxIterations.
VecX solve_qp(const MatX& H, const VecX& f, const MatX& A_eq, const VecX& b_eq,
              const MatX& C, const VecX& d,
              const std::optional<VecX>& warm_start = std::nullopt);

/// Lexicographic hierarchy solver. Holds warm-start state between calls;
/// use one instance per controller.
class HqpSolver {
 public:
  struct Options {
    double regularization = 1e-8;  // strict convexity floor per level
    double kkt_tol = 1e-8;
    int max_active_set_iters = 200;
    bool normalize_rows = true;
  };

  HqpSolver() = default;
  explicit HqpSolver(Options opts) : opts_(opts) {}

  HqpSolution solve(const std::vector<TaskLevel>& levels,
                    const InequalitySet& ineq);

  void reset();  // drop warm-start state

  const Options& options() const { return opts_; }

 private:
  Options opts_;
  VecX prev_x_;
  bool has_prev_ = false;
};

/// Serializes a hierarchy to a JSON problem archive (one file per call).
void dump_hierarchy(const std::string& path,
                    const std::vector<TaskLevel>& levels,
                    const InequalitySet& ineq);

}  // namespace loopwbc
