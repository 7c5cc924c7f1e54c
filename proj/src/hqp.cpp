#include "loopwbc/hqp.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "loopwbc/errors.hpp"
#include "loopwbc/logging.hpp"

namespace loopwbc {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kActiveTol = 1e-10;
constexpr double kMultiplierTol = 1e-9;

/// Objective in either dense or least-squares form. The least-squares path
/// avoids squaring the condition number when the hierarchy needs tight
/// locked-level preservation.
struct QuadObjective {
  bool is_ls = false;
  MatX H;
  VecX f;
  MatX A;
  VecX b;
  double eps = 0.0;

  static QuadObjective dense(const MatX& H, const VecX& f) {
    QuadObjective q;
    q.is_ls = false;
    q.H = H;
    q.f = f;
    return q;
  }
  static QuadObjective least_squares(const MatX& A, const VecX& b,
                                     double eps) {
    QuadObjective q;
    q.is_ls = true;
    q.A = A;
    q.b = b;
    q.eps = eps;
    return q;
  }

  int dim() const { return is_ls ? static_cast<int>(A.cols())
                                 : static_cast<int>(H.cols()); }

  VecX gradient(const VecX& x) const {
    if (is_ls)
      return 2.0 * (A.transpose() * (A * x - b)) + 2.0 * eps * x;
    return H * x + f;
  }

  /// argmin_p q(x + Z y), p = Z y with Z an orthonormal nullspace basis of
  /// the working constraints.
  VecX reduced_step(const VecX& x, const MatX& Z) const {
    if (Z.cols() == 0) return VecX::Zero(x.size());
    if (is_ls) {
      const Eigen::Index m = A.rows(), k = Z.cols();
      const double sq = std::sqrt(eps);
      MatX G(m + k, k);
      G.topRows(m) = A * Z;
      G.bottomRows(k) = sq * MatX::Identity(k, k);
      VecX rhs(m + k);
      rhs.head(m) = b - A * x;
      rhs.tail(k) = -sq * (Z.transpose() * x);
      const VecX y = G.colPivHouseholderQr().solve(rhs);
      return Z * y;
    }
    const MatX Hr = Z.transpose() * H * Z;
    const VecX g = Z.transpose() * (H * x + f);
    Eigen::LDLT<MatX> ldlt(Hr);
    if (ldlt.info() != Eigen::Success) {
      // PSD fallback: tiny ridge
      Eigen::LDLT<MatX> ridged(Hr + 1e-12 * MatX::Identity(Hr.rows(),
                                                           Hr.cols()));
      return Z * VecX(ridged.solve(-g));
    }
    return Z * VecX(ldlt.solve(-g));
  }
};

MatX nullspace_basis(const MatX& E) {
  const Eigen::Index n = E.cols();
  if (E.rows() == 0) return MatX::Identity(n, n);
  Eigen::ColPivHouseholderQR<MatX> qr(E.transpose());
  const Eigen::Index rank = qr.rank();
  const MatX Q = qr.householderQ();
  return Q.rightCols(n - rank);
}

struct ActiveSetResult {
  VecX x;
  int iterations = 0;
};

ActiveSetResult active_set_solve(const QuadObjective& obj, const MatX& A_eq,
                                 const VecX& b_eq, const MatX& C,
                                 const VecX& d,
                                 const std::optional<VecX>& warm_start,
                                 int max_iters, bool allow_phase1 = true);

/// Minimizes the worst violation t over (x, t) with C x - t <= d; the
/// augmented problem is feasible by construction, so the same engine runs it.
VecX phase1_point(const MatX& A_eq, const VecX& b_eq, const MatX& C,
                  const VecX& d, const VecX& x0, int max_iters) {
  const int n = static_cast<int>(C.cols());
  const int m = static_cast<int>(C.rows());
  MatX H = 1e-9 * MatX::Identity(n + 1, n + 1);
  VecX f = VecX::Zero(n + 1);
  f[n] = 1.0;
  MatX A_aug(A_eq.rows(), n + 1);
  if (A_eq.rows() > 0) {
    A_aug.leftCols(n) = A_eq;
    A_aug.col(n).setZero();
  }
  MatX C_aug(m + 1, n + 1);
  C_aug.leftCols(n).topRows(m) = C;
  C_aug.col(n).head(m).setConstant(-1.0);
  C_aug.row(m).setZero();
  C_aug(m, n) = -1.0;  // t >= 0
  VecX d_aug(m + 1);
  d_aug.head(m) = d;
  d_aug[m] = 0.0;

  VecX start(n + 1);
  start.head(n) = x0;
  start[n] = std::max(0.0, (C * x0 - d).maxCoeff()) + 1.0;
  const auto res = active_set_solve(QuadObjective::dense(H, f), A_aug,
                                    b_eq, C_aug, d_aug, start,
                                    max_iters, /*allow_phase1=*/false);
  if (res.x[n] > 1e-7) {
    VecX viol = C * res.x.head(n) - d;
    int worst = 0;
    for (int j = 1; j < m; ++j)
      if (viol[j] > viol[worst]) worst = j;
    throw Infeasible("no feasible point found; most violated row " +
                     std::to_string(worst) + " by " +
                     std::to_string(viol[worst]));
  }
  return res.x.head(n);
}

/// Primal active-set method for a convex QP with equalities; an infeasible
/// start is repaired by the phase-1 subproblem.
ActiveSetResult active_set_solve(const QuadObjective& obj, const MatX& A_eq,
                                 const VecX& b_eq, const MatX& C,
                                 const VecX& d,
                                 const std::optional<VecX>& warm_start,
                                 int max_iters, bool allow_phase1) {
  const int n = obj.dim();
  const int m_ineq = static_cast<int>(C.rows());

  // --- feasible starting point ---
  VecX x;
  if (warm_start && warm_start->size() == n) {
    x = *warm_start;
  } else {
    x = VecX::Zero(n);
  }
  if (A_eq.rows() > 0) {
    // least-norm correction onto the equality manifold
    const VecX r = b_eq - A_eq * x;
    if (r.lpNorm<Eigen::Infinity>() > kFeasTol) {
      x += A_eq.completeOrthogonalDecomposition().solve(r);
      if ((A_eq * x - b_eq).lpNorm<Eigen::Infinity>() > 1e-7) {
        throw Infeasible("equality constraints inconsistent (residual " +
                         std::to_string((A_eq * x - b_eq).norm()) + ")");
      }
    }
  }
  if (m_ineq > 0 && (C * x - d).maxCoeff() > kFeasTol) {
    if (!allow_phase1)
      throw Infeasible("phase-1 subproblem lost feasibility");
    x = phase1_point(A_eq, b_eq, C, d, x, max_iters);
  }

  // --- working set: inequality rows active at x ---
  std::vector<bool> in_work(m_ineq, false);
  for (int j = 0; j < m_ineq; ++j)
    if (std::abs(C.row(j).dot(x) - d[j]) <= kActiveTol) in_work[j] = true;

  ActiveSetResult out;
  for (int it = 0; it < max_iters; ++it) {
    out.iterations = it + 1;
    std::vector<int> work;
    for (int j = 0; j < m_ineq; ++j)
      if (in_work[j]) work.push_back(j);

    MatX E(A_eq.rows() + static_cast<Eigen::Index>(work.size()), n);
    E.topRows(A_eq.rows()) = A_eq;
    for (size_t k = 0; k < work.size(); ++k)
      E.row(A_eq.rows() + static_cast<Eigen::Index>(k)) = C.row(work[k]);

    const MatX Z = nullspace_basis(E);
    const VecX p = obj.reduced_step(x, Z);

    if (p.lpNorm<Eigen::Infinity>() <= 1e-11 * (1.0 + x.norm())) {
      if (work.empty()) {
        out.x = x;
        return out;
      }
      // multipliers of the working inequality rows
      const VecX g = obj.gradient(x);
      const VecX lambda = E.transpose()
                              .completeOrthogonalDecomposition()
                              .solve(-g);
      int drop = -1;
      double most_negative = -kMultiplierTol;
      for (size_t k = 0; k < work.size(); ++k) {
        const double lk = lambda[A_eq.rows() + static_cast<Eigen::Index>(k)];
        if (lk < most_negative) {
          most_negative = lk;
          drop = work[k];
        }
      }
      if (drop < 0) {
        out.x = x;
        return out;
      }
      in_work[drop] = false;
      continue;
    }

    // step length limited by the blocking constraint
    double alpha = 1.0;
    int blocking = -1;
    for (int j = 0; j < m_ineq; ++j) {
      if (in_work[j]) continue;
      const double cp = C.row(j).dot(p);
      if (cp <= 1e-12) continue;
      const double slack = d[j] - C.row(j).dot(x);
      const double aj = std::max(0.0, slack / cp);
      if (aj < alpha) {
        alpha = aj;
        blocking = j;
      }
    }
    x += alpha * p;
    if (blocking >= 0) in_work[blocking] = true;
  }
  throw MaxIterations("active-set iteration cap reached");
}

double kkt_stationarity(const QuadObjective& obj, const MatX& A_eq,
                        const MatX& C, const std::vector<int>& active,
                        const VecX& x) {
  MatX E(A_eq.rows() + static_cast<Eigen::Index>(active.size()), obj.dim());
  E.topRows(A_eq.rows()) = A_eq;
  for (size_t k = 0; k < active.size(); ++k)
    E.row(A_eq.rows() + static_cast<Eigen::Index>(k)) = C.row(active[k]);
  const VecX g = obj.gradient(x);
  if (E.rows() == 0) return g.lpNorm<Eigen::Infinity>();
  const VecX lambda = E.transpose().completeOrthogonalDecomposition().solve(-g);
  return (g + E.transpose() * lambda).lpNorm<Eigen::Infinity>();
}

}  // namespace

VecX solve_qp(const MatX& H, const VecX& f, const MatX& A_eq, const VecX& b_eq,
              const MatX& C, const VecX& d,
              const std::optional<VecX>& warm_start) {
  const QuadObjective obj = QuadObjective::dense(H, f);
  return active_set_solve(obj, A_eq, b_eq, C, d, warm_start, 500).x;
}

HqpSolution HqpSolver::solve(const std::vector<TaskLevel>& levels,
                             const InequalitySet& ineq) {
  if (levels.empty()) throw ValidationError("empty hierarchy");
  const int n = static_cast<int>(levels.front().A.cols());

  std::optional<VecX> warm;
  if (has_prev_ && prev_x_.size() == n) warm = prev_x_;

  HqpSolution sol;
  sol.level_residuals.reserve(levels.size());
  sol.diag = HqpDiagnostics{};

  MatX locks(0, n);
  VecX lock_rhs(0);
  VecX x = VecX::Zero(n);

  for (size_t i = 0; i < levels.size(); ++i) {
    const TaskLevel& level = levels[i];
    if (level.A.cols() != n)
      throw ValidationError("level " + std::to_string(i + 1) +
                            ": column count mismatch");

    // Row normalization keeps the stacked problem well-scaled; it does not
    // change the minimizer of the level.
    MatX An = level.A;
    VecX bn = level.b;
    if (opts_.normalize_rows) {
      for (Eigen::Index r = 0; r < An.rows(); ++r) {
        const double nrm = An.row(r).norm();
        if (nrm > 1e-12) {
          An.row(r) /= nrm;
          bn[r] /= nrm;
        }
      }
    }

    // Rank check of the level restricted to the locked subspace.
    {
      const MatX Z = nullspace_basis(locks);
      if (Z.cols() > 0) {
        Eigen::ColPivHouseholderQR<MatX> qr(An * Z);
        const Eigen::Index expect =
            std::min<Eigen::Index>(An.rows(), Z.cols());
        if (qr.rank() < expect) {
          ++sol.diag.rank_warnings;
          log::debug("hqp level " + std::to_string(i + 1) +
                     " rank-deficient on the remaining subspace "
                     "(regularization engages)");
        }
      }
    }

    const QuadObjective obj =
        QuadObjective::least_squares(An, bn, opts_.regularization);
    ActiveSetResult res;
    try {
      res = active_set_solve(obj, locks, lock_rhs, ineq.C, ineq.d, warm,
                             opts_.max_active_set_iters);
    } catch (const Infeasible& e) {
      throw Infeasible("level " + std::to_string(i + 1) + ": " + e.what());
    }
    x = res.x;
    sol.diag.active_set_iterations += res.iterations;
    sol.level_residuals.push_back((level.A * x - level.b).norm());

    // lock this level's achieved value
    const Eigen::Index old_rows = locks.rows();
    locks.conservativeResize(old_rows + An.rows(), n);
    locks.bottomRows(An.rows()) = An;
    lock_rhs.conservativeResize(old_rows + An.rows());
    lock_rhs.tail(An.rows()) = An * x;
    warm = x;

    // KKT stationarity of this level at its optimum
    std::vector<int> active;
    for (int j = 0; j < ineq.rows(); ++j)
      if (std::abs(ineq.C.row(j).dot(x) - ineq.d[j]) <= 1e-8)
        active.push_back(j);
    MatX lock_part = locks.topRows(old_rows);
    sol.diag.stationarity =
        std::max(sol.diag.stationarity,
                 kkt_stationarity(obj, lock_part, ineq.C, active, x));
  }

  sol.x = x;
  if (ineq.rows() > 0)
    sol.diag.max_inequality_violation =
        std::max(0.0, (ineq.C * x - ineq.d).maxCoeff());
  // verify the locks actually held for every level
  double lock_viol = 0.0;
  {
    Eigen::Index row = 0;
    for (size_t i = 0; i + 1 < levels.size(); ++i) {
      const Eigen::Index mi = levels[i].A.rows();
      lock_viol = std::max(
          lock_viol, (locks.middleRows(row, mi) * x - lock_rhs.segment(row, mi))
                         .lpNorm<Eigen::Infinity>());
      row += mi;
    }
  }
  sol.diag.max_lock_violation = lock_viol;

  prev_x_ = x;
  has_prev_ = true;
  return sol;
}

void HqpSolver::reset() {
  has_prev_ = false;
  prev_x_.resize(0);
}

void dump_hierarchy(const std::string& path,
                    const std::vector<TaskLevel>& levels,
                    const InequalitySet& ineq) {
  nlohmann::json doc;
  auto mat_to_json = [](const MatX& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  auto vec_to_json = [](const VecX& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
  };
  doc["levels"] = nlohmann::json::array();
  for (const TaskLevel& lvl : levels) {
    doc["levels"].push_back(
        {{"A", mat_to_json(lvl.A)}, {"b", vec_to_json(lvl.b)}});
  }
  doc["C"] = mat_to_json(ineq.C);
  doc["d"] = vec_to_json(ineq.d);
  std::ofstream out(path);
  out << doc.dump(1) << "\n";
}

}  // namespace loopwbc
