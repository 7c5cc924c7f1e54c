#pragma once

// Brute-force QP references: active-set enumeration over all subsets of the
// inequality rows, KKT-checked. Independent of the library's solver path.

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <vector>

#include "loopwbc/hqp.hpp"

namespace qp_oracles {

using loopwbc::MatX;
using loopwbc::VecX;

struct EnumResult {
  VecX x;
  double objective = std::numeric_limits<double>::infinity();
  bool found = false;
};

/// min 1/2 x'Hx + f'x s.t. A_eq x = b_eq, C x <= d by trying every subset of
/// inequality rows as the active set.
inline EnumResult enumerate_qp(const MatX& H, const VecX& f, const MatX& A_eq,
                               const VecX& b_eq, const MatX& C,
                               const VecX& d) {
  const int n = static_cast<int>(H.cols());
  const int m = static_cast<int>(C.rows());
  EnumResult best;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> act;
    for (int j = 0; j < m; ++j)
      if (mask & (1u << j)) act.push_back(j);

    const Eigen::Index me = A_eq.rows() + static_cast<Eigen::Index>(act.size());
    MatX E(me, n);
    VecX r(me);
    E.topRows(A_eq.rows()) = A_eq;
    r.head(A_eq.rows()) = b_eq;
    for (size_t k = 0; k < act.size(); ++k) {
      E.row(A_eq.rows() + static_cast<Eigen::Index>(k)) = C.row(act[k]);
      r[A_eq.rows() + static_cast<Eigen::Index>(k)] = d[act[k]];
    }

    // Rank-deficient E is handled by a particular solution plus a reduced
    // solve on its nullspace.
    VecX x(n);
    if (me > 0) {
      const VecX x_p = E.completeOrthogonalDecomposition().solve(r);
      if ((E * x_p - r).lpNorm<Eigen::Infinity>() > 1e-8) continue;
      Eigen::ColPivHouseholderQR<MatX> qr(E.transpose());
      const MatX Q = qr.householderQ();
      const MatX Z = Q.rightCols(n - qr.rank());
      if (Z.cols() > 0) {
        const MatX Hr = Z.transpose() * H * Z;
        const VecX rhs_r = -Z.transpose() * (H * x_p + f);
        const VecX y = Hr.ldlt().solve(rhs_r);
        if ((Hr * y - rhs_r).lpNorm<Eigen::Infinity>() >
            1e-10 * (1.0 + rhs_r.norm()))
          continue;
        x = x_p + Z * y;
      } else {
        x = x_p;
      }
    } else {
      x = H.ldlt().solve(-f);
      if ((H * x + f).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + f.norm()))
        continue;
    }

    // primal feasibility; the best feasible candidate over all subsets is
    // the constrained optimum of a convex QP, so no dual test is needed
    if (m > 0 && (C * x - d).maxCoeff() > 1e-8) continue;
    if (A_eq.rows() > 0 &&
        (A_eq * x - b_eq).lpNorm<Eigen::Infinity>() > 1e-8)
      continue;

    const double obj = 0.5 * x.dot(H * x) + f.dot(x);
    if (obj < best.objective) {
      best.objective = obj;
      best.x = x;
      best.found = true;
    }
  }
  return best;
}

/// Lexicographic reference: per level, enumeration with locked equalities
/// and the shared ridge regularization.
inline VecX enumerate_hierarchy(const std::vector<loopwbc::TaskLevel>& levels,
                                const loopwbc::InequalitySet& ineq,
                                double eps) {
  const int n = static_cast<int>(levels.front().A.cols());
  MatX locks(0, n);
  VecX lock_rhs(0);
  VecX x = VecX::Zero(n);
  for (const loopwbc::TaskLevel& lvl : levels) {
    const MatX H =
        2.0 * (lvl.A.transpose() * lvl.A + eps * MatX::Identity(n, n));
    const VecX f = -2.0 * lvl.A.transpose() * lvl.b;
    EnumResult r = enumerate_qp(H, f, locks, lock_rhs, ineq.C, ineq.d);
    if (!r.found) throw std::runtime_error("oracle: no KKT point");
    x = r.x;
    const Eigen::Index old_rows = locks.rows();
    locks.conservativeResize(old_rows + lvl.A.rows(), n);
    locks.bottomRows(lvl.A.rows()) = lvl.A;
    lock_rhs.conservativeResize(old_rows + lvl.A.rows());
    lock_rhs.tail(lvl.A.rows()) = lvl.A * x;
  }
  return x;
}

/// Weighted single-QP reference for lexicographic behavior. Solved in
/// stacked least-squares form (QR) to keep the large weight spread
/// numerically harmless; the inequalities are assumed slack.
inline VecX weighted_hierarchy(const std::vector<loopwbc::TaskLevel>& levels,
                               const std::vector<double>& weights,
                               double eps) {
  const int n = static_cast<int>(levels.front().A.cols());
  Eigen::Index rows = n;  // ridge block
  for (const auto& lvl : levels) rows += lvl.A.rows();
  MatX G(rows, n);
  VecX h(rows);
  Eigen::Index at = 0;
  for (size_t i = 0; i < levels.size(); ++i) {
    const double sw = std::sqrt(weights[i]);
    G.middleRows(at, levels[i].A.rows()) = sw * levels[i].A;
    h.segment(at, levels[i].A.rows()) = sw * levels[i].b;
    at += levels[i].A.rows();
  }
  G.bottomRows(n) = std::sqrt(eps) * MatX::Identity(n, n);
  h.tail(n).setZero();
  return G.colPivHouseholderQr().solve(h);
}

}  // namespace qp_oracles
