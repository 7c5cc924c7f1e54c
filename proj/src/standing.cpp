#include "loopwbc/standing.hpp"

#include <cmath>

#include "loopwbc/errors.hpp"
#include "loopwbc/logging.hpp"

namespace loopwbc {

StaticBalance static_balance(const RobotModel& model,
                             const DynamicsTerms& dyn) {
  const int n_f = dyn.cons.rows();
  MatX A(model.n_u, model.n_tau + n_f);
  A << model.S.transpose(), -dyn.cons.J.transpose();
  const VecX rhs = dyn.h + dyn.s;
  const VecX sol = A.colPivHouseholderQr().solve(rhs);
  StaticBalance out;
  out.tau = sol.head(model.n_tau);
  out.forces = sol.tail(n_f);
  out.residual = (A * sol - rhs).norm();
  return out;
}

namespace {

Vec3 contact_midpoint(const RobotModel& model, const GeneralizedState& st) {
  const auto kin = forward_kinematics(model, st);
  Vec3 mean = Vec3::Zero();
  for (size_t w = 0; w < model.wheels.size(); ++w) {
    mean += contact_geometry(model, kin, static_cast<int>(w), Vec3::UnitZ())
                .contact_point;
  }
  return mean / static_cast<double>(model.wheels.size());
}

/// Gauss-Newton on the in-plane loop gaps over the passive joints.
void close_loops(const RobotModel& model, GeneralizedState& st) {
  std::vector<int> passive;
  for (int j = 0; j < model.n_j; ++j) {
    bool actuated = false;
    for (int a : model.actuated_joints) actuated |= (a == j);
    if (!actuated) passive.push_back(j);
  }
  for (int it = 0; it < 50; ++it) {
    const auto kin = forward_kinematics(model, st);
    const int n_rows = 2 * static_cast<int>(model.loops.size());
    VecX gap(n_rows);
    MatX Jgap(n_rows, static_cast<int>(passive.size()));
    const Mat3 R_BI = kin.body[0].R.transpose();
    for (size_t l = 0; l < model.loops.size(); ++l) {
      const Loop& loop = model.loops[l];
      const Vec3 p =
          kin.body[loop.p_body].p + kin.body[loop.p_body].R * loop.p_point;
      const Vec3 q =
          kin.body[loop.q_body].p + kin.body[loop.q_body].R * loop.q_point;
      const Vec3 g = R_BI * (q - p);
      gap[2 * l] = g.x();
      gap[2 * l + 1] = g.z();
      const Mat3X Jrel = R_BI * (point_jacobian(model, kin, loop.q_body, q) -
                                 point_jacobian(model, kin, loop.p_body, p));
      for (size_t c = 0; c < passive.size(); ++c) {
        Jgap(2 * l, static_cast<int>(c)) =
            Jrel(0, model.vel_offset + passive[c]);
        Jgap(2 * l + 1, static_cast<int>(c)) =
            Jrel(2, model.vel_offset + passive[c]);
      }
    }
    if (gap.lpNorm<Eigen::Infinity>() < 1e-13) return;
    // minimum-norm correction, keeps the posture close
    const VecX dq =
        Jgap.completeOrthogonalDecomposition().solve(VecX(-gap));
    for (size_t c = 0; c < passive.size(); ++c)
      st.phi[passive[c]] += dq[static_cast<int>(c)];
  }
  throw NoConvergence("loop closure projection did not converge");
}

}  // namespace

StandingState find_standing_state(const RobotModel& model,
                                  double contact_height, double tol,
                                  int max_iters) {
  const std::vector<Vec3> normals(model.wheels.size(), Vec3::UnitZ());
  GeneralizedState s = GeneralizedState::zero(model);
  close_loops(model, s);
  s.r.z() += contact_height - contact_midpoint(model, s).z();

  auto free_basis = [&](const DynamicsTerms& dyn) {
    // Unactuated constraint-compatible directions: null([W; S]).
    MatX WS(dyn.cons.W.rows() + model.n_tau, model.n_u);
    WS << dyn.cons.W, model.S;
    Eigen::JacobiSVD<MatX> svd(WS, Eigen::ComputeFullV);
    const int n_free = model.n_u - static_cast<int>(svd.rank());
    if (n_free <= 0)
      throw NoConvergence("no free directions but nonzero static residual");
    return MatX(svd.matrixV().rightCols(n_free));
  };
  // Displacement followed by projection back onto the manifold (loops
  // closed, contacts at ground height). The projection carries the
  // second-order path terms the reduced Hessian needs.
  auto displaced = [&](const GeneralizedState& from, const VecX& du) {
    GeneralizedState trial = from;
    if (model.floating) {
      trial.r += du.head<3>();
      trial.R =
          so3::project_rotation(so3::exp_map(du.segment<3>(3)) * trial.R);
    }
    trial.phi += du.tail(model.n_j);
    close_loops(model, trial);
    trial.r.z() += contact_height - contact_midpoint(model, trial).z();
    return trial;
  };
  // Unreachable part of the static balance as a basis-free residual map;
  // its zero is the spring-loaded equilibrium.
  auto residual_at = [&](const GeneralizedState& st) {
    const DynamicsTerms dyn = compute_dynamics_terms(model, st, normals);
    const int n_f = dyn.cons.rows();
    MatX A(model.n_u, model.n_tau + n_f);
    A << model.S.transpose(), -dyn.cons.J.transpose();
    const VecX rhs = dyn.h + dyn.s;
    return VecX(A * A.colPivHouseholderQr().solve(rhs) - rhs);
  };

  double best_residual = 1e300;
  int stalled = 0;
  for (int it = 0; it < max_iters; ++it) {
    const DynamicsTerms dyn = compute_dynamics_terms(model, s, normals);
    const StaticBalance bal = static_balance(model, dyn);
    if (bal.residual < best_residual * 0.5) {
      best_residual = bal.residual;
      stalled = 0;
    } else {
      ++stalled;
    }
    log::debug("standing search it " + std::to_string(it) + " residual " +
               std::to_string(bal.residual));
    if (bal.residual < tol || (stalled >= 3 && bal.residual < 1e-8)) {
      s.r.x() -= contact_midpoint(model, s).x();
      s.r.y() -= contact_midpoint(model, s).y();
      StandingState out;
      out.state = s;
      out.tau = bal.tau;
      log::info("standing state found after " + std::to_string(it) +
                " steps, residual " + std::to_string(bal.residual));
      return out;
    }

    // Gauss-Newton on the residual map along the free directions.
    const MatX N = free_basis(dyn);
    const int n_free = static_cast<int>(N.cols());
    const VecX r0 = residual_at(s);
    const double fd = 1e-6;
    MatX Jr(model.n_u, n_free);
    for (int c = 0; c < n_free; ++c) {
      const VecX rp = residual_at(displaced(s, fd * N.col(c)));
      const VecX rm = residual_at(displaced(s, -fd * N.col(c)));
      Jr.col(c) = (rp - rm) / (2 * fd);
    }
    Eigen::JacobiSVD<MatX> jsvd(Jr, Eigen::ComputeThinU | Eigen::ComputeThinV);
    VecX dx = VecX::Zero(n_free);
    const double smax = jsvd.singularValues().maxCoeff();
    for (int c = 0; c < n_free; ++c) {
      const double sv = jsvd.singularValues()[c];
      if (sv > 1e-5 * smax)
        dx += jsvd.matrixV().col(c) * (-jsvd.matrixU().col(c).dot(r0) / sv);
    }
    const double max_step = 0.05;
    const double scale = dx.lpNorm<Eigen::Infinity>();
    if (scale > max_step) dx *= max_step / scale;

    double alpha = 1.0;
    for (int bt = 0; bt < 8; ++bt) {
      GeneralizedState trial = displaced(s, alpha * (N * dx));
      if (residual_at(trial).norm() < r0.norm()) {
        s = trial;
        break;
      }
      alpha *= 0.5;
    }
  }
  throw NoConvergence("standing-state search did not settle");
}

}  // namespace loopwbc
