#pragma once

// Test-only reference computations, independent of the library paths they
// check: series matrix exponential, finite differences, RK4 flow, tiny
// in-code models.

#include <Eigen/Dense>
#include <functional>
#include <random>

#include "loopwbc/constraints.hpp"
#include "loopwbc/model.hpp"

namespace oracles {

using loopwbc::GeneralizedState;
using loopwbc::Mat3;
using loopwbc::MatX;
using loopwbc::RobotModel;
using loopwbc::Vec3;
using loopwbc::VecX;

/// Truncated-series matrix exponential, 25 terms.
inline MatX expm_series(const MatX& a) {
  MatX result = MatX::Identity(a.rows(), a.cols());
  MatX term = result;
  for (int k = 1; k <= 25; ++k) {
    term = (term * a) / static_cast<double>(k);
    result += term;
  }
  return result;
}

/// q perturbed along u*h (base position/orientation/joints consistently).
inline GeneralizedState perturb(const RobotModel& model,
                                const GeneralizedState& s, const VecX& du,
                                double h) {
  GeneralizedState out = s;
  if (model.floating) {
    out.r = s.r + du.head<3>() * h;
    out.R = loopwbc::so3::exp_map(du.segment<3>(3) * h) * s.R;
  }
  out.phi = s.phi + du.tail(model.n_j) * h;
  return out;
}

/// Central finite-difference velocity of a world point under coordinate flow
/// direction du.
inline Vec3 fd_point_velocity(const RobotModel& model,
                              const GeneralizedState& s, int body,
                              const Vec3& point_local, const VecX& du,
                              double h = 1e-7) {
  const auto kp = loopwbc::forward_kinematics(model, perturb(model, s, du, h));
  const auto km = loopwbc::forward_kinematics(model, perturb(model, s, du, -h));
  const Vec3 xp = kp.body[body].p + kp.body[body].R * point_local;
  const Vec3 xm = km.body[body].p + km.body[body].R * point_local;
  return (xp - xm) / (2.0 * h);
}

/// Fixed-u flow: advances the state by dt holding u constant.
inline GeneralizedState flow_const_u(const RobotModel& model,
                                     const GeneralizedState& s, double dt) {
  GeneralizedState out = perturb(model, s, s.u, dt);
  out.u = s.u;
  return out;
}

struct Rk4Step {
  // One RK4 step of the constrained dynamics (test-only reference
  // integrator; high accuracy for energy-balance checks).
  static GeneralizedState advance(const RobotModel& model,
                                  const GeneralizedState& s, const VecX& tau,
                                  const std::vector<Vec3>& normals,
                                  double dt) {
    auto deriv = [&](const GeneralizedState& x) {
      return loopwbc::forward_dynamics(model, x, tau, normals);
    };
    auto stage = [&](const VecX& u_slope, const VecX& k, double a) {
      GeneralizedState y = perturb(model, s, u_slope, a);
      y.u = s.u + a * k;
      return y;
    };
    const VecX u1 = s.u;
    const VecX k1 = deriv(s);
    const GeneralizedState s2 = stage(u1, k1, dt / 2);
    const VecX u2 = s2.u;
    const VecX k2 = deriv(s2);
    const GeneralizedState s3 = stage(u2, k2, dt / 2);
    const VecX u3 = s3.u;
    const VecX k3 = deriv(s3);
    const GeneralizedState s4 = stage(u3, k3, dt);
    const VecX u4 = s4.u;
    const VecX k4 = deriv(s4);

    GeneralizedState out =
        perturb(model, s, (u1 + 2.0 * u2 + 2.0 * u3 + u4) / 6.0, dt);
    out.u = s.u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    return out;
  }
};

/// Random generalized state for the canonical model: bounded base pose,
/// joint angles and rates.
inline GeneralizedState random_state(const RobotModel& model,
                                     std::mt19937& rng,
                                     double angle_range = 0.4,
                                     double rate_range = 1.0) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  GeneralizedState s = GeneralizedState::zero(model);
  if (model.floating) {
    s.r = Vec3(dist(rng), dist(rng), 0.5 + 0.2 * dist(rng));
    s.R = loopwbc::so3::exp_map(
        Vec3(dist(rng), dist(rng), dist(rng)) * 0.3);
  }
  for (int j = 0; j < model.n_j; ++j) s.phi[j] = angle_range * dist(rng);
  for (int i = 0; i < model.n_u; ++i) s.u[i] = rate_range * dist(rng);
  return s;
}

/// Two-loop parallelogram linkage on a fixed base; every loop reduces to a
/// one-DoF pendulum with constant effective inertia.
inline RobotModel parallelogram_model() {
  RobotModel m;
  m.floating = false;

  auto rod = [](const std::string& name, double mass, const Vec3& com,
                double length) {
    loopwbc::Body b;
    b.name = name;
    b.mass = mass;
    b.com = com;
    const double i_rod = mass * length * length / 12.0;
    b.inertia = Eigen::Vector3d(i_rod, i_rod, 0.1 * i_rod).asDiagonal();
    return b;
  };

  loopwbc::Body base;
  base.name = "base";
  base.mass = 1.0;
  base.inertia = Mat3::Identity() * 0.01;
  m.bodies.push_back(base);

  const double L = 0.15;   // crank/rocker length
  const double D = 0.1;    // base link length
  for (const std::string side : {"l", "r"}) {
    const double y = side == "l" ? 0.1 : -0.1;
    const int crank = static_cast<int>(m.bodies.size());
    m.bodies.push_back(rod("crank_" + side, 0.4, Vec3(0, 0, -L / 2), L));
    const int coupler = static_cast<int>(m.bodies.size());
    m.bodies.push_back(rod("coupler_" + side, 0.3, Vec3(D / 2, 0, 0), D));
    const int rocker = static_cast<int>(m.bodies.size());
    m.bodies.push_back(rod("rocker_" + side, 0.2, Vec3(0, 0, -L / 2), L));

    loopwbc::Joint ja;  // base -> crank
    ja.name = "crank_" + side;
    ja.parent = 0;
    ja.child = crank;
    ja.origin_xyz = Vec3(0, y, 0);
    ja.axis = Vec3::UnitY();
    m.joints.push_back(ja);

    loopwbc::Joint jb;  // crank -> coupler
    jb.name = "coupler_" + side;
    jb.parent = crank;
    jb.child = coupler;
    jb.origin_xyz = Vec3(0, 0, -L);
    jb.axis = Vec3::UnitY();
    m.joints.push_back(jb);

    loopwbc::Joint jd;  // base -> rocker
    jd.name = "rocker_" + side;
    jd.parent = 0;
    jd.child = rocker;
    jd.origin_xyz = Vec3(D, y, 0);
    jd.axis = Vec3::UnitY();
    m.joints.push_back(jd);

    loopwbc::Loop loop;
    loop.p_body = rocker;
    loop.p_point = Vec3(0, 0, -L);
    loop.q_body = coupler;
    loop.q_point = Vec3(D, 0, 0);
    m.loops.push_back(loop);
  }
  m.finalize();
  return m;
}

/// Minimal-coordinate pendulum parameters equivalent to one parallelogram
/// loop of parallelogram_model().
struct ParallelogramOracle {
  double inertia;  // about the crank pivot
  double moment;   // gravity moment coefficient: V = -moment * cos(alpha)

  ParallelogramOracle() {
    const double L = 0.15;
    const double m_crank = 0.4, m_coupler = 0.3, m_rocker = 0.2;
    const double i_rod_crank = m_crank * L * L / 12.0;
    const double i_rod_rocker = m_rocker * L * L / 12.0;
    inertia = i_rod_crank + m_crank * (L / 2) * (L / 2) + i_rod_rocker +
              m_rocker * (L / 2) * (L / 2) + m_coupler * L * L;
    moment = loopwbc::kGravity *
             (m_crank * L / 2 + m_coupler * L + m_rocker * L / 2);
  }

  double accel(double alpha) const { return -moment / inertia * std::sin(alpha); }

  /// Semi-implicit Euler, matching the simulator's update exactly.
  void step(double& alpha, double& alpha_dot, double dt) const {
    alpha_dot += accel(alpha) * dt;
    alpha += alpha_dot * dt;
  }
};

}  // namespace oracles
