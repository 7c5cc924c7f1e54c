#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "loopwbc/errors.hpp"
#include "loopwbc/model.hpp"
#include "oracles.hpp"

using namespace loopwbc;

namespace {

std::string model_path() { return std::string(LOOPWBC_SOURCE_DIR) + "/models/ascento_like.json"; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Single free-floating box, no joints/loops/wheels: minimal dynamics probe.
RobotModel single_body_model(double mass = 2.5) {
  RobotModel m;
  Body b;
  b.name = "base";
  b.mass = mass;
  b.com = Vec3(0.0, 0.0, 0.0);
  b.inertia = Eigen::Vector3d(0.02, 0.03, 0.04).asDiagonal();
  m.bodies.push_back(b);
  m.finalize();
  return m;
}

/// Fixed-base planar 3R chain for the Lagrangian oracle (u == qdot there).
RobotModel chain3_model() {
  RobotModel m;
  m.floating = false;
  Body base;
  base.name = "base";
  base.mass = 1.0;
  base.inertia = Mat3::Identity() * 0.01;
  m.bodies.push_back(base);
  const double L = 0.3;
  int parent = 0;
  for (int i = 0; i < 3; ++i) {
    Body b;
    b.name = "link" + std::to_string(i);
    b.mass = 0.7 - 0.1 * i;
    b.com = Vec3(L / 2, 0, 0);
    b.inertia = Eigen::Vector3d(0.001, 0.004, 0.004).asDiagonal();
    m.bodies.push_back(b);
    Joint j;
    j.name = "j" + std::to_string(i);
    j.parent = parent;
    j.child = i + 1;
    j.origin_xyz = (i == 0) ? Vec3(0, 0, 0) : Vec3(L, 0, 0);
    j.axis = Vec3::UnitY();
    m.joints.push_back(j);
    parent = i + 1;
  }
  m.finalize();
  return m;
}

}  // namespace

TEST_CASE("canonical model loads with expected dimensions") {
  const RobotModel m = load_model(model_path());
  CHECK(m.n_j == 10);
  CHECK(m.n_u == 16);
  CHECK(m.n_tau == 4);
  CHECK(m.loops.size() == 2);
  CHECK(m.wheels.size() == 2);
  CHECK(m.total_mass() == doctest::Approx(10.0));
  // one 1 per row of S
  for (int i = 0; i < m.n_tau; ++i) {
    CHECK(m.S.row(i).sum() == doctest::Approx(1.0));
    CHECK(m.S.row(i).maxCoeff() == doctest::Approx(1.0));
  }
}

TEST_CASE("validation: negative mass names the body") {
  std::string text = slurp(model_path());
  const std::string needle = "\"name\": \"wheel_l\", \"mass\": 0.3";
  const auto pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, needle.size(), "\"name\": \"wheel_l\", \"mass\": -1.0");
  try {
    parse_model(text, "patched");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("wheel_l") != std::string::npos);
    CHECK(std::string(e.what()).find("mass") != std::string::npos);
  }
}

TEST_CASE("validation: exactly two loops") {
  std::string text = slurp(model_path());
  const std::string anchor = "\"loops\": [";
  const auto pos = text.find(anchor);
  REQUIRE(pos != std::string::npos);
  const std::string extra =
      "\n    {\"p_body\": \"coupler_link_l\", \"p_point\": [0,0,0], "
      "\"q_body\": \"lower_leg_l\", \"q_point\": [0,0,0]},";
  text.insert(pos + anchor.size(), extra);
  try {
    parse_model(text, "patched");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("2 loops") != std::string::npos);
  }
}

TEST_CASE("zero configuration closes both loops exactly") {
  const RobotModel m = load_model(model_path());
  const auto kin = forward_kinematics(m, GeneralizedState::zero(m));
  for (const Loop& l : m.loops) {
    const Vec3 p = kin.body[l.p_body].p + kin.body[l.p_body].R * l.p_point;
    const Vec3 q = kin.body[l.q_body].p + kin.body[l.q_body].R * l.q_point;
    CHECK((p - q).norm() < 1e-14);
  }
}

TEST_CASE("forward kinematics composes stored offsets at zero config") {
  const RobotModel m = load_model(model_path());
  const auto kin = forward_kinematics(m, GeneralizedState::zero(m));
  const int knee_l = m.joint_index("knee_l");
  CHECK((kin.joint_origin_w[knee_l] - Vec3(0.1, 0.145, -0.17320508075688776))
            .norm() < 1e-14);
  const int hub = m.body_index("wheel_l");
  CHECK((kin.body[hub].p - Vec3(0.0, 0.16, -0.34641016151377546)).norm() <
        1e-14);
}

TEST_CASE("forward kinematics is equivariant under rigid displacements") {
  const RobotModel m = load_model(model_path());
  std::mt19937 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    GeneralizedState s = oracles::random_state(m, rng);
    const auto kin = forward_kinematics(m, s);

    const Vec3 d(0.3, -0.2, 0.7);
    GeneralizedState st = s;
    st.r += d;
    const auto kt = forward_kinematics(m, st);
    for (size_t k = 0; k < m.bodies.size(); ++k) {
      CHECK((kt.body[k].p - kin.body[k].p - d).norm() < 1e-12);
    }

    const Mat3 rot = so3::exp_map(Vec3(0.4, -0.2, 0.9));
    GeneralizedState sr = s;
    sr.r = rot * s.r;
    sr.R = rot * s.R;
    const auto kr = forward_kinematics(m, sr);
    for (size_t k = 0; k < m.bodies.size(); ++k) {
      CHECK((kr.body[k].p - rot * kin.body[k].p).norm() < 1e-12);
      CHECK((kr.body[k].R - rot * kin.body[k].R).cwiseAbs().maxCoeff() <
            1e-12);
    }
  }
}

TEST_CASE("wheel hub jacobian base columns follow the floating convention") {
  const RobotModel m = load_model(model_path());
  std::mt19937 rng(22);
  const GeneralizedState s = oracles::random_state(m, rng);
  const auto kin = kinematics(m, s);
  const int hub = m.body_index("wheel_l");
  const auto J = point_jacobian(m, kin, hub, kin.body[hub].p);
  CHECK((J.leftCols<3>() - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((J.middleCols<3>(3) + so3::skew(kin.body[hub].p - s.r))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("joints off the support path contribute zero columns") {
  const RobotModel m = load_model(model_path());
  std::mt19937 rng(23);
  const GeneralizedState s = oracles::random_state(m, rng);
  const auto kin = kinematics(m, s);
  const int hub_l = m.body_index("wheel_l");
  const auto J = point_jacobian(m, kin, hub_l, kin.body[hub_l].p);
  // every right-leg joint and the left secondary chain leave the left hub
  // untouched
  for (const char* name : {"hip_r", "knee_r", "wheel_r", "shoulder_r",
                           "link_r", "shoulder_l", "link_l"}) {
    const int j = m.joint_index(name);
    CHECK(J.col(6 + j).norm() == 0.0);
  }
}

TEST_CASE("point jacobians match finite differences") {
  const RobotModel m = load_model(model_path());
  std::mt19937 rng(24);
  for (int trial = 0; trial < 25; ++trial) {
    const GeneralizedState s = oracles::random_state(m, rng);
    const auto kin = kinematics(m, s);
    for (size_t k = 0; k < m.bodies.size(); ++k) {
      const Vec3 pt_local(0.05, -0.02, 0.08);
      const Vec3 pt_w = kin.body[k].p + kin.body[k].R * pt_local;
      const auto J = point_jacobian(m, kin, static_cast<int>(k), pt_w);
      for (int dir = 0; dir < m.n_u; ++dir) {
        VecX du = VecX::Zero(m.n_u);
        du[dir] = 1.0;
        const Vec3 fd = oracles::fd_point_velocity(m, s, static_cast<int>(k),
                                                   pt_local, du);
        CHECK((J * du - fd).norm() < 1e-5 * (1.0 + fd.norm()));
      }
    }
  }
}

TEST_CASE("drift vanishes at zero velocity") {
  const RobotModel m = load_model(model_path());
  std::mt19937 rng(25);
  GeneralizedState s = oracles::random_state(m, rng);
  s.u.setZero();
  const auto kin = kinematics(m, s);
  for (size_t k = 0; k < m.bodies.size(); ++k) {
    CHECK(point_bias_accel(kin, static_cast<int>(k), kin.body[k].com).norm() ==
          0.0);
  }
}

TEST_CASE("spinning base produces centripetal drift") {
  RobotModel m = single_body_model();
  GeneralizedState s = GeneralizedState::zero(m);
  s.u.segment<3>(3) = Vec3(0, 0, 1);  // one rad/s about z
  const auto kin = kinematics(m, s);
  const Vec3 drift = point_bias_accel(kin, 0, Vec3(1, 0, 0));
  CHECK((drift - Vec3(-1, 0, 0)).norm() < 1e-14);
}

TEST_CASE("drift matches finite differences of J*u along the flow") {
  const RobotModel m = load_model(model_path());
  std::mt19937 rng(26);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    const GeneralizedState s = oracles::random_state(m, rng);
    const GeneralizedState sp = oracles::flow_const_u(m, s, h);
    const GeneralizedState sm = oracles::flow_const_u(m, s, -h);
    const auto kin = kinematics(m, s);
    const auto kp = kinematics(m, sp);
    const auto km = kinematics(m, sm);
    for (size_t k = 0; k < m.bodies.size(); ++k) {
      const Vec3 local(0.03, 0.01, -0.06);
      // velocity of the *material* point along the flow
      const Vec3 vp = kp.body[k].v + kp.body[k].omega.cross(
                                         kp.body[k].R * local +
                                         kp.body[k].p - kp.body[k].p);
      const Vec3 pw = kin.body[k].p + kin.body[k].R * local;
      auto vel_of = [&](const KinematicsCache& kc) {
        const Vec3 x = kc.body[k].p + kc.body[k].R * local;
        return Vec3(kc.body[k].v + kc.body[k].omega.cross(x - kc.body[k].p));
      };
      const Vec3 fd = (vel_of(kp) - vel_of(km)) / (2 * h);
      const Vec3 drift = point_bias_accel(kin, static_cast<int>(k), pw);
      CHECK((drift - fd).norm() < 1e-5 * (1.0 + fd.norm()));
    }
  }
}

TEST_CASE("mass matrix of a free body has the point-mass block") {
  RobotModel m = single_body_model(2.5);
  const GeneralizedState s = GeneralizedState::zero(m);
  const auto kin = kinematics(m, s);
  const MatX M = mass_matrix(m, kin);
  CHECK((M.topLeftCorner<3, 3>() - 2.5 * Mat3::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("mass matrix symmetry and kinetic-energy consistency") {
  const RobotModel m = load_model(model_path());
  std::mt19937 rng(27);
  for (int trial = 0; trial < 30; ++trial) {
    const GeneralizedState s = oracles::random_state(m, rng);
    const auto kin = kinematics(m, s);
    const MatX M = mass_matrix(m, kin);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const double T_quad = 0.5 * s.u.dot(M * s.u);
    const double T_sum = kinetic_energy(m, kin);
    CHECK(std::abs(T_quad - T_sum) < 1e-10 * (1.0 + std::abs(T_sum)));
    Eigen::SelfAdjointEigenSolver<MatX> eig(M);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("nonlinear terms: zero velocity leaves pure gravity") {
  const RobotModel m = load_model(model_path());
  std::mt19937 rng(28);
  GeneralizedState s = oracles::random_state(m, rng);
  s.u.setZero();
  const auto kin = kinematics(m, s);
  const VecX h = nonlinear_terms(m, kin);
  const VecX g = gravity_terms(m, kin);
  CHECK((h - g).norm() < 1e-12);
  // base-linear rows carry the total weight
  CHECK(h[2] == doctest::Approx(m.total_mass() * kGravity).epsilon(1e-12));
  CHECK(std::abs(h[0]) < 1e-12);
  CHECK(std::abs(h[1]) < 1e-12);
}

TEST_CASE("free fall: M udot = -(b+g) gives gravity acceleration") {
  const RobotModel m = load_model(model_path());
  std::mt19937 rng(29);
  GeneralizedState s = oracles::random_state(m, rng);
  s.u.setZero();
  const auto kin = kinematics(m, s);
  const MatX M = mass_matrix(m, kin);
  const VecX h = nonlinear_terms(m, kin);
  const VecX udot = M.llt().solve(-h);
  CHECK((udot.head<3>() - Vec3(0, 0, -kGravity)).norm() < 1e-9);
  CHECK(udot.tail(m.n_j + 3).norm() < 1e-9);
}

TEST_CASE("nonlinear terms match a finite-difference Lagrangian") {
  // Fixed-base chain, so u == qdot and the classic Euler-Lagrange form
  // applies without quasi-velocity corrections.
  const RobotModel m = chain3_model();
  std::mt19937 rng(30);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const double h = 1e-5;

  auto T_of = [&](const VecX& phi, const VecX& u) {
    GeneralizedState s = GeneralizedState::zero(m);
    s.phi = phi;
    s.u = u;
    return kinetic_energy(m, kinematics(m, s));
  };
  auto V_of = [&](const VecX& phi) {
    GeneralizedState s = GeneralizedState::zero(m);
    s.phi = phi;
    return potential_energy(m, forward_kinematics(m, s));
  };

  for (int trial = 0; trial < 10; ++trial) {
    VecX phi(3), u(3);
    for (int i = 0; i < 3; ++i) {
      phi[i] = d(rng);
      u[i] = d(rng);
    }
    GeneralizedState s = GeneralizedState::zero(m);
    s.phi = phi;
    s.u = u;
    const VecX bg = nonlinear_terms(m, kinematics(m, s));

    for (int i = 0; i < 3; ++i) {
      // d/dt (dT/du_i) along the flow with udot = 0
      auto dT_du = [&](const VecX& p, const VecX& v) {
        VecX vp = v, vm = v;
        vp[i] += h;
        vm[i] -= h;
        return (T_of(p, vp) - T_of(p, vm)) / (2 * h);
      };
      const double ddt = (dT_du(phi + h * u, u) - dT_du(phi - h * u, u)) /
                         (2 * h);
      VecX pp = phi, pm = phi;
      pp[i] += h;
      pm[i] -= h;
      const double dT_dq = (T_of(pp, u) - T_of(pm, u)) / (2 * h);
      const double dV_dq = (V_of(pp) - V_of(pm)) / (2 * h);
      const double lagr = ddt - dT_dq + dV_dq;
      CHECK(std::abs(bg[i] - lagr) < 1e-5 * (1.0 + std::abs(lagr)));
    }
  }
}

TEST_CASE("spring torques") {
  const RobotModel m = load_model(model_path());
  GeneralizedState s = GeneralizedState::zero(m);
  const int knee_l = m.joint_index("knee_l");
  const int knee_r = m.joint_index("knee_r");
  const double rest = m.springs[0].rest_angle;
  s.phi[knee_l] = rest;
  s.phi[knee_r] = rest;
  CHECK(spring_torques(m, s).norm() == 0.0);

  s.phi[knee_r] = rest - 1.0;  // park the other knee away from rest
  s.phi[knee_l] = rest + 0.1;
  const VecX sv = spring_torques(m, s);
  CHECK(sv[6 + knee_l] == doctest::Approx(2.0));

  // potential gradient consistency
  const double h = 1e-6;
  GeneralizedState sp = s, sm = s;
  sp.phi[knee_l] += h;
  sm.phi[knee_l] -= h;
  const double fd = (spring_energy(m, sp) - spring_energy(m, sm)) / (2 * h);
  CHECK(std::abs(sv[6 + knee_l] - fd) < 1e-8);
}
