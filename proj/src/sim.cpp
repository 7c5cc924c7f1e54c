#include "loopwbc/sim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "loopwbc/errors.hpp"
#include "loopwbc/logging.hpp"

namespace loopwbc {

GeneralizedState integrate_step(const RobotModel& model,
                                const GeneralizedState& state, const VecX& tau,
                                double dt, const std::vector<Vec3>& normals) {
  const DynamicsTerms dyn = compute_dynamics_terms(model, state, normals);
  const VecX udot = forward_dynamics(model, dyn, tau);
  GeneralizedState next = state;
  next.u = state.u + udot * dt;
  if (model.floating) {
    next.r = state.r + next.u.head<3>() * dt;
    next.R = so3::project_rotation(
        so3::exp_map(next.u.segment<3>(3) * dt) * state.R);
  }
  next.phi = state.phi + next.u.tail(model.n_j) * dt;

  const auto kin = kinematics(model, next);
  if (kinetic_energy(model, kin) > 1e6)
    throw EnergyBlowup("kinetic energy above 1e6 J");
  return next;
}

int SimLog::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw ValidationError("no log column named '" + name + "'");
}

double SimLog::value(size_t row, const std::string& name) const {
  return rows.at(row)[static_cast<size_t>(column(name))];
}

std::vector<double> SimLog::series(const std::string& name) const {
  const int c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[static_cast<size_t>(c)]);
  return out;
}

void SimLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file '" + path + "'");
  for (size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  char buf[40];
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
}

std::string SimSummary::to_json() const {
  char buf[1024];
  std::snprintf(
      buf, sizeof(buf),
      "{\"success\": %s, \"failure_reason\": \"%s\", \"failure_time\": %.6g, "
      "\"duration\": %.6g, \"max_abs_pitch\": %.6g, \"max_loop_gap\": %.6g, "
      "\"max_rolling_residual\": %.6g, \"max_accel_residual\": %.6g, "
      "\"max_closed_loop_radius\": %.9g, \"mean_control_seconds\": %.6g}",
      success ? "true" : "false", failure_reason.c_str(), failure_time,
      duration, max_abs_pitch, max_loop_gap, max_rolling_residual,
      max_accel_residual, max_closed_loop_radius, mean_control_seconds);
  return buf;
}

namespace {

std::vector<std::string> build_header(const RobotModel& model) {
  std::vector<std::string> h = {"t",      "base_x", "base_y", "base_z",
                                "quat_w", "quat_x", "quat_y", "quat_z"};
  for (const Joint& j : model.joints) h.push_back("q_" + j.name);
  h.insert(h.end(), {"u_vx", "u_vy", "u_vz", "u_wx", "u_wy", "u_wz"});
  for (const Joint& j : model.joints) h.push_back("u_" + j.name);
  for (int a : model.actuated_joints)
    h.push_back("tau_" + model.joints[a].name);
  h.insert(h.end(), {"F_L_l_x", "F_L_l_z", "F_L_r_x", "F_L_r_z", "F_C_l_x",
                     "F_C_l_z", "F_C_r_x", "F_C_r_z", "sigma_l", "sigma_r",
                     "theta", "v", "psi", "zmp_y"});
  for (int i = 1; i <= 6; ++i)
    h.push_back("task_residual_" + std::to_string(i));
  h.insert(h.end(),
           {"loop_gap", "rolling_residual", "kinetic_energy",
            "potential_energy", "spring_energy", "total_energy"});
  return h;
}

}  // namespace

SimResult run_scenario(const Scenario& scenario) {
  scenario.validate();
  const RobotModel model = load_model(scenario.model_path);

  Terrain terrain = scenario.terrain;
  const std::vector<double> base_heights = [&] {
    std::vector<double> h;
    for (const TerrainPatch& p : terrain.patches) h.push_back(p.height);
    return h;
  }();

  // standing start, rotated to the requested heading
  const double spawn_height = terrain.query(0.0, 0.0).height;
  StandingState stand = find_standing_state(model, spawn_height);
  GeneralizedState state = stand.state;
  if (std::abs(scenario.initial_yaw) > 0.0) {
    const Mat3 rz =
        Eigen::AngleAxisd(scenario.initial_yaw, Vec3::UnitZ())
            .toRotationMatrix();
    state.r = rz * state.r;
    state.R = rz * state.R;
  }
  const double standing_height = [&] {
    const auto kin = forward_kinematics(model, state);
    Vec3 g = Vec3::Zero();
    for (size_t w = 0; w < model.wheels.size(); ++w)
      g += contact_geometry(model, kin, static_cast<int>(w),
                            terrain.patches[0].normal)
               .contact_point;
    g /= static_cast<double>(model.wheels.size());
    return (state.r - g).z();
  }();

  WbcConfig wbc_config = scenario.controller;
  wbc_config.period = scenario.controller_period;
  WholeBodyController wbc(model, wbc_config);
  wbc.set_yaw_target(scenario.initial_yaw);

  const int steps =
      static_cast<int>(std::llround(scenario.duration / scenario.dt));
  const int control_every = static_cast<int>(
      std::llround(scenario.controller_period / scenario.dt));

  SimResult result;
  result.log.header = build_header(model);
  result.summary.duration = scenario.duration;

  auto normals_at = [&](const GeneralizedState& st) {
    const auto kin = forward_kinematics(model, st);
    std::vector<Vec3> normals;
    std::vector<int> patches;
    for (const Wheel& w : model.wheels) {
      const Vec3 hub = kin.body[w.body].p;
      const TerrainSample s = terrain.query(hub.x(), hub.y());
      normals.push_back(s.normal);
      patches.push_back(s.patch);
    }
    return std::make_pair(normals, patches);
  };

  VecX tau = stand.tau;
  WbcDecision decision;
  std::vector<Disturbance> disturbances = scenario.disturbances;
  std::vector<double> motion_rates(scenario.motions.size(), 0.0);
  double control_time_total = 0.0;
  int control_count = 0;

  try {
    for (int i = 0; i < steps; ++i) {
      const double t = i * scenario.dt;

      // terrain motion: update heights; a rate flip is an impulsive event
      bool rate_flip = false;
      for (size_t mi = 0; mi < scenario.motions.size(); ++mi) {
        const PatchMotion& m = scenario.motions[mi];
        terrain.patches[m.patch].height =
            base_heights[m.patch] + m.height(t);
        const double r = m.rate(t);
        if (std::abs(r - motion_rates[mi]) > 1e-12) {
          rate_flip = true;
          motion_rates[mi] = r;
        }
      }

      auto [normals, patch_of_wheel] = normals_at(state);

      if (rate_flip) {
        // project the velocity so the contact rows follow the new ground
        // rate while the loop rows stay untouched
        const DynamicsTerms dyn = compute_dynamics_terms(model, state, normals);
        VecX target = dyn.cons.W * state.u;
        for (size_t w = 0; w < model.wheels.size(); ++w) {
          double rate = 0.0;
          for (size_t mi = 0; mi < scenario.motions.size(); ++mi) {
            if (scenario.motions[mi].patch == patch_of_wheel[w])
              rate = motion_rates[mi];
          }
          const Eigen::Index z_row =
              2 * static_cast<Eigen::Index>(model.loops.size()) + 2 * w + 1;
          target[z_row] = rate * normals[w].z();
        }
        state.u = constrained_velocity(model, dyn, state.u, target);
      }

      // impulsive disturbances
      for (Disturbance& d : disturbances) {
        if (!d.applied && t + 1e-12 >= d.time) {
          const DynamicsTerms dyn =
              compute_dynamics_terms(model, state, normals);
          const Vec3 point_w = state.r + state.R * d.point_local;
          const Mat3X J = point_jacobian(model, dyn.kin, 0, point_w);
          state.u += dyn.M_llt.solve(J.transpose() * d.impulse);
          d.applied = true;
          log::info("applied impulse at t = " + std::to_string(t));
        }
      }

      const DynamicsTerms dyn = compute_dynamics_terms(model, state, normals);

      if (i % control_every == 0) {
        References refs;
        refs.height = scenario.height_ref.empty()
                          ? standing_height
                          : scenario.height_ref.at(t);
        refs.height_rate = scenario.height_ref.rate(t);
        refs.velocity = scenario.velocity_ref.at(t);
        refs.yaw_rate = scenario.yaw_rate_ref.at(t);
        refs.roll = scenario.roll_ref.at(t);
        const auto c0 = std::chrono::steady_clock::now();
        decision = wbc.step(state, normals, refs);
        const auto c1 = std::chrono::steady_clock::now();
        control_time_total += std::chrono::duration<double>(c1 - c0).count();
        ++control_count;
        tau = decision.tau;
        if (std::abs(decision.pitch) > 0.5)
          throw ScenarioFailed("fell over (|pitch| > 0.5 rad)");
      }

      const ConstraintForces forces = solve_constraint_forces(model, dyn, tau);
      VecX F_all(8);
      F_all << forces.F_L, forces.F_C;
      const VecX udot = dyn.M_llt.solve(
          VecX(model.S.transpose() * tau - dyn.h - dyn.s -
               dyn.cons.J.transpose() * F_all));
      result.summary.max_accel_residual =
          std::max(result.summary.max_accel_residual,
                   (dyn.cons.V_u + dyn.cons.W * udot).lpNorm<Eigen::Infinity>());
      result.summary.max_loop_gap = std::max(
          result.summary.max_loop_gap, dyn.cons.loop_gap.lpNorm<Eigen::Infinity>());
      result.summary.max_rolling_residual =
          std::max(result.summary.max_rolling_residual,
                   (dyn.cons.J_A * state.u).lpNorm<Eigen::Infinity>());
      result.summary.max_abs_pitch =
          std::max(result.summary.max_abs_pitch, std::abs(decision.pitch));

      if (i % control_every == 0) {
        std::vector<double> row;
        row.reserve(result.log.header.size());
        row.push_back(t);
        row.push_back(state.r.x());
        row.push_back(state.r.y());
        row.push_back(state.r.z());
        Eigen::Quaterniond q(state.R);
        if (q.w() < 0.0) q.coeffs() *= -1.0;
        row.insert(row.end(), {q.w(), q.x(), q.y(), q.z()});
        for (int j = 0; j < model.n_j; ++j) row.push_back(state.phi[j]);
        for (int j = 0; j < model.n_u; ++j) row.push_back(state.u[j]);
        for (int a = 0; a < model.n_tau; ++a) row.push_back(tau[a]);
        for (int j = 0; j < 4; ++j) row.push_back(forces.F_L[j]);
        for (int j = 0; j < 4; ++j) row.push_back(forces.F_C[j]);
        row.push_back(dyn.cons.contact[0].sigma);
        row.push_back(dyn.cons.contact[1].sigma);
        row.push_back(decision.pitch);
        row.push_back(decision.velocity);
        row.push_back(decision.roll);
        row.push_back(decision.zmp_offset);
        for (int l = 0; l < 6; ++l)
          row.push_back(decision.held || decision.task_residuals.empty()
                            ? 0.0
                            : decision.task_residuals[static_cast<size_t>(l)]);
        row.push_back(dyn.cons.loop_gap.lpNorm<Eigen::Infinity>());
        row.push_back((dyn.cons.J_A * state.u).lpNorm<Eigen::Infinity>());
        const double T = kinetic_energy(model, dyn.kin);
        const double V = potential_energy(model, dyn.kin);
        const double Vs = spring_energy(model, state);
        row.insert(row.end(), {T, V, Vs, T + V + Vs});
        result.log.rows.push_back(std::move(row));
      }

      // semi-implicit update reusing the computed acceleration
      state.u += udot * scenario.dt;
      state.r += state.u.head<3>() * scenario.dt;
      state.R = so3::project_rotation(
          so3::exp_map(state.u.segment<3>(3) * scenario.dt) * state.R);
      state.phi += state.u.tail(model.n_j) * scenario.dt;
      if (0.5 * state.u.dot(dyn.M * state.u) > 1e6)
        throw EnergyBlowup("kinetic energy above 1e6 J");
    }
  } catch (const Error& e) {
    result.summary.success = false;
    result.summary.failure_reason = e.what();
    result.summary.failure_time =
        static_cast<double>(result.log.rows.size()) *
        scenario.controller_period;
    log::error("scenario failed: " + std::string(e.what()));
  }

  result.summary.max_closed_loop_radius = wbc.max_closed_loop_radius();
  result.summary.mean_control_seconds =
      control_count > 0 ? control_time_total / control_count : 0.0;

  if (!scenario.output_path.empty()) {
    result.log.write_csv(scenario.output_path);
    log::info("wrote " + std::to_string(result.log.rows.size()) +
              " rows to " + scenario.output_path);
  }
  return result;
}

}  // namespace loopwbc
