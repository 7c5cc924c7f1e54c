#pragma once

#include <string>
#include <vector>

#include "loopwbc/terrain.hpp"
#include "loopwbc/wbc.hpp"

namespace loopwbc {

/// Piecewise-linear reference timeline: sorted (time, value) knots, held
/// constant outside the covered range.
struct Timeline {
  std::vector<std::pair<double, double>> knots;

  double at(double t) const;
  double rate(double t) const;
  bool empty() const { return knots.empty(); }
};

struct Disturbance {
  double time = 0.0;
  Vec3 impulse = Vec3::Zero();      // N*s, inertial frame
  Vec3 point_local = Vec3::Zero();  // application point in the base frame
  bool applied = false;
};

/// Triangle-wave height motion of one terrain patch.
struct PatchMotion {
  int patch = 0;
  double amplitude = 0.0;  // peak height, m
  double frequency = 0.0;  // Hz
  double start = 0.0;      // s

  double height(double t) const;
  double rate(double t) const;
};

struct Scenario {
  std::string name;
  std::string model_path;
  double duration = 5.0;
  double dt = 5e-4;
  double controller_period = 2.5e-3;
  double initial_yaw = 0.0;
  Timeline velocity_ref;
  Timeline yaw_rate_ref;
  Timeline height_ref;  // empty: hold the standing height
  Timeline roll_ref;
  WbcConfig controller;
  std::vector<Disturbance> disturbances;
  Terrain terrain;
  std::vector<PatchMotion> motions;
  std::string output_path;

  void validate() const;  // throws ValidationError
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text,
                        const std::string& origin);

}  // namespace loopwbc
