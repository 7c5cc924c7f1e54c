#include "loopwbc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "loopwbc/errors.hpp"

namespace loopwbc {

double Timeline::at(double t) const {
  if (knots.empty()) return 0.0;
  if (t <= knots.front().first) return knots.front().second;
  if (t >= knots.back().first) return knots.back().second;
  for (size_t i = 1; i < knots.size(); ++i) {
    if (t <= knots[i].first) {
      const auto& [t0, v0] = knots[i - 1];
      const auto& [t1, v1] = knots[i];
      const double w = (t - t0) / (t1 - t0);
      return v0 + w * (v1 - v0);
    }
  }
  return knots.back().second;
}

double Timeline::rate(double t) const {
  if (knots.size() < 2) return 0.0;
  if (t < knots.front().first || t > knots.back().first) return 0.0;
  for (size_t i = 1; i < knots.size(); ++i) {
    if (t <= knots[i].first) {
      const auto& [t0, v0] = knots[i - 1];
      const auto& [t1, v1] = knots[i];
      return (v1 - v0) / (t1 - t0);
    }
  }
  return 0.0;
}

double PatchMotion::height(double t) const {
  if (t <= start || frequency <= 0.0) return 0.0;
  const double phase = std::fmod((t - start) * frequency, 1.0);
  return amplitude * (phase < 0.5 ? 2.0 * phase : 2.0 * (1.0 - phase));
}

double PatchMotion::rate(double t) const {
  if (t <= start || frequency <= 0.0) return 0.0;
  const double phase = std::fmod((t - start) * frequency, 1.0);
  return (phase < 0.5 ? 1.0 : -1.0) * 2.0 * amplitude * frequency;
}

void Scenario::validate() const {
  if (duration <= 0.0) throw ValidationError("duration must be > 0");
  if (dt <= 0.0) throw ValidationError("dt must be > 0");
  if (dt > controller_period + 1e-15)
    throw ValidationError("dt must not exceed the controller period");
  const double ratio = controller_period / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw ValidationError(
        "controller period must be an integer multiple of dt");
  for (const PatchMotion& m : motions) {
    if (m.patch < 0 || m.patch >= static_cast<int>(terrain.patches.size()))
      throw ValidationError("patch motion refers to unknown patch");
  }
}

namespace {

using nlohmann::json;

Timeline read_timeline(const json& j, const std::string& where) {
  Timeline tl;
  for (const json& knot : j) {
    if (!knot.is_array() || knot.size() != 2)
      throw ParseError(where + ": timeline knots are [t, value] pairs");
    tl.knots.emplace_back(knot[0].get<double>(), knot[1].get<double>());
  }
  for (size_t i = 1; i < tl.knots.size(); ++i) {
    if (tl.knots[i].first <= tl.knots[i - 1].first)
      throw ValidationError(where + ": timeline times must increase");
  }
  return tl;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }

  Scenario sc;
  try {
    sc.name = doc.value("name", "scenario");
    sc.model_path = doc.at("model").get<std::string>();
    sc.duration = doc.at("duration").get<double>();
    sc.dt = doc.value("dt", 5e-4);
    sc.controller_period = doc.value("controller_period", 2.5e-3);
    sc.initial_yaw = doc.value("initial_yaw", 0.0);
    sc.output_path = doc.value("output", "");

    if (doc.contains("references")) {
      const json& r = doc["references"];
      if (r.contains("velocity"))
        sc.velocity_ref = read_timeline(r["velocity"], "velocity");
      if (r.contains("yaw_rate"))
        sc.yaw_rate_ref = read_timeline(r["yaw_rate"], "yaw_rate");
      if (r.contains("height"))
        sc.height_ref = read_timeline(r["height"], "height");
      if (r.contains("roll")) sc.roll_ref = read_timeline(r["roll"], "roll");
    }

    if (doc.contains("controller")) {
      const json& c = doc["controller"];
      sc.controller.period = sc.controller_period;
      if (c.contains("gains")) {
        const json& g = c["gains"];
        sc.controller.gains.height_kp =
            g.value("height_kp", sc.controller.gains.height_kp);
        sc.controller.gains.height_kd =
            g.value("height_kd", sc.controller.gains.height_kd);
        sc.controller.gains.roll_kp =
            g.value("roll_kp", sc.controller.gains.roll_kp);
        sc.controller.gains.roll_kd =
            g.value("roll_kd", sc.controller.gains.roll_kd);
        sc.controller.gains.yaw_kp =
            g.value("yaw_kp", sc.controller.gains.yaw_kp);
        sc.controller.gains.yaw_kd =
            g.value("yaw_kd", sc.controller.gains.yaw_kd);
      }
      if (c.contains("lqr_Q")) {
        const json& q = c["lqr_Q"];
        sc.controller.lqr_Q = Vec3(q[0].get<double>(), q[1].get<double>(),
                                   q[2].get<double>());
      }
      sc.controller.lqr_R = c.value("lqr_R", sc.controller.lqr_R);
      sc.controller.aggressiveness =
          c.value("aggressiveness", sc.controller.aggressiveness);
      sc.controller.zmp_regulation =
          c.value("zmp_regulation", sc.controller.zmp_regulation);
      sc.controller.roll_filter_time_constant =
          c.value("roll_filter_time_constant",
                  sc.controller.roll_filter_time_constant);
    } else {
      sc.controller.period = sc.controller_period;
    }

    for (const json& jd : doc.value("disturbances", json::array())) {
      Disturbance d;
      d.time = jd.at("time").get<double>();
      const json& imp = jd.at("impulse");
      d.impulse = Vec3(imp[0].get<double>(), imp[1].get<double>(),
                       imp[2].get<double>());
      if (jd.contains("point")) {
        const json& pt = jd["point"];
        d.point_local = Vec3(pt[0].get<double>(), pt[1].get<double>(),
                             pt[2].get<double>());
      }
      sc.disturbances.push_back(d);
    }

    if (doc.contains("terrain")) {
      for (const json& jp : doc["terrain"].value("patches", json::array())) {
        TerrainPatch p;
        if (jp.contains("region")) {
          const json& r = jp["region"];
          p.x_min = r[0].get<double>();
          p.x_max = r[1].get<double>();
          p.y_min = r[2].get<double>();
          p.y_max = r[3].get<double>();
        }
        p.height = jp.value("height", 0.0);
        if (jp.contains("normal")) {
          const json& n = jp["normal"];
          p.normal = Vec3(n[0].get<double>(), n[1].get<double>(),
                          n[2].get<double>())
                         .normalized();
        }
        sc.terrain.patches.push_back(p);
      }
      for (const json& jm : doc["terrain"].value("motions", json::array())) {
        PatchMotion m;
        m.patch = jm.at("patch").get<int>();
        m.amplitude = jm.at("amplitude").get<double>();
        m.frequency = jm.at("frequency").get<double>();
        m.start = jm.value("start", 0.0);
        sc.motions.push_back(m);
      }
    }
    if (sc.terrain.patches.empty()) sc.terrain = Terrain::flat();
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace loopwbc
