#include <fstream>
#include <sstream>

#include <json.hpp>

#include "loopwbc/errors.hpp"
#include "loopwbc/model.hpp"

namespace loopwbc {

namespace {

using nlohmann::json;

Vec3 read_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError(where + ": expected an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Mat3 read_inertia(const json& j, const std::string& where) {
  // [ixx, iyy, izz, ixy, ixz, iyz]
  if (!j.is_array() || j.size() != 6)
    throw ParseError(where + ": expected [ixx, iyy, izz, ixy, ixz, iyz]");
  Mat3 I;
  I << j[0].get<double>(), j[3].get<double>(), j[4].get<double>(),
       j[3].get<double>(), j[1].get<double>(), j[5].get<double>(),
       j[4].get<double>(), j[5].get<double>(), j[2].get<double>();
  return I;
}

Mat3 rpy_to_rot(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Body read_body(const json& j) {
  Body b;
  b.name = j.at("name").get<std::string>();
  b.mass = j.at("mass").get<double>();
  b.com = read_vec3(j.at("com"), "body '" + b.name + "' com");
  b.inertia = read_inertia(j.at("inertia"), "body '" + b.name + "' inertia");
  return b;
}

void validate_body(const Body& b) {
  if (!(b.mass > 0.0))
    throw ValidationError("body '" + b.name + "': mass must be > 0");
  if ((b.inertia - b.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ValidationError("body '" + b.name + "': inertia must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(b.inertia);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw ValidationError("body '" + b.name +
                          "': inertia must be positive definite");
}

}  // namespace

RobotModel parse_model(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }

  RobotModel m;
  try {
    m.name = doc.value("name", "unnamed");

    const json& jbase = doc.at("base");
    Body base = read_body(jbase);
    validate_body(base);
    m.bodies.push_back(base);
    m.floating = jbase.value("type", "floating") == "floating";

    for (const json& jb : doc.at("bodies")) {
      Body b = read_body(jb);
      validate_body(b);
      if (m.body_index(b.name) != -1)
        throw ValidationError("duplicate body name '" + b.name + "'");
      m.bodies.push_back(b);
    }

    for (const json& jj : doc.at("joints")) {
      Joint jt;
      jt.name = jj.at("name").get<std::string>();
      jt.parent = m.body_index(jj.at("parent").get<std::string>());
      jt.child = m.body_index(jj.at("child").get<std::string>());
      if (jt.parent < 0)
        throw ValidationError("joint '" + jt.name + "': unknown parent body");
      if (jt.child < 0)
        throw ValidationError("joint '" + jt.name + "': unknown child body");
      const std::string type = jj.value("type", "revolute");
      if (type != "revolute")
        throw ValidationError("joint '" + jt.name +
                              "': only revolute joints are supported");
      jt.origin_xyz = read_vec3(jj.at("origin_xyz"), "joint '" + jt.name + "'");
      if (jj.contains("origin_rpy"))
        jt.origin_rot = rpy_to_rot(
            read_vec3(jj.at("origin_rpy"), "joint '" + jt.name + "' rpy"));
      jt.axis = read_vec3(jj.at("axis"), "joint '" + jt.name + "' axis");
      if (jt.axis.norm() < 1e-9)
        throw ValidationError("joint '" + jt.name + "': zero axis");
      jt.axis.normalize();
      m.joints.push_back(jt);
    }

    const json& jloops = doc.at("loops");
    if (jloops.size() != 2)
      throw ValidationError("exactly 2 loops required, got " +
                            std::to_string(jloops.size()));
    for (const json& jl : jloops) {
      Loop l;
      l.p_body = m.body_index(jl.at("p_body").get<std::string>());
      l.q_body = m.body_index(jl.at("q_body").get<std::string>());
      if (l.p_body < 0 || l.q_body < 0)
        throw ValidationError("loop refers to unknown body");
      l.p_point = read_vec3(jl.at("p_point"), "loop p_point");
      l.q_point = read_vec3(jl.at("q_point"), "loop q_point");
      m.loops.push_back(l);
    }

    const json& jwheels = doc.at("wheels");
    if (jwheels.size() != 2)
      throw ValidationError("exactly 2 wheels required, got " +
                            std::to_string(jwheels.size()));
    for (const json& jw : jwheels) {
      Wheel w;
      w.body = m.body_index(jw.at("body").get<std::string>());
      if (w.body < 0) throw ValidationError("wheel refers to unknown body");
      w.radius = jw.at("radius").get<double>();
      if (!(w.radius > 0.0))
        throw ValidationError("wheel on body '" + m.bodies[w.body].name +
                              "': radius must be > 0");
      m.wheels.push_back(w);
    }

    for (const json& js : doc.at("springs")) {
      TorsionSpring sp;
      sp.joint = m.joint_index(js.at("joint").get<std::string>());
      if (sp.joint < 0)
        throw ValidationError("spring refers to unknown joint");
      sp.stiffness = js.at("stiffness").get<double>();
      sp.rest_angle = js.at("rest_angle").get<double>();
      if (sp.stiffness < 0.0)
        throw ValidationError("spring stiffness must be >= 0");
      m.springs.push_back(sp);
    }

    for (const json& ja : doc.at("actuators")) {
      const int j = m.joint_index(ja.get<std::string>());
      if (j < 0)
        throw ValidationError("actuator refers to unknown joint '" +
                              ja.get<std::string>() + "'");
      m.actuated_joints.push_back(j);
    }

    const json& jf = doc.at("friction");
    m.mu_s = jf.at("mu_s").get<double>();
    m.mu_h = jf.at("mu_h").get<double>();
    if (m.mu_s < 0.0 || m.mu_h < 0.0)
      throw ValidationError("friction coefficients must be >= 0");

    const json& jsat = doc.at("saturation");
    m.tau_sat = VecX::Zero(static_cast<Eigen::Index>(jsat.size()));
    for (size_t i = 0; i < jsat.size(); ++i)
      m.tau_sat[static_cast<Eigen::Index>(i)] = jsat[i].get<double>();
    if (m.tau_sat.size() != static_cast<Eigen::Index>(m.actuated_joints.size()))
      throw ValidationError("saturation must list one bound per actuator");
    if (m.tau_sat.minCoeff() <= 0.0)
      throw ValidationError("saturation bounds must be > 0");

    if (doc.contains("workspace")) {
      m.height_min = doc["workspace"].value("height_min", 0.0);
      m.height_max = doc["workspace"].value("height_max", 1e9);
    }
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }

  m.finalize();
  return m;
}

RobotModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str(), path);
}

}  // namespace loopwbc
