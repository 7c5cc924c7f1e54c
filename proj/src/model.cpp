#include "loopwbc/model.hpp"

#include <cmath>

#include "loopwbc/errors.hpp"

namespace loopwbc {

void RobotModel::finalize() {
  n_j = static_cast<int>(joints.size());
  vel_offset = floating ? 6 : 0;
  n_u = vel_offset + n_j;
  n_tau = static_cast<int>(actuated_joints.size());

  if (bodies.empty()) throw ValidationError("model has no bodies");

  // Tree check: every non-base body must be the child of exactly one joint,
  // with the parent appearing earlier in the chain.
  std::vector<int> parent_joint(bodies.size(), -1);
  for (int j = 0; j < n_j; ++j) {
    const Joint& jt = joints[j];
    if (jt.parent < 0 || jt.parent >= static_cast<int>(bodies.size()) ||
        jt.child <= 0 || jt.child >= static_cast<int>(bodies.size())) {
      throw ValidationError("joint '" + jt.name + "': invalid parent/child");
    }
    if (parent_joint[jt.child] != -1) {
      throw ValidationError("body '" + bodies[jt.child].name +
                            "' has two parent joints; tree must be acyclic");
    }
    parent_joint[jt.child] = j;
  }
  for (size_t k = 1; k < bodies.size(); ++k) {
    if (parent_joint[k] == -1) {
      throw ValidationError("body '" + bodies[k].name +
                            "' is not connected to the tree");
    }
  }

  ancestors.assign(bodies.size(), {});
  for (size_t k = 1; k < bodies.size(); ++k) {
    std::vector<int> chain;
    int body = static_cast<int>(k);
    int guard = 0;
    while (body != 0) {
      const int j = parent_joint[body];
      chain.push_back(j);
      body = joints[j].parent;
      if (++guard > n_j) {
        throw ValidationError("cycle detected while walking tree from body '" +
                              bodies[k].name + "'");
      }
    }
    ancestors[k].assign(chain.rbegin(), chain.rend());
  }

  S = MatX::Zero(n_tau, n_u);
  for (int i = 0; i < n_tau; ++i) {
    const int j = actuated_joints[i];
    if (j < 0 || j >= n_j)
      throw ValidationError("actuator refers to unknown joint index");
    S(i, vel_offset + j) = 1.0;
  }
  if (tau_sat.size() == 0)
    tau_sat = VecX::Constant(n_tau, 1e9);
}

int RobotModel::body_index(const std::string& nm) const {
  for (size_t i = 0; i < bodies.size(); ++i)
    if (bodies[i].name == nm) return static_cast<int>(i);
  return -1;
}

int RobotModel::joint_index(const std::string& nm) const {
  for (size_t i = 0; i < joints.size(); ++i)
    if (joints[i].name == nm) return static_cast<int>(i);
  return -1;
}

double RobotModel::total_mass() const {
  double m = 0.0;
  for (const Body& b : bodies) m += b.mass;
  return m;
}

GeneralizedState GeneralizedState::zero(const RobotModel& model) {
  GeneralizedState s;
  s.phi = VecX::Zero(model.n_j);
  s.u = VecX::Zero(model.n_u);
  return s;
}

namespace {

void propagate_poses(const RobotModel& model, const GeneralizedState& q,
                     KinematicsCache& kin) {
  kin.body.assign(model.bodies.size(), BodyKin{});
  kin.joint_axis_w.assign(model.joints.size(), Vec3::Zero());
  kin.joint_origin_w.assign(model.joints.size(), Vec3::Zero());

  BodyKin& base = kin.body[0];
  base.R = model.floating ? q.R : Mat3::Identity();
  base.p = model.floating ? q.r : Vec3::Zero();
  base.com = base.p + base.R * model.bodies[0].com;

  for (size_t j = 0; j < model.joints.size(); ++j) {
    const Joint& jt = model.joints[j];
    const BodyKin& par = kin.body[jt.parent];
    BodyKin& ch = kin.body[jt.child];
    const Mat3 rot_local =
        jt.origin_rot *
        Eigen::AngleAxisd(q.phi[static_cast<Eigen::Index>(j)], jt.axis)
            .toRotationMatrix();
    ch.R = par.R * rot_local;
    ch.p = par.p + par.R * jt.origin_xyz;
    ch.com = ch.p + ch.R * model.bodies[jt.child].com;
    kin.joint_axis_w[j] = ch.R * jt.axis;
    kin.joint_origin_w[j] = ch.p;
  }
}

void propagate_velocities(const RobotModel& model, const GeneralizedState& st,
                          KinematicsCache& kin) {
  const int off = model.vel_offset;
  BodyKin& base = kin.body[0];
  if (model.floating) {
    base.v = st.u.head<3>();
    base.omega = st.u.segment<3>(3);
  }
  base.v_com = base.v + base.omega.cross(base.com - base.p);
  base.a_com_bias = base.omega.cross(base.omega.cross(base.com - base.p));

  for (size_t j = 0; j < model.joints.size(); ++j) {
    const Joint& jt = model.joints[j];
    const BodyKin& par = kin.body[jt.parent];
    BodyKin& ch = kin.body[jt.child];
    const double rate = st.u[off + static_cast<int>(j)];
    const Vec3 axis_w = kin.joint_axis_w[j];
    const Vec3 d = ch.p - par.p;

    ch.omega = par.omega + rate * axis_w;
    ch.v = par.v + par.omega.cross(d);
    ch.alpha_bias = par.alpha_bias + rate * par.omega.cross(axis_w);
    ch.a_bias = par.a_bias + par.alpha_bias.cross(d) +
                par.omega.cross(par.omega.cross(d));

    const Vec3 c = ch.com - ch.p;
    ch.v_com = ch.v + ch.omega.cross(c);
    ch.a_com_bias =
        ch.a_bias + ch.alpha_bias.cross(c) + ch.omega.cross(ch.omega.cross(c));
  }
  kin.has_velocity = true;
}

}  // namespace

KinematicsCache forward_kinematics(const RobotModel& model,
                                   const GeneralizedState& q) {
  KinematicsCache kin;
  propagate_poses(model, q, kin);
  return kin;
}

KinematicsCache kinematics(const RobotModel& model,
                           const GeneralizedState& state) {
  KinematicsCache kin;
  propagate_poses(model, state, kin);
  propagate_velocities(model, state, kin);
  return kin;
}

Mat3X point_jacobian(const RobotModel& model, const KinematicsCache& kin,
                     int body, const Vec3& point_w) {
  Mat3X J = Mat3X::Zero(3, model.n_u);
  if (model.floating) {
    J.leftCols<3>() = Mat3::Identity();
    J.middleCols<3>(3) = -so3::skew(point_w - kin.body[0].p);
  }
  for (int j : model.ancestors[body]) {
    J.col(model.vel_offset + j) =
        kin.joint_axis_w[j].cross(point_w - kin.joint_origin_w[j]);
  }
  return J;
}

Mat3X rotational_jacobian(const RobotModel& model, const KinematicsCache& kin,
                          int body) {
  Mat3X J = Mat3X::Zero(3, model.n_u);
  if (model.floating) J.middleCols<3>(3) = Mat3::Identity();
  for (int j : model.ancestors[body]) {
    J.col(model.vel_offset + j) = kin.joint_axis_w[j];
  }
  return J;
}

Vec3 point_bias_accel(const KinematicsCache& kin, int body,
                      const Vec3& point_w) {
  const BodyKin& b = kin.body[body];
  const Vec3 d = point_w - b.p;
  return b.a_bias + b.alpha_bias.cross(d) + b.omega.cross(b.omega.cross(d));
}

MatX mass_matrix(const RobotModel& model, const KinematicsCache& kin) {
  MatX M = MatX::Zero(model.n_u, model.n_u);
  for (size_t k = 0; k < model.bodies.size(); ++k) {
    const Body& body = model.bodies[k];
    if (body.mass <= 0.0 && k == 0 && !model.floating) continue;
    const Mat3X Jc =
        point_jacobian(model, kin, static_cast<int>(k), kin.body[k].com);
    const Mat3X Jr = rotational_jacobian(model, kin, static_cast<int>(k));
    const Mat3 Iw = kin.body[k].R * body.inertia * kin.body[k].R.transpose();
    M.noalias() += body.mass * Jc.transpose() * Jc;
    M.noalias() += Jr.transpose() * Iw * Jr;
  }
  return M;
}

VecX nonlinear_terms(const RobotModel& model, const KinematicsCache& kin) {
  const Vec3 g_vec(0.0, 0.0, -kGravity);
  VecX h = VecX::Zero(model.n_u);
  for (size_t k = 0; k < model.bodies.size(); ++k) {
    const Body& body = model.bodies[k];
    const BodyKin& bk = kin.body[k];
    const Mat3X Jc =
        point_jacobian(model, kin, static_cast<int>(k), bk.com);
    const Mat3X Jr = rotational_jacobian(model, kin, static_cast<int>(k));
    const Mat3 Iw = bk.R * body.inertia * bk.R.transpose();
    h.noalias() +=
        Jc.transpose() * (body.mass * (bk.a_com_bias - g_vec));
    h.noalias() += Jr.transpose() *
                   (Iw * bk.alpha_bias + bk.omega.cross(Iw * bk.omega));
  }
  return h;
}

VecX gravity_terms(const RobotModel& model, const KinematicsCache& kin) {
  const Vec3 g_vec(0.0, 0.0, -kGravity);
  VecX g = VecX::Zero(model.n_u);
  for (size_t k = 0; k < model.bodies.size(); ++k) {
    const Mat3X Jc =
        point_jacobian(model, kin, static_cast<int>(k), kin.body[k].com);
    g.noalias() -= Jc.transpose() * (model.bodies[k].mass * g_vec);
  }
  return g;
}

VecX spring_torques(const RobotModel& model, const GeneralizedState& state) {
  VecX s = VecX::Zero(model.n_u);
  for (const TorsionSpring& sp : model.springs) {
    s[model.vel_offset + sp.joint] +=
        sp.stiffness * (state.phi[sp.joint] - sp.rest_angle);
  }
  return s;
}

double kinetic_energy(const RobotModel& model, const KinematicsCache& kin) {
  double T = 0.0;
  for (size_t k = 0; k < model.bodies.size(); ++k) {
    const Body& body = model.bodies[k];
    const BodyKin& bk = kin.body[k];
    const Mat3 Iw = bk.R * body.inertia * bk.R.transpose();
    T += 0.5 * body.mass * bk.v_com.squaredNorm();
    T += 0.5 * bk.omega.dot(Iw * bk.omega);
  }
  return T;
}

double potential_energy(const RobotModel& model, const KinematicsCache& kin) {
  double V = 0.0;
  for (size_t k = 0; k < model.bodies.size(); ++k)
    V += model.bodies[k].mass * kGravity * kin.body[k].com.z();
  return V;
}

double spring_energy(const RobotModel& model, const GeneralizedState& state) {
  double V = 0.0;
  for (const TorsionSpring& sp : model.springs) {
    const double d = state.phi[sp.joint] - sp.rest_angle;
    V += 0.5 * sp.stiffness * d * d;
  }
  return V;
}

}  // namespace loopwbc
