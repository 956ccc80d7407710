// Copyright 2026 The chainforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "chainforge/identify.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <set>

#include "chainforge/errors.hpp"

namespace chainforge {

const char* to_string(Method m) {
  return m == Method::kGeometric ? "geometric" : "optimization";
}

std::optional<Method> method_from_string(std::string_view s) {
  if (s == "geometric") return Method::kGeometric;
  if (s == "optimization") return Method::kOptimization;
  return std::nullopt;
}

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kUnknownMarker: return "UnknownMarker";
    case RejectReason::kDuplicate: return "Duplicate";
    case RejectReason::kOrphan: return "Orphan";
    case RejectReason::kIncompleteBundle: return "IncompleteBundle";
  }
  return "?";
}

void IdentifyConfig::validate(double max_distance) const {
  if (!(epsilon1 >= 0.0 && epsilon1 < 0.5 * max_distance)) {
    throw ValidationError("epsilon1 must lie in [0, " + std::to_string(0.5 * max_distance) + ") mm");
  }
  if (!(epsilon2 > 0.0 && epsilon2 < 1.0)) throw ValidationError("epsilon2 must lie in (0, 1)");
  if (!(f_threshold >= 0.0)) throw ValidationError("f_threshold must be non-negative");
  weights.validate();
}

ChainDescriptor IdentifiedChain::descriptor() const {
  ChainDescriptor d;
  for (std::size_t i = 0; i < links.size(); ++i) {
    ChainEntry e;
    e.type_code = links[i].module.record.type_code;
    e.inverted = links[i].direction == Direction::kInverted;
    if (i > 0) e.connection_angle = links[i].connection_angle.value_or(ConnectionAngle::kZero);
    d.entries.push_back(e);
  }
  return d;
}

std::size_t IdentifiedTree::shared_prefix(std::size_t a, std::size_t b) const {
  const auto& la = branches.at(a).links;
  const auto& lb = branches.at(b).links;
  std::size_t n = 0;
  while (n < la.size() && n < lb.size() &&
         la[n].module.record.serial == lb[n].module.record.serial) {
    ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------

namespace {

bool is_perpendicular(const DetectedModule& m) {
  return m.spec.kind == ModuleKind::kJointPerpendicular;
}

bool structurally_admissible(const DetectedModule& parent, Direction parent_dir, Port port,
                             const DetectedModule& child, Direction child_dir) {
  if (parent_dir == Direction::kInverted && !parent.spec.invertible) return false;
  if (port == Port::kBranch && !has_branch_port(parent.spec)) return false;
  // Upright tools only end chains; inverted tools only start them.
  if (parent.spec.kind == ModuleKind::kTool && parent_dir == Direction::kUpright) return false;
  if (child.spec.kind == ModuleKind::kTool && child_dir == Direction::kInverted) return false;
  return true;
}

/// z-axis of the link the child is mated to.
Vec3 exit_z(const DetectedModule& m, Direction d, Port port) {
  if (port == Port::kBranch) return -y_axis(m.master_pose);
  if (d == Direction::kUpright && m.spec.dual_bundle && m.output_pose) return z_axis(*m.output_pose);
  return z_axis(m.master_pose);
}

/// z-axis of the link mated to the parent.
Vec3 entry_z(const DetectedModule& m, Direction d) {
  if (d == Direction::kInverted && m.spec.dual_bundle && m.output_pose) return z_axis(*m.output_pose);
  return z_axis(m.master_pose);
}

/// Whether exit_z is fixed relative to the exit connector. A collinear joint on
/// the exit side rolls the master about the link axis unless the output bundle
/// is seen.
bool exit_z_rigid(const DetectedModule& m, Direction d, Port port) {
  if (port == Port::kBranch || d == Direction::kInverted) return true;
  return m.spec.kind != ModuleKind::kJointCollinear || m.output_pose.has_value();
}

bool entry_z_rigid(const DetectedModule& m, Direction d) {
  if (d == Direction::kUpright) return true;
  return m.spec.kind != ModuleKind::kJointCollinear || m.output_pose.has_value();
}

/// World position of the exit connector, when no joint moves it.
std::optional<Vec3> exit_point(const DetectedModule& m, Direction d, Port port) {
  const Vec3 a = master_to_exit(m.spec, d, 0.0, port).translation();
  if (is_joint(m.spec.kind) &&
      (master_to_exit(m.spec, d, 90.0, port).translation() - a).norm() > 1e-9) {
    return std::nullopt;
  }
  return m.master_pose * a;
}

std::optional<Vec3> entry_point(const DetectedModule& m, Direction d) {
  const Vec3 a = entry_to_master(m.spec, d, 0.0).inverse().translation();
  if (is_joint(m.spec.kind) && (entry_to_master(m.spec, d, 90.0).inverse().translation() - a).norm() > 1e-9) {
    return std::nullopt;
  }
  return m.master_pose * a;
}

std::string label(const DetectedModule& m) {
  return m.record.serial + "#" + std::to_string(m.record.master_marker_id);
}

constexpr double kGridStepDeg = 5.0;
constexpr double kGoldenTolDeg = 1e-9;
constexpr double kClampSlackDeg = 2.0;

}  // namespace

Identifier::Identifier(const ModuleDatabase& db, IdentifyConfig cfg)
    : db_(db), cfg_(cfg), max_distance_(max_connected_distance(db)) {
  cfg_.validate(max_distance_);
  cos_tol_ = 1.0 - cfg_.epsilon2;
  perp_tol_ = std::sqrt(1.0 - cos_tol_ * cos_tol_);
  angle_tol_ = rad2deg(std::acos(cos_tol_));
}

MarkerValidation Identifier::validate_markers(const std::vector<MarkerObservation>& obs) const {
  MarkerValidation out;
  std::set<int> seen;
  std::map<std::string, std::size_t> slot;  // serial -> module index
  struct Pending {
    ModuleRecord record;
    std::optional<Pose> master;
    std::optional<Pose> output;
  };
  std::vector<Pending> pending;
  for (const MarkerObservation& o : obs) {
    if (!seen.insert(o.marker_id).second) {
      out.rejected.push_back({o.marker_id, RejectReason::kDuplicate});
      continue;
    }
    const auto hit = db_.lookup_marker(o.marker_id);
    if (!hit) {
      out.rejected.push_back({o.marker_id, RejectReason::kUnknownMarker});
      continue;
    }
    auto [it, fresh] = slot.emplace(hit->record.serial, pending.size());
    if (fresh) pending.push_back({hit->record, std::nullopt, std::nullopt});
    Pending& p = pending[it->second];
    (hit->output_bundle ? p.output : p.master) = o.pose;
  }
  for (Pending& p : pending) {
    if (!p.master) {
      out.rejected.push_back({*p.record.output_marker_id, RejectReason::kIncompleteBundle});
      continue;
    }
    DetectedModule m;
    m.record = p.record;
    m.spec = db_.type_of(p.record);
    m.master_pose = *p.master;
    m.output_pose = p.output;
    out.modules.push_back(std::move(m));
  }
  std::sort(out.modules.begin(), out.modules.end(),
            [](const DetectedModule& a, const DetectedModule& b) {
              return a.record.master_marker_id < b.record.master_marker_id;
            });
  return out;
}

std::vector<std::size_t> Identifier::neighbors(const std::vector<DetectedModule>& modules,
                                               std::size_t child,
                                               const std::vector<std::size_t>& pool) const {
  std::vector<std::size_t> out;
  const Vec3& oc = modules[child].master_pose.translation();
  for (std::size_t i : pool) {
    if (i == child) continue;
    if ((modules[i].master_pose.translation() - oc).norm() <= max_distance_ + cfg_.epsilon1) {
      out.push_back(i);
    }
  }
  return out;
}

bool Identifier::constraints_hold(const DetectedModule& p, Direction dp, Port port,
                                  const DetectedModule& c, Direction dc) const {
  if (!structurally_admissible(p, dp, port, c, dc)) return false;
  const Vec3 d = c.master_pose.translation() - p.master_pose.translation();
  const double dist = d.norm();
  if (dist <= 1e-6) return false;  // coincident origins cannot be a mated pair
  const Vec3 u = d / dist;

  // Within reach, then within the band of this type pair.
  if (dist > max_distance_ + cfg_.epsilon1) return false;
  const DistanceRange band = connected_distance(p.spec, dp, port, c.spec, dc);
  if (dist < band.min - cfg_.epsilon1 || dist > band.max + cfg_.epsilon1) return false;

  // The mated connectors coincide. A joint between master and connector keeps
  // the connector on a sphere about the master.
  const auto ep = exit_point(p, dp, port);
  const auto cp = entry_point(c, dc);
  if (ep && cp) {
    if ((*ep - *cp).norm() > cfg_.epsilon1) return false;
  } else if (ep) {
    const double r = entry_to_master(c.spec, dc, 0.0).translation().norm();
    if (std::abs((c.master_pose.translation() - *ep).norm() - r) > cfg_.epsilon1) return false;
  } else if (cp) {
    const double r = master_to_exit(p.spec, dp, 0.0, port).translation().norm();
    if (std::abs((p.master_pose.translation() - *cp).norm() - r) > cfg_.epsilon1) return false;
  }

  const Vec3 yp = y_axis(p.master_pose), zp = z_axis(p.master_pose);
  const Vec3 yc = y_axis(c.master_pose), zc = z_axis(c.master_pose);
  const bool parent_t_upright = is_perpendicular(p) && dp == Direction::kUpright;
  const bool child_t_inverted = is_perpendicular(c) && dc == Direction::kInverted;

  if (port == Port::kBranch) {
    if (zp.dot(u) < cos_tol_) return false;
  } else if (!parent_t_upright) {
    // The parent's y-axis lies along u; its sign tells upright from inverted.
    const double ypu = yp.dot(u);
    if (std::abs(ypu) < cos_tol_) return false;
    if ((ypu >= 0.0) != (dp == Direction::kUpright)) return false;
  } else {
    // The child sits in the joint plane at a reachable joint angle.
    if (std::abs(zp.dot(u)) > perp_tol_) return false;
    const double theta = signed_angle_about(zp, yp, u);
    if (!p.spec.joint_limits->contains(theta, angle_tol_)) return false;
  }

  if (!child_t_inverted) {
    // Same for the child's y-axis.
    const double ycu = yc.dot(u);
    if (std::abs(ycu) < cos_tol_) return false;
    if ((ycu >= 0.0) != (dc == Direction::kUpright)) return false;
  } else {
    if (std::abs(zc.dot(u)) > perp_tol_) return false;
    const double theta = signed_angle_about(zc, yc, -u);
    if (!c.spec.joint_limits->contains(theta, angle_tol_)) return false;
  }

  // With both mated z-axes rigid, the roll between them is a discrete angle.
  if (exit_z_rigid(p, dp, port) && entry_z_rigid(c, dc)) {
    const double raw = raw_connection_angle(exit_z(p, dp, port), entry_z(c, dc), u);
    const double off = std::abs(wrap_degrees(raw - degrees(discretize_angle(raw))));
    if (off > angle_tol_) return false;
  }
  return true;
}

ConstraintResult Identifier::constraint_check(const DetectedModule& parent,
                                              const DetectedModule& child, Direction child_dir,
                                              bool allow_branch) const {
  for (Port port : {Port::kOutput, Port::kBranch}) {
    if (port == Port::kBranch && !allow_branch) continue;
    for (Direction dp : {Direction::kUpright, Direction::kInverted}) {
      if (constraints_hold(parent, dp, port, child, child_dir)) {
        return {true, dp, child_dir, port};
      }
    }
  }
  return {false, Direction::kUpright, child_dir, Port::kOutput};
}

ConnectionAngle Identifier::connection_angle(const DetectedModule& parent, Direction parent_dir,
                                             Port port, const DetectedModule& child,
                                             Direction child_dir) const {
  const Vec3 u = unit_between(parent.master_pose, child.master_pose);
  return discretize_angle(
      raw_connection_angle(exit_z(parent, parent_dir, port), entry_z(child, child_dir), u));
}

std::optional<ParentMatch> Identifier::find_parent_geometric(
    const std::vector<DetectedModule>& modules, std::size_t child, Direction child_dir,
    const std::vector<std::size_t>& pool, bool allow_branch) const {
  const DetectedModule& c = modules[child];
  std::vector<ParentMatch> hits;
  std::vector<std::string> names;
  for (std::size_t n : neighbors(modules, child, pool)) {
    for (Port port : {Port::kOutput, Port::kBranch}) {
      if (port == Port::kBranch && !allow_branch) continue;
      for (Direction dp : {Direction::kUpright, Direction::kInverted}) {
        if (port == Port::kBranch && dp == Direction::kInverted) continue;  // see grow()
        if (!constraints_hold(modules[n], dp, port, c, child_dir)) continue;
        ParentMatch m;
        m.parent = n;
        m.parent_direction = dp;
        m.port = port;
        m.connection_angle = connection_angle(modules[n], dp, port, c, child_dir);
        hits.push_back(m);
        names.push_back(label(modules[n]) + "(" + to_string(dp) + "," + to_string(port) + ")");
      }
    }
  }
  if (hits.size() > 1) throw AmbiguousParent(label(c), names);
  if (hits.empty()) return std::nullopt;
  return hits.front();
}

// ---------------------------------------------------------------------------
// Optimization back end

double Identifier::objective(const DetectedModule& p, Direction dp, Port port, ConnectionAngle c,
                             double parent_theta, const DetectedModule& child, Direction dc,
                             double* child_theta_out) const {
  const Pose observed = relative(p.master_pose, child.master_pose);
  double child_theta = 0.0;
  if (joint_on_entry_side(child.spec, dc)) {
    if (child.spec.dual_bundle && child.output_pose) {
      child_theta = rotation_angle_about(
          relative(child.master_pose, *child.output_pose).rotation(), Vec3::UnitY());
    } else {
      // Closed form: the child's joint rotates its master about the joint axis
      // on the right of the modeled transform; pick the best such rotation.
      const Pose at_zero = connection_transform(p.spec, dp, parent_theta, port, c, child.spec, dc, 0.0);
      const Mat3 residual = at_zero.rotation().transpose() * observed.rotation();
      child_theta = -rotation_angle_about(residual, joint_axis(child.spec));
    }
    const JointLimits& lim = *child.spec.joint_limits;
    child_theta = std::clamp(child_theta, lim.min_deg, lim.max_deg);
  }
  if (child_theta_out) *child_theta_out = child_theta;
  const Pose modeled =
      connection_transform(p.spec, dp, parent_theta, port, c, child.spec, dc, child_theta);
  double f = pose_distance(modeled, observed, cfg_.weights);
  if (joint_on_exit_side(p.spec, dp, port) && p.spec.dual_bundle && p.output_pose) {
    // A collinear joint and the connection roll act about the same axis; the
    // output bundle separates them.
    f += pose_distance(master_to_output_bundle(p.spec, parent_theta),
                       relative(p.master_pose, *p.output_pose), cfg_.weights);
  }
  return f;
}

std::optional<ParentMatch> Identifier::find_parent_optimization(
    const std::vector<DetectedModule>& modules, std::size_t child, Direction child_dir,
    const std::vector<std::size_t>& pool, bool allow_branch) const {
  const DetectedModule& c = modules[child];
  std::optional<ParentMatch> best;
  for (std::size_t n : neighbors(modules, child, pool)) {
    const DetectedModule& p = modules[n];
    for (Port port : {Port::kOutput, Port::kBranch}) {
      if (port == Port::kBranch && !allow_branch) continue;
      for (Direction dp : {Direction::kUpright, Direction::kInverted}) {
        if (port == Port::kBranch && dp == Direction::kInverted) continue;  // see grow()
        if (!structurally_admissible(p, dp, port, c, child_dir)) continue;
        for (ConnectionAngle angle : kConnectionAngles) {
          auto f = [&](double theta) { return objective(p, dp, port, angle, theta, c, child_dir); };
          double theta = 0.0;
          double cost;
          const bool search = joint_on_exit_side(p.spec, dp, port);
          if (search) {
            const JointLimits& lim = *p.spec.joint_limits;
            double grid_best = lim.min_deg;
            double grid_cost = f(grid_best);
            const int steps = static_cast<int>(std::ceil((lim.max_deg - lim.min_deg) / kGridStepDeg));
            for (int k = 1; k <= steps; ++k) {
              const double t = std::min(lim.min_deg + k * kGridStepDeg, lim.max_deg);
              const double v = f(t);
              if (v < grid_cost) {
                grid_cost = v;
                grid_best = t;
              }
            }
            // Golden-section refinement inside the neighboring grid cells.
            const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
            double a = std::max(lim.min_deg, grid_best - kGridStepDeg);
            double b = std::min(lim.max_deg, grid_best + kGridStepDeg);
            double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
            double f1 = f(x1), f2 = f(x2);
            while (b - a > kGoldenTolDeg) {
              if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - invphi * (b - a);
                f1 = f(x1);
              } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + invphi * (b - a);
                f2 = f(x2);
              }
            }
            theta = (a + b) / 2;
            cost = f(theta);
            if (grid_cost < cost) {
              theta = grid_best;
              cost = grid_cost;
            }
          } else {
            cost = f(0.0);
          }
          if (!best || cost < best->cost) {
            ParentMatch m;
            m.parent = n;
            m.connection_angle = angle;
            m.parent_direction = dp;
            m.port = port;
            m.cost = cost;
            if (search) m.parent_joint_angle = theta;
            if (joint_on_entry_side(c.spec, child_dir)) {
              double ct = 0.0;
              objective(p, dp, port, angle, theta, c, child_dir, &ct);
              m.child_joint_angle = ct;
            }
            best = m;
          }
        }
      }
    }
  }
  if (!best || best->cost > cfg_.f_threshold) return std::nullopt;
  return best;
}

// ---------------------------------------------------------------------------
// Joint angles

JointEstimate Identifier::observe_joint_angle(const ChainLink& link, const ChainLink* parent,
                                              const ChainLink* child) const {
  const DetectedModule& m = link.module;
  if (!is_joint(m.spec.kind)) throw ValidationError(label(m) + " has no joint");
  JointEstimate est;
  const bool upright = link.direction == Direction::kUpright;

  if (m.spec.kind == ModuleKind::kJointCollinear) {
    if (m.output_pose) {
      const Pose rel = relative(m.master_pose, *m.output_pose);
      if (std::abs(y_axis(m.master_pose).dot(y_axis(*m.output_pose))) < cos_tol_) {
        throw NonCollinearBundles("NonCollinearBundles: bundles of " + label(m) +
                                  " are not collinear");
      }
      est.angle = rotation_angle_about(rel.rotation(), Vec3::UnitY());
    } else if (upright && child && child->port == Port::kOutput && child->connection_angle) {
      const Vec3 u = unit_between(m.master_pose, child->module.master_pose);
      const double raw = raw_connection_angle(z_axis(m.master_pose),
                                              entry_z(child->module, child->direction), u);
      est.angle = wrap_degrees(raw - degrees(*child->connection_angle));
      est.warning = label(m) + ": output bundle missing, joint angle inferred from the child";
    } else if (!upright && parent && link.connection_angle) {
      const Vec3 u = unit_between(parent->module.master_pose, m.master_pose);
      const double raw = raw_connection_angle(
          exit_z(parent->module, parent->direction, link.port), z_axis(m.master_pose), u);
      est.angle = wrap_degrees(degrees(*link.connection_angle) - raw);
      est.warning = label(m) + ": output bundle missing, joint angle inferred from the parent";
    } else {
      est.warning = label(m) + ": joint angle unobservable, reported as 0";
      return est;
    }
  } else {
    const DetectedModule* side = nullptr;
    if (upright && child && child->port == Port::kOutput) side = &child->module;
    if (!upright && parent) side = &parent->module;
    if (!side) {
      est.warning = label(m) + ": joint angle unobservable, reported as 0";
      return est;
    }
    const Vec3 u = unit_between(m.master_pose, side->master_pose);
    est.angle = signed_angle_about(z_axis(m.master_pose), y_axis(m.master_pose), u);
  }
  return est;
}

JointEstimate Identifier::estimate_joint_angle(const ChainLink& link, const ChainLink* parent,
                                               const ChainLink* child) const {
  const DetectedModule& m = link.module;
  JointEstimate est = observe_joint_angle(link, parent, child);
  const JointLimits& lim = *m.spec.joint_limits;
  if (!lim.contains(est.angle)) {
    if (!lim.contains(est.angle, kClampSlackDeg)) {
      throw LimitExceeded("LimitExceeded: " + label(m) + " joint angle " +
                          std::to_string(est.angle) + " outside its limits");
    }
    est.angle = std::clamp(est.angle, lim.min_deg, lim.max_deg);
    est.warning = label(m) + ": joint angle clamped to its limits";
  }
  return est;
}

void Identifier::estimate_all(std::vector<ChainLink>& links,
                              std::vector<std::string>& warnings) const {
  for (std::size_t i = 0; i < links.size(); ++i) {
    ChainLink& link = links[i];
    if (!is_joint(link.module.spec.kind) || link.joint_angle) continue;
    const ChainLink* parent = i > 0 ? &links[i - 1] : nullptr;
    const ChainLink* child = i + 1 < links.size() ? &links[i + 1] : nullptr;
    try {
      const JointEstimate e = estimate_joint_angle(link, parent, child);
      link.joint_angle = e.angle;
      if (e.warning) warnings.push_back(*e.warning);
    } catch (const LimitExceeded& e) {
      const JointLimits& lim = *link.module.spec.joint_limits;
      link.joint_angle =
          std::clamp(observe_joint_angle(link, parent, child).angle, lim.min_deg, lim.max_deg);
      warnings.push_back(std::string(e.what()) + "; clamped");
    } catch (const NonCollinearBundles& e) {
      link.joint_angle = 0.0;
      warnings.push_back(std::string(e.what()) + "; reported as 0");
    }
  }
}

// ---------------------------------------------------------------------------
// Chain and tree construction

std::optional<ParentMatch> Identifier::find_parent(const std::vector<DetectedModule>& modules,
                                                   std::size_t child, Direction child_dir,
                                                   const std::vector<std::size_t>& pool,
                                                   bool allow_branch) const {
  return cfg_.method == Method::kGeometric
             ? find_parent_geometric(modules, child, child_dir, pool, allow_branch)
             : find_parent_optimization(modules, child, child_dir, pool, allow_branch);
}

namespace {

/// Replaces the tip of `rev` with its placement in an earlier branch and
/// appends that branch's links toward the base.
template <typename B>
bool splice_known(const std::vector<DetectedModule>& modules, std::size_t child,
                  const std::vector<B>& done, std::vector<ChainLink>& rev,
                  std::vector<std::size_t>& members) {
  const std::string& serial = modules[child].record.serial;
  for (const B& b : done) {
    for (std::size_t k = 0; k < b.links.size(); ++k) {
      if (b.links[k].module.record.serial != serial) continue;
      rev.back() = b.links[k];
      const std::size_t n = b.links.size();
      for (std::size_t j = k; j-- > 0;) {
        rev.push_back(b.links[j]);
        members.push_back(b.members[n - 1 - j]);  // members run end first
      }
      return true;
    }
  }
  return false;
}

}  // namespace

std::optional<Identifier::Branch> Identifier::grow(const std::vector<DetectedModule>& modules,
                                                  std::size_t start, std::vector<std::size_t> pool,
                                                  bool allow_branch, const std::vector<Branch>* done,
                                                  bool defer_forks) const {
  // Built end first, reversed at the end.
  std::vector<ChainLink> rev;
  std::vector<std::size_t> members{start};
  ChainLink tip;
  tip.module = modules[start];
  tip.direction = Direction::kUpright;
  rev.push_back(tip);
  std::size_t child = start;
  std::erase(pool, start);
  // The branch port is fixed to the master, so a child on it cannot tell how
  // its parent is installed. That parent's own parent settles the question.
  bool direction_open = false;
  for (;;) {
    if (direction_open && done && splice_known(modules, child, *done, rev, members)) break;
    if (direction_open && defer_forks) return std::nullopt;
    if (pool.empty()) break;
    const std::size_t before = pool.size();
    auto match = find_parent(modules, child, rev.back().direction, pool, allow_branch);
    if (direction_open && modules[child].spec.invertible) {
      auto inverted = find_parent(modules, child, Direction::kInverted, pool, allow_branch);
      if (match && inverted && cfg_.method == Method::kGeometric) {
        throw AmbiguousParent(label(modules[child]),
                              {label(modules[match->parent]) + "(upright child)",
                               label(modules[inverted->parent]) + "(inverted child)"});
      }
      if (inverted && (!match || inverted->cost < match->cost)) {
        match = inverted;
        rev.back().direction = Direction::kInverted;
      }
    }
    if (!match) break;
    direction_open = match->port == Port::kBranch;
    ChainLink& c = rev.back();
    c.connection_angle = match->connection_angle;
    c.port = match->port;
    if (match->child_joint_angle) c.joint_angle = match->child_joint_angle;
    ChainLink p;
    p.module = modules[match->parent];
    p.module.claimed = true;
    p.direction = match->parent_direction;
    if (match->parent_joint_angle) p.joint_angle = match->parent_joint_angle;
    rev.push_back(p);
    members.push_back(match->parent);
    child = match->parent;
    std::erase(pool, match->parent);
    if (pool.size() >= before) break;
  }
  rev.front().module.claimed = true;
  Branch b;
  b.links.assign(rev.rbegin(), rev.rend());
  b.links.front().connection_angle.reset();
  b.members = std::move(members);
  return b;
}

namespace {

std::vector<std::size_t> tool_indices(const std::vector<DetectedModule>& modules) {
  std::vector<std::size_t> tools;
  for (std::size_t i = 0; i < modules.size(); ++i) {
    if (modules[i].spec.kind == ModuleKind::kTool) tools.push_back(i);
  }
  if (tools.empty()) throw NoToolModule();
  return tools;  // modules are sorted by master marker id
}

void reject_orphans(const std::vector<DetectedModule>& modules, const std::set<std::size_t>& used,
                    std::vector<RejectedMarker>& rejected) {
  for (std::size_t i = 0; i < modules.size(); ++i) {
    if (used.count(i)) continue;
    rejected.push_back({modules[i].record.master_marker_id, RejectReason::kOrphan});
    if (modules[i].output_pose && modules[i].record.output_marker_id) {
      rejected.push_back({*modules[i].record.output_marker_id, RejectReason::kOrphan});
    }
  }
}

}  // namespace

IdentifiedChain Identifier::build_chain(const std::vector<MarkerObservation>& obs) const {
  MarkerValidation v = validate_markers(obs);
  const auto tools = tool_indices(v.modules);
  std::vector<std::size_t> pool(v.modules.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

  Branch b = *grow(v.modules, tools.front(), pool, false);
  IdentifiedChain out;
  out.links = std::move(b.links);
  out.rejected = std::move(v.rejected);
  reject_orphans(v.modules, std::set<std::size_t>(b.members.begin(), b.members.end()),
                 out.rejected);
  estimate_all(out.links, out.warnings);
  return out;
}

IdentifiedTree Identifier::build_tree(const std::vector<MarkerObservation>& obs) const {
  MarkerValidation v = validate_markers(obs);
  const auto tools = tool_indices(v.modules);
  std::vector<std::size_t> all(v.modules.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  IdentifiedTree out;
  std::set<std::size_t> used;
  std::map<std::string, double> angles;  // shared modules: first observable estimate wins
  // Parents stay available across branches; a branch never revisits its own
  // modules. Past a fork, growth could continue toward the base or toward the
  // other end, so a branch reaching a fork waits until the branch through that
  // fork has been grown. Only when every pending branch waits is the fork
  // decided locally.
  std::map<std::size_t, Branch> grown;  // keyed by tool index
  std::vector<Branch> done;
  std::vector<std::size_t> pending = tools;
  bool defer_forks = true;
  while (!pending.empty()) {
    std::vector<std::size_t> deferred;
    std::exception_ptr first_error;
    for (std::size_t t : pending) {
      try {
        auto b = grow(v.modules, t, all, true, &done, defer_forks);
        if (!b) {
          deferred.push_back(t);
          continue;
        }
        done.push_back(*b);
        grown.emplace(t, std::move(*b));
      } catch (const AmbiguousParent&) {
        if (!first_error) first_error = std::current_exception();
        deferred.push_back(t);
      }
    }
    if (deferred.size() == pending.size()) {
      if (!defer_forks) std::rethrow_exception(first_error);
      defer_forks = false;
    } else {
      defer_forks = true;
    }
    pending = std::move(deferred);
  }
  for (auto& [t, b] : grown) {
    used.insert(b.members.begin(), b.members.end());
    IdentifiedChain chain;
    chain.links = std::move(b.links);
    estimate_all(chain.links, chain.warnings);
    out.branches.push_back(std::move(chain));
  }
  // A module shared by several branches may be observable in only one of them
  // (a perpendicular joint whose branch child hangs on its fixed port).
  for (std::size_t i = 0; i < out.branches.size(); ++i) {
    for (std::size_t k = 0; k < out.branches[i].links.size(); ++k) {
      ChainLink& link = out.branches[i].links[k];
      if (!is_joint(link.module.spec.kind)) continue;
      const bool unobservable_here =
          link.module.spec.kind == ModuleKind::kJointPerpendicular &&
          link.direction == Direction::kUpright &&
          (k + 1 >= out.branches[i].links.size() ||
           out.branches[i].links[k + 1].port == Port::kBranch);
      if (!unobservable_here) angles.emplace(link.module.record.serial, *link.joint_angle);
    }
  }
  for (auto& branch : out.branches) {
    for (auto& link : branch.links) {
      auto it = angles.find(link.module.record.serial);
      if (it != angles.end()) link.joint_angle = it->second;
    }
    for (auto& w : branch.warnings) out.warnings.push_back(w);
  }
  out.rejected = std::move(v.rejected);
  reject_orphans(v.modules, used, out.rejected);
  return out;
}

MarkerValidation validate_markers(const std::vector<MarkerObservation>& obs,
                                  const ModuleDatabase& db) {
  return Identifier(db, {}).validate_markers(obs);
}

IdentifiedChain build_chain(const std::vector<MarkerObservation>& obs, const ModuleDatabase& db,
                            const IdentifyConfig& cfg) {
  return Identifier(db, cfg).build_chain(obs);
}

IdentifiedTree build_tree(const std::vector<MarkerObservation>& obs, const ModuleDatabase& db,
                          const IdentifyConfig& cfg) {
  return Identifier(db, cfg).build_tree(obs);
}

}  // namespace chainforge
