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

#include "chainforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "chainforge/errors.hpp"
#include "chainforge/json_io.hpp"

namespace chainforge {

void SceneConfig::validate() const {
  if (sigma_pos < 0 || sigma_rot < 0 || spurious_count < 0) {
    throw ValidationError("noise parameters must be non-negative");
  }
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0)) {
    throw ValidationError("dropout probability must lie in [0, 1]");
  }
  if (spurious_count > kSpuriousIdEnd - kSpuriousIdBegin) {
    throw ValidationError("too many spurious markers requested");
  }
}

std::size_t joint_count(const ChainDescriptor& d, const ModuleDatabase& db) {
  return static_cast<std::size_t>(std::count_if(d.entries.begin(), d.entries.end(),
                                                [&](const ChainEntry& e) {
                                                  return is_joint(db.type(e.type_code).kind);
                                                }));
}

namespace {

struct Node {
  ChainEntry entry;
  std::optional<std::size_t> parent;
  Port port = Port::kOutput;
  bool has_child = false;
};

std::vector<PlacedModule> place(std::vector<Node> nodes, const std::vector<double>& joint_angles,
                                const ModuleDatabase& db, const Pose& base,
                                const std::vector<std::size_t>& allocation_order) {
  if (nodes.empty()) throw ValidationError("empty chain");
  for (const Node& n : nodes) {
    if (n.parent) nodes[*n.parent].has_child = true;
  }

  std::size_t joints = 0;
  for (const Node& n : nodes) {
    const ModuleTypeSpec& spec = db.type(n.entry.type_code);  // throws on unknown codes
    if (is_joint(spec.kind)) ++joints;
  }
  if (joint_angles.size() != joints) {
    throw ValidationError("expected " + std::to_string(joints) + " joint angles, got " +
                          std::to_string(joint_angles.size()));
  }

  std::vector<PlacedModule> out(nodes.size());
  std::size_t next_joint = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    const ModuleTypeSpec& spec = db.type(n.entry.type_code);
    const std::string where = "entry " + std::to_string(i) + " ('" +
                              std::string(1, n.entry.type_code) + "')";
    if (n.entry.inverted && !spec.invertible) {
      throw NotInvertible(where + ": type cannot be installed inverted");
    }
    if (spec.kind == ModuleKind::kTool) {
      // Upright tools end a chain; inverted tools can only serve as its base.
      if (n.entry.inverted ? n.parent.has_value() : n.has_child) {
        throw ValidationError(where + ": tool modules must sit at a chain end");
      }
    }
    if (n.port == Port::kBranch && n.parent && !has_branch_port(db.type(nodes[*n.parent].entry.type_code))) {
      throw ValidationError(where + ": parent has no branch port");
    }
    PlacedModule& m = out[i];
    m.record.type_code = n.entry.type_code;
    m.direction = n.entry.inverted ? Direction::kInverted : Direction::kUpright;
    m.connection_angle = n.parent ? n.entry.connection_angle : std::nullopt;
    m.parent = n.parent;
    m.port = n.port;
    if (is_joint(spec.kind)) {
      const double theta = joint_angles[next_joint++];
      if (!spec.joint_limits->contains(theta)) {
        throw LimitViolation(where + ": joint angle " + std::to_string(theta) +
                             " outside [" + std::to_string(spec.joint_limits->min_deg) + ", " +
                             std::to_string(spec.joint_limits->max_deg) + "]");
      }
      m.joint_angle = theta;
    }
  }

  // Registry instances, in allocation order.
  std::map<char, std::size_t> used;
  for (std::size_t i : allocation_order) {
    const char code = nodes[i].entry.type_code;
    const auto records = db.records_of_type(code);
    std::size_t& k = used[code];
    if (k >= records.size()) {
      throw MissingInstance("MissingInstance: registry has only " + std::to_string(records.size()) +
                            " module(s) of type '" + std::string(1, code) + "'");
    }
    out[i].record = records[k++];
  }

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    PlacedModule& m = out[i];
    const ModuleTypeSpec& spec = db.type(m.record.type_code);
    const double theta = m.joint_angle.value_or(0.0);
    if (!m.parent) {
      m.master = base;
    } else {
      const PlacedModule& p = out[*m.parent];
      const ModuleTypeSpec& pspec = db.type(p.record.type_code);
      m.master = p.master * connection_transform(pspec, p.direction, p.joint_angle.value_or(0.0),
                                                 m.port, *m.connection_angle, spec, m.direction,
                                                 theta);
    }
    if (spec.dual_bundle) m.output_bundle = m.master * master_to_output_bundle(spec, theta);
  }
  return out;
}

std::vector<Node> chain_nodes(const ChainDescriptor& d) {
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    Node n;
    n.entry = d.entries[i];
    if (i > 0) {
      n.parent = i - 1;
      if (!n.entry.connection_angle) throw ValidationError("non-base entry without connection angle");
    }
    nodes.push_back(n);
  }
  return nodes;
}

}  // namespace

std::vector<PlacedModule> forward_poses(const ChainDescriptor& d,
                                        const std::vector<double>& joint_angles,
                                        const ModuleDatabase& db, const Pose& base) {
  auto nodes = chain_nodes(d);
  std::vector<std::size_t> order(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;
  return place(std::move(nodes), joint_angles, db, base, order);
}

std::vector<PlacedModule> forward_poses(const TreeDescriptor& t,
                                        const std::vector<double>& joint_angles,
                                        const ModuleDatabase& db, const Pose& base) {
  auto nodes = chain_nodes(t.trunk);
  const std::size_t trunk = nodes.size();
  if (t.branch_at >= trunk) throw ValidationError("branch point outside the trunk");
  if (t.branch.entries.empty()) throw ValidationError("empty branch");
  for (std::size_t i = 0; i < t.branch.entries.size(); ++i) {
    Node n;
    n.entry = t.branch.entries[i];
    if (!n.entry.connection_angle) throw ValidationError("branch entries need connection angles");
    n.parent = i == 0 ? t.branch_at : trunk + i - 1;
    n.port = i == 0 ? Port::kBranch : Port::kOutput;
    nodes.push_back(n);
  }
  std::vector<std::size_t> order;
  for (std::size_t i = trunk; i-- > 0;) order.push_back(i);
  for (std::size_t i = nodes.size(); i-- > trunk;) order.push_back(i);
  return place(std::move(nodes), joint_angles, db, base, order);
}

std::vector<MarkerObservation> exact_observations(const std::vector<PlacedModule>& placed) {
  std::vector<MarkerObservation> out;
  for (const PlacedModule& m : placed) {
    out.push_back({m.record.master_marker_id, m.master});
    if (m.output_bundle && m.record.output_marker_id) {
      out.push_back({*m.record.output_marker_id, *m.output_bundle});
    }
  }
  return out;
}

std::vector<MarkerObservation> synthesize(const std::vector<PlacedModule>& placed,
                                          const ModuleDatabase& db, const SceneConfig& cfg) {
  cfg.validate();
  const auto truth = exact_observations(placed);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<MarkerObservation> out;
  for (const MarkerObservation& o : truth) {
    const Vec3 dt(normal(rng), normal(rng), normal(rng));
    Vec3 axis(normal(rng), normal(rng), normal(rng));
    const double angle = std::abs(normal(rng)) * cfg.sigma_rot;
    const double keep = uniform(rng);
    if (keep < cfg.dropout_prob) continue;
    Pose p = o.pose;
    if (cfg.sigma_rot > 0 && axis.norm() > 1e-12) p = p * Pose::AxisAngle(axis, angle);
    if (cfg.sigma_pos > 0) p = Pose(p.rotation(), p.translation() + cfg.sigma_pos * dt);
    out.push_back({o.marker_id, p});
  }

  if (cfg.spurious_count > 0) {
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    for (const auto& o : truth) {
      lo = lo.cwiseMin(o.pose.translation());
      hi = hi.cwiseMax(o.pose.translation());
    }
    const Vec3 center = (lo + hi) / 2;
    Vec3 half = (hi - lo) / 2 * 1.2;
    const double floor = std::max(1.0, half.maxCoeff() * 0.1);
    half = half.cwiseMax(Vec3::Constant(floor));
    std::set<int> taken;
    std::uniform_int_distribution<int> ids(kSpuriousIdBegin, kSpuriousIdEnd - 1);
    for (int k = 0; k < cfg.spurious_count; ++k) {
      int id;
      do {
        id = ids(rng);
      } while (taken.count(id) || db.lookup_marker(id));
      taken.insert(id);
      const Vec3 t(center.x() + half.x() * (2 * uniform(rng) - 1),
                   center.y() + half.y() * (2 * uniform(rng) - 1),
                   center.z() + half.z() * (2 * uniform(rng) - 1));
      Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
      if (q.norm() < 1e-12) q = Eigen::Quaterniond::Identity();
      q.normalize();
      out.push_back({id, Pose(q.toRotationMatrix(), t)});
    }
  }
  return out;
}

std::vector<MarkerObservation> synthesize(const ChainDescriptor& d,
                                          const std::vector<double>& joint_angles,
                                          const ModuleDatabase& db, const Pose& base,
                                          const SceneConfig& cfg) {
  return synthesize(forward_poses(d, joint_angles, db, base), db, cfg);
}

// ---------------------------------------------------------------------------
// Scene files

std::string scene_to_json(const std::vector<MarkerObservation>& obs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& o : obs) {
    nlohmann::json j = pose_to_json(o.pose);
    j["marker_id"] = o.marker_id;
    arr.push_back(std::move(j));
  }
  return arr.dump(1) + "\n";
}

std::vector<MarkerObservation> scene_from_json(std::string_view text) {
  const nlohmann::json root = parse_json_text(text);
  if (!root.is_array()) throw ParseError("scene: expected a JSON array of observations");
  std::vector<MarkerObservation> out;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const auto& j = root[i];
    const std::string where = "scene[" + std::to_string(i) + "]";
    if (!j.is_object() || j.size() != 3 || !j.contains("marker_id") ||
        !j.at("marker_id").is_number_integer()) {
      throw ParseError(where + ": expected {marker_id, t, q}");
    }
    const int id = j.at("marker_id").get<int>();
    if (id < 0) throw ParseError(where + ": negative marker id");
    nlohmann::json pose = j;
    pose.erase("marker_id");
    try {
      out.push_back({id, pose_from_json(pose, where)});
    } catch (const ValidationError& e) {
      throw ParseError(e.what());
    }
  }
  return out;
}

void write_scene(const std::filesystem::path& path, const std::vector<MarkerObservation>& obs) {
  write_text_file(path, scene_to_json(obs));
}

std::vector<MarkerObservation> read_scene(const std::filesystem::path& path) {
  return scene_from_json(read_text_file(path));
}

}  // namespace chainforge
