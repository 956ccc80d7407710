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

// Random robot generators shared by the unit and acceptance tests.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "chainforge/descriptor.hpp"
#include "chainforge/geometry.hpp"
#include "chainforge/module_db.hpp"
#include "chainforge/synth.hpp"

namespace chainforge::testing {

/// Any codes, flags and angles; only the grammar is respected.
inline ChainDescriptor random_descriptor(std::mt19937_64& rng) {
  const std::string codes(kDefaultCodes);
  std::uniform_int_distribution<int> len(1, 12), code(0, static_cast<int>(codes.size()) - 1),
      angle(0, 3);
  std::bernoulli_distribution coin(0.5);
  ChainDescriptor d;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    ChainEntry e{codes[code(rng)], coin(rng), std::nullopt};
    if (i > 0) e.connection_angle = kConnectionAngles[angle(rng)];
    d.entries.push_back(e);
  }
  return d;
}

struct RandomChain {
  ChainDescriptor descriptor;
  std::vector<double> joint_angles;
};

inline ConnectionAngle random_angle(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 3);
  return kConnectionAngles[pick(rng)];
}

inline Pose random_pose(std::mt19937_64& rng, double extent = 500.0) {
  std::uniform_real_distribution<double> pos(-extent, extent);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return Pose::FromQuaternion(Vec3(pos(rng), pos(rng), pos(rng)), {q[0], q[1], q[2], q[3]});
}

/// Base is a non-tool module, interior modules are non-tools, the end is an
/// upright tool. Joint angles lie within limits shrunk by `margin` degrees; a
/// perpendicular joint inverted at the base gets 0 since nothing observes it.
inline RandomChain random_chain(std::mt19937_64& rng, const ModuleDatabase& db, int length,
                                double margin = 0.0) {
  std::vector<char> inner, tools;
  for (const ModuleTypeSpec& s : db.catalog()) {
    (s.kind == ModuleKind::kTool ? tools : inner).push_back(s.code);
  }
  std::uniform_int_distribution<std::size_t> pick_inner(0, inner.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_tool(0, tools.size() - 1);
  std::bernoulli_distribution coin(0.5);
  RandomChain out;
  for (int i = 0; i < length; ++i) {
    ChainEntry e;
    const bool last = i == length - 1;
    e.type_code = last ? tools[pick_tool(rng)] : inner[pick_inner(rng)];
    const ModuleTypeSpec& spec = db.type(e.type_code);
    e.inverted = !last && spec.invertible && coin(rng);
    if (i > 0) e.connection_angle = random_angle(rng);
    if (is_joint(spec.kind)) {
      const JointLimits& lim = *spec.joint_limits;
      std::uniform_real_distribution<double> theta(lim.min_deg + margin, lim.max_deg - margin);
      const bool unobservable = i == 0 && e.inverted && spec.kind == ModuleKind::kJointPerpendicular;
      out.joint_angles.push_back(unobservable ? 0.0 : theta(rng));
    }
    out.descriptor.entries.push_back(e);
  }
  return out;
}

struct RandomTree {
  TreeDescriptor tree;
  std::vector<double> joint_angles;  // trunk joints, then branch joints
  std::vector<std::string> branch_descriptions;  // trunk, then the forked branch
};

/// Two-branch tree forking at a perpendicular joint of a random trunk. The
/// branch holds 1 to `max_branch` modules and ends in a tool.
inline RandomTree random_tree(std::mt19937_64& rng, const ModuleDatabase& db, int trunk_length,
                              int max_branch = 4, double margin = 0.0) {
  for (;;) {
    RandomChain trunk = random_chain(rng, db, trunk_length, margin);
    std::vector<std::size_t> forks;
    for (std::size_t i = 0; i + 1 < trunk.descriptor.entries.size(); ++i) {
      if (has_branch_port(db.type(trunk.descriptor.entries[i].type_code))) forks.push_back(i);
    }
    if (forks.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, forks.size() - 1);
    std::uniform_int_distribution<int> len(1, max_branch);
    RandomChain branch = random_chain(rng, db, len(rng), margin);
    if (branch.descriptor.entries.front().inverted) continue;  // an inverted base is not a child
    branch.descriptor.entries.front().connection_angle = random_angle(rng);
    RandomTree out;
    out.tree = {trunk.descriptor, forks[pick(rng)], branch.descriptor};
    out.joint_angles = trunk.joint_angles;
    out.joint_angles.insert(out.joint_angles.end(), branch.joint_angles.begin(),
                            branch.joint_angles.end());
    ChainDescriptor forked;
    forked.entries.assign(trunk.descriptor.entries.begin(),
                          trunk.descriptor.entries.begin() + out.tree.branch_at + 1);
    forked.entries.insert(forked.entries.end(), branch.descriptor.entries.begin(),
                          branch.descriptor.entries.end());
    out.branch_descriptions = {serialize(trunk.descriptor), serialize(forked)};
    return out;
  }
}

/// Joint angles of an identified chain, in chain order.
template <typename Chain>
std::vector<double> joint_angles_of(const Chain& chain) {
  std::vector<double> out;
  for (const auto& link : chain.links) {
    if (link.joint_angle) out.push_back(*link.joint_angle);
  }
  return out;
}

inline double angle_error(double a, double b) { return std::abs(wrap_degrees(a - b)); }

}  // namespace chainforge::testing
