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

// Forward-kinematics scene synthesis: places virtual master-marker poses for a
// described robot and perturbs them with a seeded noise model.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chainforge/descriptor.hpp"
#include "chainforge/geometry.hpp"
#include "chainforge/module_db.hpp"

namespace chainforge {

struct MarkerObservation {
  int marker_id = 0;
  Pose pose;
};

struct SceneConfig {
  double sigma_pos = 0.0;     // mm, per axis
  double sigma_rot = 0.0;     // degrees, magnitude of a random-axis rotation
  double dropout_prob = 0.0;  // per marker
  int spurious_count = 0;
  std::uint64_t seed = 0;

  /// Throws ValidationError on negative parameters or a probability outside [0, 1].
  void validate() const;
};

/// Two-branch tree: `trunk` is a full base-to-end chain; `branch` hangs off the
/// branch port of trunk entry `branch_at`. Every branch entry, including the
/// first, carries a connection angle.
struct TreeDescriptor {
  ChainDescriptor trunk;
  std::size_t branch_at = 0;
  ChainDescriptor branch;
};

/// Ground truth for one placed module.
struct PlacedModule {
  ModuleRecord record;
  Direction direction = Direction::kUpright;
  std::optional<double> joint_angle;  // joint kinds only
  std::optional<ConnectionAngle> connection_angle;
  std::optional<std::size_t> parent;  // index into the placement list
  Port port = Port::kOutput;
  Pose master;
  std::optional<Pose> output_bundle;
};

/// Places every module of a chain. `joint_angles` lists one angle per joint
/// entry in chain order; `base` is the world pose of the base module's master.
/// Registry instances are assigned from the chain end toward the base, lowest
/// marker id first. Throws LimitViolation, MissingInstance, NotInvertible,
/// ValidationError (bad angle count or tool placement).
std::vector<PlacedModule> forward_poses(const ChainDescriptor& d,
                                        const std::vector<double>& joint_angles,
                                        const ModuleDatabase& db, const Pose& base);
/// Joint angles: trunk joints first, then branch joints.
std::vector<PlacedModule> forward_poses(const TreeDescriptor& t,
                                        const std::vector<double>& joint_angles,
                                        const ModuleDatabase& db, const Pose& base);

/// Noise-free observations of a placement, masters before output bundles per module.
std::vector<MarkerObservation> exact_observations(const std::vector<PlacedModule>& placed);

std::vector<MarkerObservation> synthesize(const std::vector<PlacedModule>& placed,
                                          const ModuleDatabase& db, const SceneConfig& cfg);
std::vector<MarkerObservation> synthesize(const ChainDescriptor& d,
                                          const std::vector<double>& joint_angles,
                                          const ModuleDatabase& db, const Pose& base,
                                          const SceneConfig& cfg);

/// Spurious marker ids are drawn from this half-open range.
inline constexpr int kSpuriousIdBegin = 1000000;
inline constexpr int kSpuriousIdEnd = 1010000;

std::string scene_to_json(const std::vector<MarkerObservation>& obs);
/// Throws ParseError on malformed or schema-violating text.
std::vector<MarkerObservation> scene_from_json(std::string_view text);
void write_scene(const std::filesystem::path& path, const std::vector<MarkerObservation>& obs);
std::vector<MarkerObservation> read_scene(const std::filesystem::path& path);

/// Number of joint-kind entries in a chain.
std::size_t joint_count(const ChainDescriptor& d, const ModuleDatabase& db);

}  // namespace chainforge
