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

// Module-type catalog, fabricated-module registry, and the connector-frame
// conventions shared by the synthesizer, the optimizing identifier and the
// model generator.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainforge/geometry.hpp"

namespace chainforge {

enum class ModuleKind {
  kJointCollinear,      // I, i: joint axis along the link axis
  kJointPerpendicular,  // T, t: joint axis across the link axis
  kTool,
  kLink,
  kAdapter,
};

std::string_view to_string(ModuleKind kind);
std::optional<ModuleKind> module_kind_from_string(std::string_view s);

inline bool is_joint(ModuleKind k) {
  return k == ModuleKind::kJointCollinear || k == ModuleKind::kJointPerpendicular;
}

struct JointLimits {
  double min_deg = -180.0;
  double max_deg = 180.0;
  bool contains(double deg, double slack = 0.0) const {
    return deg >= min_deg - slack && deg <= max_deg + slack;
  }
  bool operator==(const JointLimits&) const = default;
};

struct ModuleTypeSpec {
  char code = '?';
  ModuleKind kind = ModuleKind::kLink;
  double body_length = 0.0;   // mm, input connector to output connector at theta = 0
  Pose master_offset_input;   // input connector -> master frame
  Pose master_offset_output;  // master frame -> output connector at theta = 0
  std::optional<JointLimits> joint_limits;
  bool invertible = true;
  bool dual_bundle = false;
};

struct ModuleRecord {
  std::string serial;
  char type_code = '?';
  int bus_id = 0;
  int master_marker_id = 0;
  std::optional<int> output_marker_id;

  bool operator==(const ModuleRecord&) const = default;
};

struct MarkerLookup {
  ModuleRecord record;
  bool output_bundle = false;
};

/// Immutable after construction; the constructor enforces every catalog and
/// registry invariant and throws ValidationError naming the offending entry.
class ModuleDatabase {
 public:
  ModuleDatabase(std::vector<ModuleTypeSpec> catalog, std::vector<ModuleRecord> registry);

  const std::vector<ModuleTypeSpec>& catalog() const { return catalog_; }
  const std::vector<ModuleRecord>& registry() const { return registry_; }

  const ModuleTypeSpec* find_type(char code) const;
  /// Throws ValidationError for an unknown code.
  const ModuleTypeSpec& type(char code) const;
  const ModuleTypeSpec& type_of(const ModuleRecord& r) const { return type(r.type_code); }

  /// Records of one type, ordered by master marker id.
  std::vector<ModuleRecord> records_of_type(char code) const;

  std::optional<MarkerLookup> lookup_marker(int marker_id) const;
  std::size_t index_size() const { return index_.size(); }

  std::string codes() const;

 private:
  std::vector<ModuleTypeSpec> catalog_;
  std::vector<ModuleRecord> registry_;
  std::map<int, std::pair<std::size_t, bool>> index_;  // marker -> (registry slot, output bundle)
};

ModuleDatabase load_database(const std::filesystem::path& path);
ModuleDatabase database_from_json(std::string_view text);
std::string database_to_json(const ModuleDatabase& db);
void save_database(const ModuleDatabase& db, const std::filesystem::path& path);

/// The eleven shipped module types with canonical dimensions.
std::vector<ModuleTypeSpec> default_catalog();
/// Default catalog plus `per_type` fabricated instances of every type.
ModuleDatabase default_database(int per_type);

// ---------------------------------------------------------------------------
// Connector-frame convention.
//
// Every connector frame has +y pointing along the chain (parent to child). A
// child's entry frame is its parent's exit frame rotated by the connection
// angle about y. An inverted module is flipped by Rot(z, 180) so its output
// connector becomes the entry and its input connector the exit.

enum class Direction { kUpright, kInverted };

/// Which connector of the parent carries the child. The branch port is the
/// fixed secondary connector along the master z-axis of T-like modules.
enum class Port { kOutput, kBranch };

inline const char* to_string(Direction d) { return d == Direction::kUpright ? "upright" : "inverted"; }
inline const char* to_string(Port p) { return p == Port::kOutput ? "output" : "branch"; }

/// Joint axis in the master frame (y for collinear, z for perpendicular).
Vec3 joint_axis(const ModuleTypeSpec& spec);
Pose joint_rotation(const ModuleTypeSpec& spec, double theta_deg);

/// Entry connector -> master frame.
Pose entry_to_master(const ModuleTypeSpec& spec, Direction d, double theta_deg);
/// Master frame -> exit connector (or the branch port).
Pose master_to_exit(const ModuleTypeSpec& spec, Direction d, double theta_deg,
                    Port port = Port::kOutput);
/// Master frame -> output-bundle frame of a dual-bundle module.
Pose master_to_output_bundle(const ModuleTypeSpec& spec, double theta_deg);
double output_bundle_distance(const ModuleTypeSpec& spec);

bool has_branch_port(const ModuleTypeSpec& spec);

/// The joint sits between the entry connector and the master frame.
inline bool joint_on_entry_side(const ModuleTypeSpec& spec, Direction d) {
  return is_joint(spec.kind) && d == Direction::kInverted;
}
/// The joint sits between the master frame and the exit connector.
inline bool joint_on_exit_side(const ModuleTypeSpec& spec, Direction d, Port port = Port::kOutput) {
  return is_joint(spec.kind) && d == Direction::kUpright && port == Port::kOutput;
}

/// Parent master -> child master for a connected pair.
Pose connection_transform(const ModuleTypeSpec& parent, Direction parent_dir, double parent_theta,
                          Port port, ConnectionAngle c, const ModuleTypeSpec& child,
                          Direction child_dir, double child_theta);

/// Range of master-to-master distances of a directly connected pair at
/// theta = 0 over all connection angles.
struct DistanceRange {
  double min = 0.0;
  double max = 0.0;
};
DistanceRange connected_distance(const ModuleTypeSpec& parent, Direction parent_dir, Port port,
                                 const ModuleTypeSpec& child, Direction child_dir);

/// Largest master-to-master distance of any two directly connected modules.
/// Throws EmptyCatalog.
double max_connected_distance(const std::vector<ModuleTypeSpec>& catalog);
double max_connected_distance(const ModuleDatabase& db);

}  // namespace chainforge
