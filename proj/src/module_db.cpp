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

#include "chainforge/module_db.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "chainforge/errors.hpp"
#include "chainforge/json_io.hpp"

namespace chainforge {

std::string_view to_string(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::kJointCollinear: return "joint-collinear";
    case ModuleKind::kJointPerpendicular: return "joint-perpendicular";
    case ModuleKind::kTool: return "tool";
    case ModuleKind::kLink: return "link";
    case ModuleKind::kAdapter: return "adapter";
  }
  return "?";
}

std::optional<ModuleKind> module_kind_from_string(std::string_view s) {
  for (ModuleKind k : {ModuleKind::kJointCollinear, ModuleKind::kJointPerpendicular,
                       ModuleKind::kTool, ModuleKind::kLink, ModuleKind::kAdapter}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

std::string code_str(char c) { return std::string(1, c); }

void validate_type(const ModuleTypeSpec& t) {
  const std::string who = "type \"" + code_str(t.code) + "\"";
  if (!std::isalpha(static_cast<unsigned char>(t.code))) {
    throw ValidationError(who + ": code must be a single ASCII letter");
  }
  if (t.kind == ModuleKind::kTool ? t.body_length < 0.0 : t.body_length <= 0.0) {
    throw ValidationError(who + ": invalid body_length " + std::to_string(t.body_length));
  }
  if (is_joint(t.kind)) {
    if (!t.joint_limits || !(t.joint_limits->min_deg < t.joint_limits->max_deg)) {
      throw ValidationError(who + ": joint types need joint_limits with min < max");
    }
  } else if (t.joint_limits) {
    throw ValidationError(who + ": joint_limits given for a non-joint type");
  }
  if (t.dual_bundle && t.kind != ModuleKind::kJointCollinear) {
    throw ValidationError(who + ": only joint-collinear types carry two bundles");
  }
}

}  // namespace

ModuleDatabase::ModuleDatabase(std::vector<ModuleTypeSpec> catalog,
                               std::vector<ModuleRecord> registry)
    : catalog_(std::move(catalog)), registry_(std::move(registry)) {
  std::set<char> codes;
  for (const auto& t : catalog_) {
    validate_type(t);
    if (!codes.insert(t.code).second) {
      throw ValidationError("duplicate type code \"" + code_str(t.code) + "\"");
    }
  }
  std::set<std::string> serials;
  for (std::size_t i = 0; i < registry_.size(); ++i) {
    const auto& r = registry_[i];
    const ModuleTypeSpec* spec = find_type(r.type_code);
    if (!spec) {
      throw ValidationError("module \"" + r.serial + "\" references unknown type \"" +
                            code_str(r.type_code) + "\"");
    }
    if (!serials.insert(r.serial).second) {
      throw ValidationError("duplicate serial \"" + r.serial + "\"");
    }
    if (spec->dual_bundle != r.output_marker_id.has_value()) {
      throw ValidationError("module \"" + r.serial + "\": output_marker_id must be present iff " +
                            "the type is dual_bundle");
    }
    auto add = [&](int id, bool output) {
      if (id < 0) throw ValidationError("module \"" + r.serial + "\": negative marker id");
      if (!index_.emplace(id, std::make_pair(i, output)).second) {
        throw ValidationError("duplicate marker id " + std::to_string(id) + " (module \"" +
                              r.serial + "\")");
      }
    };
    add(r.master_marker_id, false);
    if (r.output_marker_id) add(*r.output_marker_id, true);
  }
}

const ModuleTypeSpec* ModuleDatabase::find_type(char code) const {
  for (const auto& t : catalog_) {
    if (t.code == code) return &t;
  }
  return nullptr;
}

const ModuleTypeSpec& ModuleDatabase::type(char code) const {
  const ModuleTypeSpec* t = find_type(code);
  if (!t) throw ValidationError("unknown module type \"" + code_str(code) + "\"");
  return *t;
}

std::vector<ModuleRecord> ModuleDatabase::records_of_type(char code) const {
  std::vector<ModuleRecord> out;
  for (const auto& r : registry_) {
    if (r.type_code == code) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const ModuleRecord& a, const ModuleRecord& b) {
    return a.master_marker_id < b.master_marker_id;
  });
  return out;
}

std::optional<MarkerLookup> ModuleDatabase::lookup_marker(int marker_id) const {
  auto it = index_.find(marker_id);
  if (it == index_.end()) return std::nullopt;
  return MarkerLookup{registry_[it->second.first], it->second.second};
}

std::string ModuleDatabase::codes() const {
  std::string s;
  for (const auto& t : catalog_) s += t.code;
  return s;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

using json = nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError(where + ": unknown key \"" + key + "\"");
    }
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + ": missing key \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": key \"" + key + "\" has the wrong type");
  }
}

char code_from_json(const json& obj, const char* key, const std::string& where) {
  const auto s = required<std::string>(obj, key, where);
  if (s.size() != 1) throw ValidationError(where + ": \"" + key + "\" must be one letter");
  return s[0];
}

ModuleTypeSpec type_from_json(const json& j, std::size_t i) {
  const std::string where = "types[" + std::to_string(i) + "]";
  reject_unknown_keys(j,
                      {"code", "kind", "body_length_mm", "master_offset_input",
                       "master_offset_output", "joint_limits_deg", "invertible", "dual_bundle"},
                      where);
  ModuleTypeSpec t;
  t.code = code_from_json(j, "code", where);
  const auto kind = module_kind_from_string(required<std::string>(j, "kind", where));
  if (!kind) throw ValidationError(where + ": unknown kind");
  t.kind = *kind;
  t.body_length = required<double>(j, "body_length_mm", where);
  t.master_offset_input = pose_from_json(j.at("master_offset_input"), where);
  t.master_offset_output = pose_from_json(j.at("master_offset_output"), where);
  if (j.contains("joint_limits_deg") && !j.at("joint_limits_deg").is_null()) {
    const auto lim = required<std::vector<double>>(j, "joint_limits_deg", where);
    if (lim.size() != 2) throw ValidationError(where + ": joint_limits_deg needs two values");
    t.joint_limits = JointLimits{lim[0], lim[1]};
  }
  t.invertible = required<bool>(j, "invertible", where);
  t.dual_bundle = required<bool>(j, "dual_bundle", where);
  return t;
}

ModuleRecord record_from_json(const json& j, std::size_t i) {
  const std::string where = "modules[" + std::to_string(i) + "]";
  reject_unknown_keys(j, {"serial", "type_code", "bus_id", "master_marker_id", "output_marker_id"},
                      where);
  ModuleRecord r;
  r.serial = required<std::string>(j, "serial", where);
  r.type_code = code_from_json(j, "type_code", where);
  r.bus_id = required<int>(j, "bus_id", where);
  r.master_marker_id = required<int>(j, "master_marker_id", where);
  if (j.contains("output_marker_id") && !j.at("output_marker_id").is_null()) {
    r.output_marker_id = required<int>(j, "output_marker_id", where);
  }
  return r;
}

}  // namespace

ModuleDatabase database_from_json(std::string_view text) {
  const json root = parse_json_text(text);
  reject_unknown_keys(root, {"types", "modules"}, "database");
  if (!root.contains("types") || !root.at("types").is_array() || !root.contains("modules") ||
      !root.at("modules").is_array()) {
    throw ValidationError("database: \"types\" and \"modules\" arrays are required");
  }
  std::vector<ModuleTypeSpec> types;
  for (std::size_t i = 0; i < root.at("types").size(); ++i) {
    types.push_back(type_from_json(root.at("types")[i], i));
  }
  std::vector<ModuleRecord> records;
  for (std::size_t i = 0; i < root.at("modules").size(); ++i) {
    records.push_back(record_from_json(root.at("modules")[i], i));
  }
  return ModuleDatabase(std::move(types), std::move(records));
}

ModuleDatabase load_database(const std::filesystem::path& path) {
  return database_from_json(read_text_file(path));
}

std::string database_to_json(const ModuleDatabase& db) {
  json types = json::array();
  for (const auto& t : db.catalog()) {
    json jt = {{"code", code_str(t.code)},
               {"kind", std::string(to_string(t.kind))},
               {"body_length_mm", t.body_length},
               {"master_offset_input", pose_to_json(t.master_offset_input)},
               {"master_offset_output", pose_to_json(t.master_offset_output)},
               {"invertible", t.invertible},
               {"dual_bundle", t.dual_bundle}};
    jt["joint_limits_deg"] =
        t.joint_limits ? json::array({t.joint_limits->min_deg, t.joint_limits->max_deg}) : json();
    types.push_back(std::move(jt));
  }
  json modules = json::array();
  for (const auto& r : db.registry()) {
    json jr = {{"serial", r.serial},
               {"type_code", code_str(r.type_code)},
               {"bus_id", r.bus_id},
               {"master_marker_id", r.master_marker_id}};
    jr["output_marker_id"] = r.output_marker_id ? json(*r.output_marker_id) : json();
    modules.push_back(std::move(jr));
  }
  return json{{"types", types}, {"modules", modules}}.dump(2) + "\n";
}

void save_database(const ModuleDatabase& db, const std::filesystem::path& path) {
  write_text_file(path, database_to_json(db));
}

// ---------------------------------------------------------------------------
// Shipped catalog

std::vector<ModuleTypeSpec> default_catalog() {
  struct Row {
    char code;
    ModuleKind kind;
    double length;
    std::optional<JointLimits> limits;
    bool invertible;
  };
  const JointLimits collinear{-180.0, 180.0};
  const JointLimits perpendicular{-120.0, 120.0};
  const Row rows[] = {
      {'T', ModuleKind::kJointPerpendicular, 120.0, perpendicular, true},
      {'t', ModuleKind::kJointPerpendicular, 80.0, perpendicular, true},
      {'I', ModuleKind::kJointCollinear, 120.0, collinear, true},
      {'i', ModuleKind::kJointCollinear, 80.0, collinear, true},
      {'G', ModuleKind::kTool, 50.0, std::nullopt, true},
      {'g', ModuleKind::kTool, 50.0, std::nullopt, true},
      {'W', ModuleKind::kTool, 50.0, std::nullopt, true},
      {'S', ModuleKind::kTool, 50.0, std::nullopt, true},
      {'L', ModuleKind::kLink, 150.0, std::nullopt, true},
      {'l', ModuleKind::kLink, 100.0, std::nullopt, true},
      // Adapters step from large to small connectors and only mount one way.
      {'A', ModuleKind::kAdapter, 60.0, std::nullopt, false},
  };
  std::vector<ModuleTypeSpec> out;
  for (const Row& r : rows) {
    ModuleTypeSpec t;
    t.code = r.code;
    t.kind = r.kind;
    t.body_length = r.length;
    t.master_offset_input = Pose::Translation(0, r.length / 2, 0);
    t.master_offset_output = Pose::Translation(0, r.length / 2, 0);
    t.joint_limits = r.limits;
    t.invertible = r.invertible;
    t.dual_bundle = r.kind == ModuleKind::kJointCollinear;
    out.push_back(t);
  }
  return out;
}

ModuleDatabase default_database(int per_type) {
  auto catalog = default_catalog();
  std::vector<ModuleRecord> records;
  int bus = 1;
  for (std::size_t k = 0; k < catalog.size(); ++k) {
    for (int j = 0; j < per_type; ++j) {
      ModuleRecord r;
      r.type_code = catalog[k].code;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%c-%03d", catalog[k].code, j + 1);
      r.serial = buf;
      r.master_marker_id = static_cast<int>(100 * (k + 1)) + 2 * j;
      if (catalog[k].dual_bundle) r.output_marker_id = r.master_marker_id + 1;
      r.bus_id = catalog[k].kind == ModuleKind::kLink || catalog[k].kind == ModuleKind::kAdapter
                     ? 0
                     : bus++;
      records.push_back(r);
    }
  }
  return ModuleDatabase(std::move(catalog), std::move(records));
}

// ---------------------------------------------------------------------------
// Connector frames

namespace {
const Pose kFlip = Pose::RotZ(180.0);
}

Vec3 joint_axis(const ModuleTypeSpec& spec) {
  return spec.kind == ModuleKind::kJointCollinear ? Vec3::UnitY() : Vec3::UnitZ();
}

Pose joint_rotation(const ModuleTypeSpec& spec, double theta_deg) {
  if (!is_joint(spec.kind) || theta_deg == 0.0) return Pose::Identity();
  return Pose::AxisAngle(joint_axis(spec), theta_deg);
}

Pose entry_to_master(const ModuleTypeSpec& spec, Direction d, double theta_deg) {
  if (d == Direction::kUpright) return spec.master_offset_input;
  return kFlip.inverse() * spec.master_offset_output.inverse() *
         joint_rotation(spec, theta_deg).inverse();
}

Pose master_to_exit(const ModuleTypeSpec& spec, Direction d, double theta_deg, Port port) {
  if (port == Port::kBranch) {
    // Fixed to the master link; +y of the port frame is the master z-axis.
    return Pose::RotX(90.0) * Pose::Translation(0, spec.master_offset_output.translation().norm(), 0);
  }
  if (d == Direction::kUpright) return joint_rotation(spec, theta_deg) * spec.master_offset_output;
  return spec.master_offset_input.inverse() * kFlip;
}

double output_bundle_distance(const ModuleTypeSpec& spec) {
  return spec.master_offset_output.translation().norm() / 2.0;
}

Pose master_to_output_bundle(const ModuleTypeSpec& spec, double theta_deg) {
  return Pose::RotY(theta_deg) * Pose::Translation(0, output_bundle_distance(spec), 0);
}

bool has_branch_port(const ModuleTypeSpec& spec) {
  return spec.kind == ModuleKind::kJointPerpendicular;
}

Pose connection_transform(const ModuleTypeSpec& parent, Direction parent_dir, double parent_theta,
                          Port port, ConnectionAngle c, const ModuleTypeSpec& child,
                          Direction child_dir, double child_theta) {
  return master_to_exit(parent, parent_dir, parent_theta, port) * Pose::RotY(degrees(c)) *
         entry_to_master(child, child_dir, child_theta);
}

DistanceRange connected_distance(const ModuleTypeSpec& parent, Direction parent_dir, Port port,
                                 const ModuleTypeSpec& child, Direction child_dir) {
  DistanceRange r{1e300, 0.0};
  for (ConnectionAngle c : kConnectionAngles) {
    const double d =
        connection_transform(parent, parent_dir, 0.0, port, c, child, child_dir, 0.0)
            .translation()
            .norm();
    r.min = std::min(r.min, d);
    r.max = std::max(r.max, d);
  }
  return r;
}

double max_connected_distance(const std::vector<ModuleTypeSpec>& catalog) {
  if (catalog.empty()) throw EmptyCatalog("EmptyCatalog: the module catalog has no types");
  double best = 0.0;
  for (const auto& p : catalog) {
    for (const auto& c : catalog) {
      for (Direction dp : {Direction::kUpright, Direction::kInverted}) {
        if (dp == Direction::kInverted && !p.invertible) continue;
        for (Direction dc : {Direction::kUpright, Direction::kInverted}) {
          if (dc == Direction::kInverted && !c.invertible) continue;
          for (Port port : {Port::kOutput, Port::kBranch}) {
            if (port == Port::kBranch && !has_branch_port(p)) continue;
            best = std::max(best, connected_distance(p, dp, port, c, dc).max);
          }
        }
      }
    }
  }
  return best;
}

double max_connected_distance(const ModuleDatabase& db) {
  return max_connected_distance(db.catalog());
}

}  // namespace chainforge
