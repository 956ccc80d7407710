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

// Kinematic model of an identified robot, written as robot-description XML or
// as its JSON mirror.
//
// Link frames follow the usual robot-description rule: a child link's frame is
// its joint's origin (in the parent link frame) rotated by the joint angle
// about the joint axis. Each link that carries a marker bundle records where
// that bundle sits in the link frame, so forward kinematics reproduces the
// observed marker poses relative to the base.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chainforge/geometry.hpp"
#include "chainforge/identify.hpp"
#include "chainforge/module_db.hpp"

namespace chainforge {

struct ModelLink {
  std::string name;
  std::string module;  // serial of the owning module, empty for none
  double visual_length = 0.0;
  std::optional<int> marker_id;  // bundle carried by this link
  Pose marker_offset;            // link frame -> bundle frame
};

enum class JointType { kRevolute, kFixed };
const char* to_string(JointType t);

struct ModelJoint {
  std::string name;
  JointType type = JointType::kFixed;
  std::string parent;
  std::string child;
  Pose origin;                        // parent link frame -> joint frame at angle 0
  Vec3 axis = Vec3::UnitZ();          // unit, in the joint frame
  std::optional<JointLimits> limits;  // revolute only
  double angle = 0.0;                 // degrees, revolute only
};

struct ModelMetadata {
  std::vector<std::string> descriptions;  // one per branch, base first
  std::string scene_path;
  std::string database_path;
  IdentifyConfig config;
  std::map<std::string, int> bus_ids;  // module serial -> bus id
  std::vector<std::string> warnings;
};

struct RobotModel {
  std::string name = "robot";
  std::vector<ModelLink> links;  // base link first
  std::vector<ModelJoint> joints;
  ModelMetadata metadata;
};

struct ModelOptions {
  std::string name = "robot";
  std::string scene_path;
  std::string database_path;
  IdentifyConfig config;
};

/// Throws InconsistentChain on limit violations or duplicate names.
RobotModel generate_model(const IdentifiedChain& chain, const ModelOptions& opts = {});
RobotModel generate_model(const IdentifiedTree& tree, const ModelOptions& opts = {});

/// Throws InconsistentChain unless the joints form a tree rooted at the first
/// link, names are unique and every revolute angle lies within its limits.
void validate_model(const RobotModel& model);

/// World frames of every link with the base link at the identity.
std::map<std::string, Pose> link_poses(const RobotModel& model);
/// Marker bundle poses relative to the base link, keyed by marker id.
std::map<int, Pose> marker_poses(const RobotModel& model);

enum class ModelFormat { kXml, kJson };
std::optional<ModelFormat> model_format_from_string(std::string_view s);

std::string model_to_xml(const RobotModel& model);
std::string model_to_json(const RobotModel& model);
/// Throws ParseError on malformed input.
RobotModel model_from_xml(std::string_view text);
RobotModel model_from_json(std::string_view text);

/// Throws IoError.
void write_model(const RobotModel& model, const std::filesystem::path& path, ModelFormat format);
/// Format chosen from the extension: ".json" is JSON, anything else XML.
RobotModel read_model(const std::filesystem::path& path);

}  // namespace chainforge
