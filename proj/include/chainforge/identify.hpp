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

// Kinematic-chain identification from virtual master-marker observations.
//
// Growth starts at a tool module (a leaf) and repeatedly searches the parent of
// the current child among the unclaimed detected modules. Two parent-search
// back ends are provided:
//
//  * geometric: pairwise constraints on distances, y-axis collinearity and
//    axis signs select the parent and the install directions; the connection
//    angle comes from the z-axes of the mated links;
//  * optimization: every neighbor, install direction and connection angle is
//    scored by the weighted pose distance between the observed relative pose
//    and the modeled one, minimized over the parent's joint angle.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chainforge/descriptor.hpp"
#include "chainforge/geometry.hpp"
#include "chainforge/module_db.hpp"
#include "chainforge/synth.hpp"

namespace chainforge {

enum class Method { kGeometric, kOptimization };
const char* to_string(Method m);
std::optional<Method> method_from_string(std::string_view s);

struct IdentifyConfig {
  double epsilon1 = 20.0;  // mm, distance slack
  double epsilon2 = 0.05;  // collinearity slack on |y . u|
  WeightMatrix weights;
  double f_threshold = 0.5;
  Method method = Method::kGeometric;

  /// Throws ValidationError unless epsilon1 < max_distance / 2, 0 < epsilon2 < 1,
  /// f_threshold >= 0 and the weights are positive.
  void validate(double max_distance) const;
};

struct DetectedModule {
  ModuleRecord record;
  ModuleTypeSpec spec;
  Pose master_pose;
  std::optional<Pose> output_pose;
  bool claimed = false;
};

enum class RejectReason { kUnknownMarker, kDuplicate, kOrphan, kIncompleteBundle };
const char* to_string(RejectReason r);

struct RejectedMarker {
  int marker_id = 0;
  RejectReason reason = RejectReason::kUnknownMarker;
};

struct ChainLink {
  DetectedModule module;
  std::optional<ConnectionAngle> connection_angle;  // absent on the base
  Direction direction = Direction::kUpright;
  std::optional<double> joint_angle;  // joint kinds only
  Port port = Port::kOutput;          // connector of the parent carrying this link
};

struct IdentifiedChain {
  std::vector<ChainLink> links;  // base first
  std::vector<RejectedMarker> rejected;
  std::vector<std::string> warnings;

  ChainDescriptor descriptor() const;
  std::string description() const { return serialize(descriptor()); }
};

struct IdentifiedTree {
  std::vector<IdentifiedChain> branches;  // one per tool module, lowest marker id first
  std::vector<RejectedMarker> rejected;
  std::vector<std::string> warnings;

  /// Number of leading links two branches share (same module, base first).
  std::size_t shared_prefix(std::size_t a, std::size_t b) const;
};

struct MarkerValidation {
  std::vector<DetectedModule> modules;  // ordered by master marker id
  std::vector<RejectedMarker> rejected;
};

/// Outcome of the pairwise constraint test.
struct ConstraintResult {
  bool satisfied = false;
  Direction parent_direction = Direction::kUpright;
  Direction child_direction = Direction::kUpright;
  Port port = Port::kOutput;
};

struct ParentMatch {
  std::size_t parent = 0;  // index into the module list handed to the search
  ConnectionAngle connection_angle = ConnectionAngle::kZero;
  Direction parent_direction = Direction::kUpright;
  Port port = Port::kOutput;
  std::optional<double> parent_joint_angle;  // optimization back end only
  std::optional<double> child_joint_angle;   // optimization back end only
  double cost = 0.0;                         // F at the optimum (0 for geometric)
};

struct JointEstimate {
  double angle = 0.0;
  std::optional<std::string> warning;
};

class Identifier {
 public:
  Identifier(const ModuleDatabase& db, IdentifyConfig cfg);

  const IdentifyConfig& config() const { return cfg_; }
  double max_distance() const { return max_distance_; }

  MarkerValidation validate_markers(const std::vector<MarkerObservation>& obs) const;

  /// Indices from `pool` whose master origin lies within max_distance + epsilon1
  /// of the child's, excluding the child itself.
  std::vector<std::size_t> neighbors(const std::vector<DetectedModule>& modules, std::size_t child,
                                     const std::vector<std::size_t>& pool) const;

  /// Pairwise constraint test for one install-direction hypothesis of the
  /// parent. The child's direction is already known during growth.
  bool constraints_hold(const DetectedModule& parent, Direction parent_dir, Port port,
                        const DetectedModule& child, Direction child_dir) const;
  /// Tries every admissible parent direction (and the branch port when
  /// `allow_branch` is set). Reports the first hypothesis that holds.
  ConstraintResult constraint_check(const DetectedModule& parent, const DetectedModule& child,
                                    Direction child_dir, bool allow_branch = false) const;
  /// Connection angle from the z-axes of the mated links.
  ConnectionAngle connection_angle(const DetectedModule& parent, Direction parent_dir, Port port,
                                   const DetectedModule& child, Direction child_dir) const;

  /// Throws AmbiguousParent when more than one candidate passes.
  std::optional<ParentMatch> find_parent_geometric(const std::vector<DetectedModule>& modules,
                                                   std::size_t child, Direction child_dir,
                                                   const std::vector<std::size_t>& pool,
                                                   bool allow_branch = false) const;
  std::optional<ParentMatch> find_parent_optimization(const std::vector<DetectedModule>& modules,
                                                      std::size_t child, Direction child_dir,
                                                      const std::vector<std::size_t>& pool,
                                                      bool allow_branch = false) const;

  /// The minimized objective for one (parent, direction, port, angle) choice at
  /// a fixed parent joint angle; the child's own joint angle, when it sits on
  /// its entry side, is taken from its bundles or solved in closed form.
  double objective(const DetectedModule& parent, Direction parent_dir, Port port,
                   ConnectionAngle c, double parent_theta, const DetectedModule& child,
                   Direction child_dir, double* child_theta_out = nullptr) const;

  /// Joint angle of `link` from its bundles (collinear joints) or from the
  /// direction to the neighbor on its joint side (perpendicular joints).
  /// `child` is the next link toward the chain end, `parent` the previous one.
  /// Throws NonCollinearBundles or LimitExceeded (more than 2 degrees past a limit).
  JointEstimate estimate_joint_angle(const ChainLink& link, const ChainLink* parent,
                                     const ChainLink* child) const;

  IdentifiedChain build_chain(const std::vector<MarkerObservation>& obs) const;
  IdentifiedTree build_tree(const std::vector<MarkerObservation>& obs) const;

 private:
  struct Branch {
    std::vector<ChainLink> links;  // base first
    std::vector<std::size_t> members;
  };
  /// `done` holds branches already grown; a module reached through its branch
  /// port that one of them contains inherits its placement and base-ward links.
  /// With `defer_forks`, reaching any other such module returns nothing.
  std::optional<Branch> grow(const std::vector<DetectedModule>& modules, std::size_t start,
                             std::vector<std::size_t> pool, bool allow_branch,
                             const std::vector<Branch>* done = nullptr,
                             bool defer_forks = false) const;
  std::optional<ParentMatch> find_parent(const std::vector<DetectedModule>& modules,
                                         std::size_t child, Direction child_dir,
                                         const std::vector<std::size_t>& pool,
                                         bool allow_branch) const;
  void estimate_all(std::vector<ChainLink>& links, std::vector<std::string>& warnings) const;
  /// Joint-angle observation without the limit check.
  JointEstimate observe_joint_angle(const ChainLink& link, const ChainLink* parent,
                                    const ChainLink* child) const;

  const ModuleDatabase& db_;
  IdentifyConfig cfg_;
  double max_distance_;
  double cos_tol_;    // 1 - epsilon2
  double perp_tol_;   // sin of the same angle
  double angle_tol_;  // degrees
};

MarkerValidation validate_markers(const std::vector<MarkerObservation>& obs,
                                  const ModuleDatabase& db);
IdentifiedChain build_chain(const std::vector<MarkerObservation>& obs, const ModuleDatabase& db,
                            const IdentifyConfig& cfg = {});
IdentifiedTree build_tree(const std::vector<MarkerObservation>& obs, const ModuleDatabase& db,
                          const IdentifyConfig& cfg = {});

}  // namespace chainforge
