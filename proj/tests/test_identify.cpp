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

#include <algorithm>
#include <random>
#include <set>

#include "chainforge/errors.hpp"
#include "chainforge/identify.hpp"
#include "doctest.h"
#include "support.hpp"

namespace chainforge {
namespace {

const ModuleDatabase& db() {
  static const ModuleDatabase d = default_database(4);
  return d;
}

constexpr const char* kReferenceChain = "I-T'0-T'0-A0-t0-i0-g0";
const std::vector<double> kReferenceAngles{15, -30, 45, 60, -75};

std::vector<MarkerObservation> reference_scene(int spurious = 0, std::uint64_t seed = 1) {
  return synthesize(parse(kReferenceChain), kReferenceAngles, db(), Pose::Identity(),
                    SceneConfig{0, 0, 0, spurious, seed});
}

IdentifyConfig with_method(Method m) {
  IdentifyConfig c;
  c.method = m;
  return c;
}

std::vector<std::string> serials(const IdentifiedChain& c) {
  std::vector<std::string> out;
  for (const auto& l : c.links) out.push_back(l.module.record.serial);
  return out;
}

std::size_t index_of(const std::vector<DetectedModule>& mods, char code) {
  for (std::size_t i = 0; i < mods.size(); ++i) {
    if (mods[i].record.type_code == code) return i;
  }
  FAIL("no module of type " << code);
  return 0;
}

TEST_CASE("configuration validation") {
  CHECK_NOTHROW(IdentifyConfig{}.validate(150));
  IdentifyConfig c;
  c.epsilon1 = 75;
  CHECK_THROWS_AS(c.validate(150), ValidationError);
  c = {};
  c.epsilon2 = 0;
  CHECK_THROWS_AS(c.validate(150), ValidationError);
  c = {};
  c.f_threshold = -1;
  CHECK_THROWS_AS(c.validate(150), ValidationError);
  CHECK(method_from_string("optimization") == Method::kOptimization);
  CHECK_FALSE(method_from_string("magic"));
}

TEST_CASE("marker validation") {
  const Identifier id(db(), {});
  SUBCASE("reference scene with two spurious markers") {
    const auto v = id.validate_markers(reference_scene(2));
    CHECK(v.modules.size() == 7);
    REQUIRE(v.rejected.size() == 2);
    for (const auto& r : v.rejected) CHECK(r.reason == RejectReason::kUnknownMarker);
    CHECK(std::is_sorted(v.modules.begin(), v.modules.end(), [](const auto& a, const auto& b) {
      return a.record.master_marker_id < b.record.master_marker_id;
    }));
    for (const auto& m : v.modules) CHECK(m.output_pose.has_value() == m.spec.dual_bundle);
  }
  SUBCASE("empty input") {
    const auto v = id.validate_markers({});
    CHECK(v.modules.empty());
    CHECK(v.rejected.empty());
  }
  SUBCASE("duplicates and lone output bundles") {
    auto obs = reference_scene();
    const MarkerObservation tool = obs.back();
    obs.push_back(tool);
    // Drop the master of the first dual-bundle module, keep its output bundle.
    const auto dual = std::find_if(obs.begin(), obs.end(), [](const MarkerObservation& o) {
      const auto l = db().lookup_marker(o.marker_id);
      return l && l->output_bundle;
    });
    REQUIRE(dual != obs.end());
    const int out_id = dual->marker_id;
    std::erase_if(obs, [&](const MarkerObservation& o) { return o.marker_id == out_id - 1; });
    const auto v = id.validate_markers(obs);
    CHECK(v.modules.size() == 6);
    REQUIRE(v.rejected.size() == 2);
    std::set<std::pair<int, RejectReason>> got;
    for (const auto& r : v.rejected) got.insert({r.marker_id, r.reason});
    CHECK(got.count({tool.marker_id, RejectReason::kDuplicate}));
    CHECK(got.count({out_id, RejectReason::kIncompleteBundle}));
  }
}

TEST_CASE("neighbor search") {
  const Identifier id(db(), {});
  const auto v = id.validate_markers(reference_scene());
  const std::size_t g = index_of(v.modules, 'g');
  std::vector<std::size_t> pool(v.modules.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  const auto near = id.neighbors(v.modules, g, pool);
  CHECK(std::find(near.begin(), near.end(), g) == near.end());
  CHECK(std::find(near.begin(), near.end(), index_of(v.modules, 'i')) != near.end());
  // Neighbors are exactly the modules within reach.
  for (std::size_t i : pool) {
    if (i == g) continue;
    const double d = (v.modules[i].master_pose.translation() -
                      v.modules[g].master_pose.translation()).norm();
    const bool listed = std::find(near.begin(), near.end(), i) != near.end();
    CHECK(listed == (d <= id.max_distance() + id.config().epsilon1));
  }
}

TEST_CASE("pairwise constraints") {
  const Identifier id(db(), {});
  const auto v = id.validate_markers(
      exact_observations(forward_poses(parse("L-G0"), {}, db(), Pose::Identity())));
  const auto& l = v.modules[index_of(v.modules, 'L')];
  const auto& g = v.modules[index_of(v.modules, 'G')];
  const auto r = id.constraint_check(l, g, Direction::kUpright);
  CHECK(r.satisfied);
  CHECK(r.parent_direction == Direction::kUpright);
  CHECK(r.port == Port::kOutput);
  CHECK(id.connection_angle(l, r.parent_direction, r.port, g, Direction::kUpright) ==
        ConnectionAngle::kZero);
  CHECK_FALSE(id.constraint_check(g, l, Direction::kUpright).satisfied);
}

TEST_CASE("the reference chain's end attaches to the i-module") {
  for (Method m : {Method::kGeometric, Method::kOptimization}) {
    CAPTURE(to_string(m));
    const Identifier id(db(), with_method(m));
    const auto v = id.validate_markers(reference_scene());
    const std::size_t g = index_of(v.modules, 'g');
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < v.modules.size(); ++i) {
      if (i != g) pool.push_back(i);
    }
    const auto match = m == Method::kGeometric
                           ? id.find_parent_geometric(v.modules, g, Direction::kUpright, pool)
                           : id.find_parent_optimization(v.modules, g, Direction::kUpright, pool);
    REQUIRE(match);
    CHECK(match->parent == index_of(v.modules, 'i'));
    CHECK(match->connection_angle == ConnectionAngle::kZero);
    CHECK(match->parent_direction == Direction::kUpright);
  }
}

TEST_CASE("overlapping candidates are ambiguous") {
  auto obs = exact_observations(forward_poses(parse("L-G0"), {}, db(), Pose::Identity()));
  auto other = forward_poses(parse("L-G0"), {}, db(), Pose::Translation(1, 0, 0));
  // Use a different L so both parents are registered instances.
  const auto second_l = db().records_of_type('L')[1];
  obs.push_back({second_l.master_marker_id, other[0].master});
  CHECK_THROWS_AS(build_chain(obs, db()), AmbiguousParent);
}

TEST_CASE("objective") {
  const Identifier id(db(), with_method(Method::kOptimization));
  const auto placed = forward_poses(parse("L-T90-G0"), {37}, db(), Pose::Identity());
  const auto v = id.validate_markers(exact_observations(placed));
  const auto& t = v.modules[index_of(v.modules, 'T')];
  const auto& g = v.modules[index_of(v.modules, 'G')];
  const double at_truth =
      id.objective(t, Direction::kUpright, Port::kOutput, ConnectionAngle::kZero, 37, g, Direction::kUpright);
  CHECK(at_truth == doctest::Approx(0.0).epsilon(1e-9));
  for (double d : {-1.0, 1.0}) {
    CHECK(id.objective(t, Direction::kUpright, Port::kOutput, ConnectionAngle::kZero, 37 + d, g,
                       Direction::kUpright) > at_truth);
  }
  for (ConnectionAngle c : {ConnectionAngle::kPlus90, ConnectionAngle::k180, ConnectionAngle::kMinus90}) {
    CHECK(id.objective(t, Direction::kUpright, Port::kOutput, c, 37, g, Direction::kUpright) > 0.1);
  }
}

TEST_CASE("collinear joint estimate") {
  const auto obs = exact_observations(forward_poses(parse("I-G0"), {37}, db(), Pose::Identity()));
  for (Method m : {Method::kGeometric, Method::kOptimization}) {
    const auto chain = build_chain(obs, db(), with_method(m));
    REQUIRE(chain.links.size() == 2);
    REQUIRE(chain.links[0].joint_angle);
    CHECK(*chain.links[0].joint_angle == doctest::Approx(37.0).epsilon(1e-6));
  }
}

TEST_CASE("a lone tool is a one-link chain") {
  const auto obs = exact_observations(forward_poses(parse("G"), {}, db(), Pose::Identity()));
  const auto chain = build_chain(obs, db());
  CHECK(chain.links.size() == 1);
  CHECK(chain.description() == "G");
  CHECK_THROWS_AS(build_chain({}, db()), NoToolModule);
  const auto no_tool = exact_observations(forward_poses(parse("L-I0-G0"), {0}, db(), Pose::Identity()));
  CHECK_THROWS_AS(build_chain({no_tool[0], no_tool[1]}, db()), NoToolModule);
}

TEST_CASE("the reference chain is recovered with and without spurious markers") {
  for (Method m : {Method::kGeometric, Method::kOptimization}) {
    CAPTURE(to_string(m));
    const auto clean = build_chain(reference_scene(), db(), with_method(m));
    CHECK(clean.description() == kReferenceChain);
    const auto angles = testing::joint_angles_of(clean);
    REQUIRE(angles.size() == kReferenceAngles.size());
    for (std::size_t j = 0; j < angles.size(); ++j) {
      CHECK(testing::angle_error(angles[j], kReferenceAngles[j]) < 1e-3);
    }
    const auto dirty = build_chain(reference_scene(3, 17), db(), with_method(m));
    CHECK(dirty.description() == clean.description());
    CHECK(testing::joint_angles_of(dirty) == angles);
    CHECK(dirty.rejected.size() == 3);
  }
}

TEST_CASE("unreached modules are orphans") {
  auto obs = reference_scene();
  auto far = exact_observations(forward_poses(parse("L"), {}, db(), Pose::Translation(5000, 0, 0)));
  obs.insert(obs.end(), far.begin(), far.end());
  const auto chain = build_chain(obs, db());
  CHECK(chain.description() == kReferenceChain);
  REQUIRE(chain.rejected.size() == 1);
  CHECK(chain.rejected[0].reason == RejectReason::kOrphan);
  CHECK(chain.rejected[0].marker_id == far[0].marker_id);
}

TEST_CASE("random chains: exact recovery and tree agreement") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(2, 8);
  const auto big = default_database(10);
  int exact = 0;
  constexpr int kTrials = 100;
  for (int k = 0; k < kTrials; ++k) {
    const auto rc = testing::random_chain(rng, big, len(rng));
    const auto obs = exact_observations(forward_poses(rc.descriptor, rc.joint_angles, big,
                                                      testing::random_pose(rng)));
    try {
      const auto chain = build_chain(obs, big);
      if (chain.description() != serialize(rc.descriptor)) continue;
      ++exact;
      const auto tree = build_tree(obs, big);
      REQUIRE(tree.branches.size() == 1);
      CHECK(tree.branches[0].description() == chain.description());
      CHECK(testing::joint_angles_of(tree.branches[0]) == testing::joint_angles_of(chain));
    } catch (const AmbiguousParent&) {
      // Rare exact coincidences; counted as misses.
    }
  }
  CHECK(exact >= kTrials - 2);
}

TEST_CASE("two-branch trees") {
  TreeDescriptor t{parse("L-T0-I0-G0"), 1, parse("l-g90")};
  t.branch.entries[0].connection_angle = ConnectionAngle::kPlus90;
  const auto obs =
      exact_observations(forward_poses(t, {40, -20}, db(), Pose::Translation(10, 20, 30)));
  const auto tree = build_tree(obs, db());
  REQUIRE(tree.branches.size() == 2);
  std::set<std::string> got{tree.branches[0].description(), tree.branches[1].description()};
  CHECK(got.count("L-T0-I0-G0"));
  CHECK(got.count("L-T0-l90-g90"));
  CHECK(tree.shared_prefix(0, 1) == 2);
  CHECK(tree.rejected.empty());
  // The shared T angle is taken from the branch that observes it.
  for (const auto& b : tree.branches) {
    REQUIRE(b.links[1].joint_angle);
    CHECK(*b.links[1].joint_angle == doctest::Approx(40.0).epsilon(1e-6));
  }
}

TEST_CASE("random two-branch trees") {
  const auto big = default_database(10);
  for (Method m : {Method::kGeometric, Method::kOptimization}) {
    CAPTURE(to_string(m));
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> len(2, 7);
    for (int k = 0; k < 40; ++k) {
      const auto rt = testing::random_tree(rng, big, len(rng));
      const auto obs = exact_observations(
          forward_poses(rt.tree, rt.joint_angles, big, testing::random_pose(rng)));
      const auto tree = build_tree(obs, big, with_method(m));
      REQUIRE(tree.branches.size() == 2);
      std::multiset<std::string> got, want(rt.branch_descriptions.begin(),
                                           rt.branch_descriptions.end());
      for (const auto& b : tree.branches) got.insert(b.description());
      CHECK(got == want);
      CHECK(tree.shared_prefix(0, 1) == rt.tree.branch_at + 1);
    }
  }
}

TEST_CASE("a bi-directional robot yields reversed branches") {
  const auto obs = exact_observations(forward_poses(parse("G'-I0-T'0-L0-T'90-T180-I'0-G0"),
                                                    {20, 30, 40, 50, 60}, db(), Pose::Identity()));
  const auto tree = build_tree(obs, db());
  REQUIRE(tree.branches.size() == 2);
  auto a = serials(tree.branches[0]);
  const auto b = serials(tree.branches[1]);
  std::reverse(a.begin(), a.end());
  CHECK(a == b);
}

TEST_CASE("growth claims each module once") {
  const auto chain = build_chain(reference_scene(), db());
  const auto s = serials(chain);
  CHECK(std::set<std::string>(s.begin(), s.end()).size() == s.size());
  for (const auto& l : chain.links) CHECK(l.module.claimed);
}

}  // namespace
}  // namespace chainforge
