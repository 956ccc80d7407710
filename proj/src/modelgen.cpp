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

#include "chainforge/modelgen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "chainforge/errors.hpp"
#include "chainforge/json_io.hpp"

namespace chainforge {

const char* to_string(JointType t) { return t == JointType::kRevolute ? "revolute" : "fixed"; }

std::optional<ModelFormat> model_format_from_string(std::string_view s) {
  if (s == "xml") return ModelFormat::kXml;
  if (s == "json") return ModelFormat::kJson;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Generation
//
// Every joint splits its module into a proximal body (toward the base) and a
// distal body. An upright joint carries its master on the proximal body, an
// inverted one on the distal body. A body gets a link named after the module
// whose master it carries, or "<serial>_out" when it carries none.

namespace {

struct Placed {
  const ChainLink* link = nullptr;
  Pose master;                         // ideal world pose, base master at identity
  std::string master_link;
  std::optional<std::string> distal;   // upright joints: link of the distal body
};

class Builder {
 public:
  explicit Builder(RobotModel& model) : model_(model) {}

  void place(const ChainLink& link, const ChainLink* parent) {
    const std::string& serial = link.module.record.serial;
    if (placed_.count(serial)) return;
    const ModuleTypeSpec& spec = link.module.spec;
    const double theta = link.joint_angle.value_or(0.0);

    Placed self;
    self.link = &link;
    Placed* up = nullptr;
    if (parent) {
      up = &placed_.at(parent->module.record.serial);
      const ChainLink& pl = *up->link;
      self.master = up->master *
                    connection_transform(pl.module.spec, pl.direction, pl.joint_angle.value_or(0.0),
                                         link.port, link.connection_angle.value_or(ConnectionAngle::kZero),
                                         spec, link.direction, theta);
    }
    // Where the new module is mated.
    const bool onto_distal = up && link.port == Port::kOutput &&
                             joint_on_exit_side(up->link->module.spec, up->link->direction);

    const bool dual = spec.dual_bundle;
    const std::string master_name = dual ? serial + "_in" : serial;
    const std::string out_name = serial + "_out";
    const double len = dual ? spec.body_length / 2 : spec.body_length;
    const auto& rec = link.module.record;
    const std::optional<Pose> bundle =
        dual ? std::optional<Pose>(self.master * master_to_output_bundle(spec, theta)) : std::nullopt;

    if (joint_on_entry_side(spec, link.direction)) {
      const Pose k = self.master * joint_rotation(spec, theta);  // joint frame at angle 0
      std::string proximal;
      if (dual) {
        proximal = out_name;
        attach(up, onto_distal, out_name, serial, len, k, rec.output_marker_id, bundle);
      } else if (up && !onto_distal) {
        proximal = up->master_link;
      } else {
        proximal = out_name;
        attach(up, onto_distal, out_name, serial, 0.0, k, std::nullopt, std::nullopt);
      }
      add_link(master_name, serial, len, self.master, rec.master_marker_id, self.master);
      add_revolute(link, proximal, master_name, k, -joint_axis(spec), theta);
    } else {
      attach(up, onto_distal, master_name, serial, len, self.master, rec.master_marker_id,
             self.master);
      if (dual && joint_on_exit_side(spec, link.direction)) {
        add_link(out_name, serial, len, self.master * joint_rotation(spec, theta),
                 rec.output_marker_id, bundle);
        add_revolute(link, master_name, out_name, self.master, joint_axis(spec), theta);
        self.distal = out_name;
      }
    }
    self.master_link = master_name;
    placed_.emplace(serial, self);
  }

  /// Gives upright joints without a distal child a link so the joint survives.
  void finish() {
    for (auto& [serial, p] : placed_) {
      if (!joint_on_exit_side(p.link->module.spec, p.link->direction) || p.distal) continue;
      attach(&p, true, serial + "_out", serial, 0.0, p.master, std::nullopt, std::nullopt);
    }
  }

 private:
  /// Adds a link and connects it to the body it is mated with.
  void attach(Placed* up, bool onto_distal, const std::string& name, const std::string& module,
              double len, const Pose& frame, std::optional<int> marker,
              const std::optional<Pose>& marker_pose) {
    if (!up) {
      add_link(name, module, len, frame, marker, marker_pose);
      return;
    }
    if (onto_distal && !up->distal) {
      // The new link is the distal body of the parent's joint.
      const ChainLink& pl = *up->link;
      const Pose zero = up->master;
      const Pose at = zero * joint_rotation(pl.module.spec, pl.joint_angle.value_or(0.0));
      add_link(name, module, len, at, marker, marker_pose);
      add_revolute(pl, up->master_link, name, zero, joint_axis(pl.module.spec),
                   pl.joint_angle.value_or(0.0));
      up->distal = name;
      return;
    }
    add_link(name, module, len, frame, marker, marker_pose);
    add_fixed(onto_distal ? *up->distal : up->master_link, name);
  }

  void add_link(const std::string& name, const std::string& module, double len, const Pose& frame,
                std::optional<int> marker, const std::optional<Pose>& marker_pose) {
    if (!frames_.emplace(name, frame).second) {
      throw InconsistentChain("InconsistentChain: duplicate link name \"" + name + "\"");
    }
    ModelLink l;
    l.name = name;
    l.module = module;
    l.visual_length = len;
    if (marker && marker_pose) {
      l.marker_id = marker;
      l.marker_offset = relative(frame, *marker_pose);
    }
    model_.links.push_back(std::move(l));
  }

  void add_fixed(const std::string& parent, const std::string& child) {
    ModelJoint j;
    j.name = parent + "_to_" + child;
    j.type = JointType::kFixed;
    j.parent = parent;
    j.child = child;
    j.origin = relative(frames_.at(parent), frames_.at(child));
    model_.joints.push_back(std::move(j));
  }

  void add_revolute(const ChainLink& owner, const std::string& parent, const std::string& child,
                    const Pose& joint_frame, const Vec3& axis, double theta) {
    ModelJoint j;
    j.name = owner.module.record.serial + "_joint";
    j.type = JointType::kRevolute;
    j.parent = parent;
    j.child = child;
    j.origin = relative(frames_.at(parent), joint_frame);
    j.axis = axis;  // in the joint frame
    j.limits = owner.module.spec.joint_limits;
    j.angle = theta;
    if (j.limits && !j.limits->contains(theta)) {
      throw InconsistentChain("InconsistentChain: " + j.name + " angle " + std::to_string(theta) +
                              " outside its limits");
    }
    model_.joints.push_back(std::move(j));
  }

  RobotModel& model_;
  std::map<std::string, Placed> placed_;
  std::map<std::string, Pose> frames_;  // link name -> ideal world frame
};

void fill_metadata(RobotModel& m, const ModelOptions& opts) {
  m.name = opts.name;
  m.metadata.scene_path = opts.scene_path;
  m.metadata.database_path = opts.database_path;
  m.metadata.config = opts.config;
}

void record_modules(RobotModel& m, const IdentifiedChain& chain) {
  for (const ChainLink& l : chain.links) {
    m.metadata.bus_ids[l.module.record.serial] = l.module.record.bus_id;
  }
}

}  // namespace

RobotModel generate_model(const IdentifiedChain& chain, const ModelOptions& opts) {
  RobotModel m;
  fill_metadata(m, opts);
  Builder b(m);
  for (std::size_t i = 0; i < chain.links.size(); ++i) {
    b.place(chain.links[i], i > 0 ? &chain.links[i - 1] : nullptr);
  }
  b.finish();
  m.metadata.descriptions.push_back(chain.description());
  m.metadata.warnings = chain.warnings;
  record_modules(m, chain);
  validate_model(m);
  return m;
}

RobotModel generate_model(const IdentifiedTree& tree, const ModelOptions& opts) {
  RobotModel m;
  fill_metadata(m, opts);
  // A bi-directional robot shows up once from each end; the second reading
  // adds a description but no structure.
  auto serials = [](const IdentifiedChain& c) {
    std::vector<std::string> s;
    for (const ChainLink& l : c.links) s.push_back(l.module.record.serial);
    return s;
  };
  std::vector<const IdentifiedChain*> structural;
  for (const IdentifiedChain& br : tree.branches) {
    auto rev = serials(br);
    std::reverse(rev.begin(), rev.end());
    const bool reversal = std::any_of(structural.begin(), structural.end(),
                                      [&](const IdentifiedChain* c) { return serials(*c) == rev; });
    if (!reversal) structural.push_back(&br);
  }
  for (const IdentifiedChain* br : structural) {
    if (br->links.front().module.record.serial !=
        structural.front()->links.front().module.record.serial) {
      throw InconsistentChain("InconsistentChain: branches do not share a base module");
    }
  }
  Builder b(m);
  for (const IdentifiedChain* br : structural) {
    for (std::size_t i = 0; i < br->links.size(); ++i) {
      b.place(br->links[i], i > 0 ? &br->links[i - 1] : nullptr);
    }
  }
  for (const IdentifiedChain& br : tree.branches) {
    m.metadata.descriptions.push_back(br.description());
    record_modules(m, br);
  }
  b.finish();
  m.metadata.warnings = tree.warnings;
  validate_model(m);
  return m;
}

// ---------------------------------------------------------------------------
// Structure and forward kinematics

void validate_model(const RobotModel& model) {
  std::set<std::string> names;
  for (const ModelLink& l : model.links) {
    if (!names.insert(l.name).second) {
      throw InconsistentChain("InconsistentChain: duplicate link name \"" + l.name + "\"");
    }
  }
  std::set<std::string> joint_names, children;
  for (const ModelJoint& j : model.joints) {
    if (!joint_names.insert(j.name).second) {
      throw InconsistentChain("InconsistentChain: duplicate joint name \"" + j.name + "\"");
    }
    if (!names.count(j.parent) || !names.count(j.child)) {
      throw InconsistentChain("InconsistentChain: joint \"" + j.name + "\" names an unknown link");
    }
    if (!children.insert(j.child).second) {
      throw InconsistentChain("InconsistentChain: link \"" + j.child + "\" has two parents");
    }
    if (j.type == JointType::kRevolute) {
      if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
        throw InconsistentChain("InconsistentChain: joint \"" + j.name + "\" axis is not a unit vector");
      }
      if (j.limits && !j.limits->contains(j.angle, 1e-9)) {
        throw InconsistentChain("InconsistentChain: joint \"" + j.name + "\" outside its limits");
      }
    }
  }
  if (model.links.empty()) return;
  if (children.count(model.links.front().name)) {
    throw InconsistentChain("InconsistentChain: the base link has a parent");
  }
  if (children.size() + 1 != model.links.size()) {
    throw InconsistentChain("InconsistentChain: joint graph is not a connected tree");
  }
  // n - 1 edges with unique parents form a tree iff everything is reachable.
  if (link_poses(model).size() != model.links.size()) {
    throw InconsistentChain("InconsistentChain: joint graph is not a connected tree");
  }
}

std::map<std::string, Pose> link_poses(const RobotModel& model) {
  std::map<std::string, Pose> out;
  if (model.links.empty()) return out;
  out.emplace(model.links.front().name, Pose::Identity());
  std::multimap<std::string, const ModelJoint*> by_parent;
  for (const ModelJoint& j : model.joints) by_parent.emplace(j.parent, &j);
  std::vector<std::string> stack{model.links.front().name};
  while (!stack.empty()) {
    const std::string name = stack.back();
    stack.pop_back();
    auto [lo, hi] = by_parent.equal_range(name);
    for (auto it = lo; it != hi; ++it) {
      const ModelJoint& j = *it->second;
      if (out.count(j.child)) continue;  // cycle guard
      Pose p = out.at(name) * j.origin;
      if (j.type == JointType::kRevolute) p = p * Pose::AxisAngle(j.axis, j.angle);
      out.emplace(j.child, p);
      stack.push_back(j.child);
    }
  }
  return out;
}

std::map<int, Pose> marker_poses(const RobotModel& model) {
  const auto frames = link_poses(model);
  std::map<int, Pose> out;
  for (const ModelLink& l : model.links) {
    if (!l.marker_id) continue;
    auto it = frames.find(l.name);
    if (it != frames.end()) out.emplace(*l.marker_id, it->second * l.marker_offset);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

json config_to_json(const IdentifyConfig& c) {
  return {{"method", to_string(c.method)},
          {"epsilon1_mm", c.epsilon1},
          {"epsilon2", c.epsilon2},
          {"f_threshold", c.f_threshold},
          {"weight_orientation", c.weights.orientation},
          {"weight_translation_per_mm", c.weights.translation}};
}

IdentifyConfig config_from_json(const json& j) {
  IdentifyConfig c;
  const auto method = method_from_string(j.at("method").get<std::string>());
  if (!method) throw ParseError("unknown identification method", 0, 0);
  c.method = *method;
  c.epsilon1 = j.at("epsilon1_mm").get<double>();
  c.epsilon2 = j.at("epsilon2").get<double>();
  c.f_threshold = j.at("f_threshold").get<double>();
  c.weights.orientation = j.at("weight_orientation").get<double>();
  c.weights.translation = j.at("weight_translation_per_mm").get<double>();
  return c;
}

}  // namespace

std::string model_to_json(const RobotModel& model) {
  json links = json::array();
  for (const ModelLink& l : model.links) {
    json jl = {{"name", l.name}, {"module", l.module}, {"visual_length_mm", l.visual_length}};
    if (l.marker_id) {
      jl["marker_id"] = *l.marker_id;
      jl["marker_offset"] = pose_to_json(l.marker_offset);
    }
    links.push_back(std::move(jl));
  }
  json joints = json::array();
  for (const ModelJoint& j : model.joints) {
    json jj = {{"name", j.name},
               {"type", to_string(j.type)},
               {"parent", j.parent},
               {"child", j.child},
               {"origin", pose_to_json(j.origin)}};
    if (j.type == JointType::kRevolute) {
      jj["axis"] = {j.axis.x(), j.axis.y(), j.axis.z()};
      if (j.limits) jj["limits_deg"] = {j.limits->min_deg, j.limits->max_deg};
      jj["angle_deg"] = j.angle;
    }
    joints.push_back(std::move(jj));
  }
  const ModelMetadata& md = model.metadata;
  json bus = json::object();
  for (const auto& [serial, id] : md.bus_ids) bus[serial] = id;
  json meta = {{"descriptions", md.descriptions},
               {"scene", md.scene_path},
               {"database", md.database_path},
               {"config", config_to_json(md.config)},
               {"bus_ids", bus},
               {"warnings", md.warnings}};
  json root = {{"name", model.name}, {"links", links}, {"joints", joints}, {"metadata", meta}};
  return root.dump(2) + "\n";
}

RobotModel model_from_json(std::string_view text) {
  const json root = parse_json_text(text);
  RobotModel m;
  try {
    m.name = root.at("name").get<std::string>();
    for (const json& jl : root.at("links")) {
      ModelLink l;
      l.name = jl.at("name").get<std::string>();
      l.module = jl.at("module").get<std::string>();
      l.visual_length = jl.at("visual_length_mm").get<double>();
      if (jl.contains("marker_id")) {
        l.marker_id = jl.at("marker_id").get<int>();
        l.marker_offset = pose_from_json(jl.at("marker_offset"), "marker_offset of " + l.name);
      }
      m.links.push_back(std::move(l));
    }
    for (const json& jj : root.at("joints")) {
      ModelJoint j;
      j.name = jj.at("name").get<std::string>();
      const std::string type = jj.at("type").get<std::string>();
      if (type != "revolute" && type != "fixed") throw ParseError("unknown joint type " + type, 0, 0);
      j.type = type == "revolute" ? JointType::kRevolute : JointType::kFixed;
      j.parent = jj.at("parent").get<std::string>();
      j.child = jj.at("child").get<std::string>();
      j.origin = pose_from_json(jj.at("origin"), "origin of " + j.name);
      if (j.type == JointType::kRevolute) {
        const auto a = jj.at("axis").get<std::vector<double>>();
        if (a.size() != 3) throw ParseError("axis of " + j.name + " needs 3 components", 0, 0);
        j.axis = Vec3(a[0], a[1], a[2]);
        if (jj.contains("limits_deg")) {
          const auto lim = jj.at("limits_deg").get<std::vector<double>>();
          if (lim.size() != 2) throw ParseError("limits of " + j.name + " need 2 values", 0, 0);
          j.limits = JointLimits{lim[0], lim[1]};
        }
        j.angle = jj.at("angle_deg").get<double>();
      }
      m.joints.push_back(std::move(j));
    }
    const json& meta = root.at("metadata");
    m.metadata.descriptions = meta.at("descriptions").get<std::vector<std::string>>();
    m.metadata.scene_path = meta.at("scene").get<std::string>();
    m.metadata.database_path = meta.at("database").get<std::string>();
    m.metadata.config = config_from_json(meta.at("config"));
    for (const auto& [serial, id] : meta.at("bus_ids").items()) m.metadata.bus_ids[serial] = id.get<int>();
    m.metadata.warnings = meta.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what(), 0, 0);
  } catch (const ValidationError& e) {
    throw ParseError(std::string("model file: ") + e.what(), 0, 0);
  }
  return m;
}

// ---------------------------------------------------------------------------
// XML
//
// Standard robot-description elements carry the kinematics (angles in radians
// there); chainforge-specific data sits in extra attributes and a
// <chainforge> block that viewers ignore.

namespace {

using boost::property_tree::ptree;

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string triple(const Vec3& v) { return num(v.x()) + " " + num(v.y()) + " " + num(v.z()); }

Vec3 rpy_of(const Mat3& r) {
  // R = Rz(yaw) Ry(pitch) Rx(roll)
  const double pitch = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  double roll, yaw;
  if (std::hypot(r(0, 0), r(1, 0)) > 1e-12) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    roll = std::atan2(-r(1, 2), r(1, 1));
    yaw = 0.0;
  }
  return {roll, pitch, yaw};
}

Mat3 from_rpy(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

ptree origin_node(const Pose& p) {
  ptree n;
  n.put("<xmlattr>.xyz", triple(p.translation()));
  n.put("<xmlattr>.rpy", triple(rpy_of(p.rotation())));
  return n;
}

Vec3 parse_triple(const std::string& s, const std::string& where) {
  std::istringstream is(s);
  Vec3 v;
  if (!(is >> v.x() >> v.y() >> v.z())) throw ParseError("bad vector \"" + s + "\" in " + where, 0, 0);
  std::string rest;
  if (is >> rest) throw ParseError("bad vector \"" + s + "\" in " + where, 0, 0);
  return v;
}

Pose parse_origin(const ptree& n, const std::string& where) {
  const Vec3 xyz = parse_triple(n.get<std::string>("<xmlattr>.xyz", "0 0 0"), where);
  const Vec3 rpy = parse_triple(n.get<std::string>("<xmlattr>.rpy", "0 0 0"), where);
  return Pose(from_rpy(rpy), xyz);
}

}  // namespace

std::string model_to_xml(const RobotModel& model) {
  ptree robot;
  robot.put("<xmlattr>.name", model.name);
  for (const ModelLink& l : model.links) {
    ptree link;
    link.put("<xmlattr>.name", l.name);
    link.put("<xmlattr>.module", l.module);
    ptree visual;
    visual.add_child("origin", origin_node(Pose::Identity()));
    ptree cyl;
    cyl.put("<xmlattr>.radius", num(20.0));
    cyl.put("<xmlattr>.length", num(l.visual_length));
    visual.add_child("geometry.cylinder", cyl);
    link.add_child("visual", visual);
    if (l.marker_id) {
      ptree marker = origin_node(l.marker_offset);
      marker.put("<xmlattr>.id", *l.marker_id);
      link.add_child("marker", marker);
    }
    robot.add_child("link", link);
  }
  for (const ModelJoint& j : model.joints) {
    ptree joint;
    joint.put("<xmlattr>.name", j.name);
    joint.put("<xmlattr>.type", to_string(j.type));
    joint.put("parent.<xmlattr>.link", j.parent);
    joint.put("child.<xmlattr>.link", j.child);
    joint.add_child("origin", origin_node(j.origin));
    if (j.type == JointType::kRevolute) {
      joint.put("axis.<xmlattr>.xyz", triple(j.axis));
      if (j.limits) {
        joint.put("limit.<xmlattr>.lower", num(deg2rad(j.limits->min_deg)));
        joint.put("limit.<xmlattr>.upper", num(deg2rad(j.limits->max_deg)));
        joint.put("limit.<xmlattr>.effort", num(0.0));
        joint.put("limit.<xmlattr>.velocity", num(0.0));
      }
      joint.put("state.<xmlattr>.angle_deg", num(j.angle));
    }
    robot.add_child("joint", joint);
  }
  const ModelMetadata& md = model.metadata;
  ptree meta;
  for (const std::string& d : md.descriptions) meta.add("description", d);
  meta.put("scene.<xmlattr>.path", md.scene_path);
  meta.put("database.<xmlattr>.path", md.database_path);
  ptree cfg;
  cfg.put("<xmlattr>.method", to_string(md.config.method));
  cfg.put("<xmlattr>.epsilon1_mm", num(md.config.epsilon1));
  cfg.put("<xmlattr>.epsilon2", num(md.config.epsilon2));
  cfg.put("<xmlattr>.f_threshold", num(md.config.f_threshold));
  cfg.put("<xmlattr>.weight_orientation", num(md.config.weights.orientation));
  cfg.put("<xmlattr>.weight_translation_per_mm", num(md.config.weights.translation));
  meta.add_child("config", cfg);
  for (const auto& [serial, id] : md.bus_ids) {
    ptree mod;
    mod.put("<xmlattr>.serial", serial);
    mod.put("<xmlattr>.bus_id", id);
    meta.add_child("module", mod);
  }
  for (const std::string& w : md.warnings) meta.add("warning", w);
  robot.add_child("chainforge", meta);

  ptree doc;
  doc.add_child("robot", robot);
  std::ostringstream os;
  boost::property_tree::write_xml(os, doc,
                                  boost::property_tree::xml_writer_make_settings<std::string>(' ', 2));
  return os.str();
}

RobotModel model_from_xml(std::string_view text) {
  ptree doc;
  try {
    std::istringstream is{std::string(text)};
    boost::property_tree::read_xml(is, doc, boost::property_tree::xml_parser::trim_whitespace);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw ParseError("model XML: " + e.message(), e.line(), 0);
  }
  RobotModel m;
  try {
    const ptree& robot = doc.get_child("robot");
    m.name = robot.get<std::string>("<xmlattr>.name");
    for (const auto& [tag, node] : robot) {
      if (tag == "link") {
        ModelLink l;
        l.name = node.get<std::string>("<xmlattr>.name");
        l.module = node.get<std::string>("<xmlattr>.module", "");
        l.visual_length = node.get<double>("visual.geometry.cylinder.<xmlattr>.length", 0.0);
        if (auto marker = node.get_child_optional("marker")) {
          l.marker_id = marker->get<int>("<xmlattr>.id");
          l.marker_offset = parse_origin(*marker, "marker of " + l.name);
        }
        m.links.push_back(std::move(l));
      } else if (tag == "joint") {
        ModelJoint j;
        j.name = node.get<std::string>("<xmlattr>.name");
        const std::string type = node.get<std::string>("<xmlattr>.type");
        if (type != "revolute" && type != "fixed") throw ParseError("unknown joint type " + type, 0, 0);
        j.type = type == "revolute" ? JointType::kRevolute : JointType::kFixed;
        j.parent = node.get<std::string>("parent.<xmlattr>.link");
        j.child = node.get<std::string>("child.<xmlattr>.link");
        if (auto o = node.get_child_optional("origin")) j.origin = parse_origin(*o, "joint " + j.name);
        if (j.type == JointType::kRevolute) {
          j.axis = parse_triple(node.get<std::string>("axis.<xmlattr>.xyz", "1 0 0"), "joint " + j.name);
          if (auto lim = node.get_child_optional("limit")) {
            j.limits = JointLimits{rad2deg(lim->get<double>("<xmlattr>.lower")),
                                   rad2deg(lim->get<double>("<xmlattr>.upper"))};
          }
          j.angle = node.get<double>("state.<xmlattr>.angle_deg", 0.0);
        }
        m.joints.push_back(std::move(j));
      } else if (tag == "chainforge") {
        ModelMetadata& md = m.metadata;
        for (const auto& [mtag, mnode] : node) {
          if (mtag == "description") md.descriptions.push_back(mnode.data());
          if (mtag == "warning") md.warnings.push_back(mnode.data());
          if (mtag == "module") {
            md.bus_ids[mnode.get<std::string>("<xmlattr>.serial")] = mnode.get<int>("<xmlattr>.bus_id");
          }
        }
        md.scene_path = node.get<std::string>("scene.<xmlattr>.path", "");
        md.database_path = node.get<std::string>("database.<xmlattr>.path", "");
        if (auto cfg = node.get_child_optional("config")) {
          const auto method = method_from_string(cfg->get<std::string>("<xmlattr>.method"));
          if (!method) throw ParseError("unknown identification method", 0, 0);
          md.config.method = *method;
          md.config.epsilon1 = cfg->get<double>("<xmlattr>.epsilon1_mm");
          md.config.epsilon2 = cfg->get<double>("<xmlattr>.epsilon2");
          md.config.f_threshold = cfg->get<double>("<xmlattr>.f_threshold");
          md.config.weights.orientation = cfg->get<double>("<xmlattr>.weight_orientation");
          md.config.weights.translation = cfg->get<double>("<xmlattr>.weight_translation_per_mm");
        }
      }
    }
  } catch (const boost::property_tree::ptree_error& e) {
    throw ParseError(std::string("model XML: ") + e.what(), 0, 0);
  }
  return m;
}

void write_model(const RobotModel& model, const std::filesystem::path& path, ModelFormat format) {
  write_text_file(path, format == ModelFormat::kJson ? model_to_json(model) : model_to_xml(model));
}

RobotModel read_model(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return path.extension() == ".json" ? model_from_json(text) : model_from_xml(text);
}

}  // namespace chainforge
