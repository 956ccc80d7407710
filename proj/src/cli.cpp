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

#include "chainforge/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "chainforge/descriptor.hpp"
#include "chainforge/errors.hpp"
#include "chainforge/identify.hpp"
#include "chainforge/modelgen.hpp"
#include "chainforge/module_db.hpp"
#include "chainforge/synth.hpp"

namespace chainforge {

namespace {

struct UsageError : Error {
  using Error::Error;
};

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string resolve_db(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("CHAINFORGE_DB"); env && *env) return env;
  throw UsageError("no module database: pass --db or set CHAINFORGE_DB");
}

std::vector<double> parse_joints(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(v)) {
      throw UsageError("bad joint angle \"" + item + "\" in --joints");
    }
    out.push_back(v);
  }
  if (!text.empty() && text.back() == ',') throw UsageError("trailing ',' in --joints");
  return out;
}

void print_rejected(const std::vector<RejectedMarker>& rejected, std::ostream& err) {
  for (const RejectedMarker& r : rejected) {
    err << "rejected " << r.marker_id << " " << to_string(r.reason) << "\n";
  }
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const std::string& w : warnings) err << "warning: " << w << "\n";
}

void print_joints(const std::vector<ChainLink>& links, std::ostream& out,
                  std::vector<std::string>* seen = nullptr) {
  for (const ChainLink& l : links) {
    if (!l.joint_angle) continue;
    const std::string& serial = l.module.record.serial;
    if (seen) {
      if (std::find(seen->begin(), seen->end(), serial) != seen->end()) continue;
      seen->push_back(serial);
    }
    out << "joint " << serial << " " << fixed(*l.joint_angle) << "\n";
  }
}

// ---------------------------------------------------------------------------

struct IdentifyArgs {
  std::string scene, db, method = "geometric", out, format;
  double eps1 = IdentifyConfig{}.epsilon1;
  double eps2 = IdentifyConfig{}.epsilon2;
  double f_threshold = IdentifyConfig{}.f_threshold;
  bool tree = false;
};

int cmd_identify(const IdentifyArgs& a, std::ostream& out, std::ostream& err) {
  const std::string db_path = resolve_db(a.db);
  IdentifyConfig cfg;
  const auto method = method_from_string(a.method);
  if (!method) throw UsageError("unknown --method \"" + a.method + "\"");
  cfg.method = *method;
  cfg.epsilon1 = a.eps1;
  cfg.epsilon2 = a.eps2;
  cfg.f_threshold = a.f_threshold;
  // The model format defaults to the --out extension.
  std::optional<ModelFormat> format;
  if (!a.format.empty()) {
    format = model_format_from_string(a.format);
    if (!format) throw UsageError("unknown --format \"" + a.format + "\"");
    if (a.out.empty()) throw UsageError("--format needs --out");
  } else if (!a.out.empty()) {
    format = std::filesystem::path(a.out).extension() == ".json" ? ModelFormat::kJson : ModelFormat::kXml;
  }

  const ModuleDatabase db = load_database(db_path);
  const std::vector<MarkerObservation> scene = read_scene(a.scene);
  const Identifier identifier(db, cfg);

  ModelOptions opts;
  opts.name = std::filesystem::path(a.scene).stem().string();
  opts.scene_path = a.scene;
  opts.database_path = db_path;
  opts.config = cfg;

  std::optional<RobotModel> model;
  try {
    if (a.tree) {
      const IdentifiedTree tree = identifier.build_tree(scene);
      for (std::size_t i = 0; i < tree.branches.size(); ++i) {
        out << "branch " << i << " " << tree.branches[i].description() << "\n";
      }
      for (std::size_t i = 1; i < tree.branches.size(); ++i) {
        out << "shared 0 " << i << " " << tree.shared_prefix(0, i) << "\n";
      }
      std::vector<std::string> seen;
      for (const auto& b : tree.branches) print_joints(b.links, out, &seen);
      print_rejected(tree.rejected, err);
      print_warnings(tree.warnings, err);
      if (format) model = generate_model(tree, opts);
    } else {
      const IdentifiedChain chain = identifier.build_chain(scene);
      out << chain.description() << "\n";
      print_joints(chain.links, out);
      print_rejected(chain.rejected, err);
      print_warnings(chain.warnings, err);
      if (format) model = generate_model(chain, opts);
    }
  } catch (const IdentificationError& e) {
    err << "error: identification failed during parent search: " << e.what() << "\n";
    return kExitIdentification;
  }
  if (model) {
    write_model(*model, a.out, *format);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string chain, db, joints, out;
  double sigma_pos = 0.0, sigma_rot = 0.0, dropout = 0.0;
  int spurious = 0;
  std::uint64_t seed = 0;
};

ChainDescriptor parse_chain(const std::string& text, std::ostream& err) {
  std::vector<ParseWarning> warnings;
  ChainDescriptor d = parse(text, kDefaultCodes, &warnings);
  for (const ParseWarning& w : warnings) {
    err << "warning: position " << w.position << ": " << w.message << "\n";
  }
  return d;
}

SceneConfig scene_config(const SynthArgs& a) {
  SceneConfig sc;
  sc.sigma_pos = a.sigma_pos;
  sc.sigma_rot = a.sigma_rot;
  sc.dropout_prob = a.dropout;
  sc.spurious_count = a.spurious;
  sc.seed = a.seed;
  sc.validate();
  return sc;
}

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  const ChainDescriptor d = parse_chain(a.chain, err);
  const std::vector<double> joints = parse_joints(a.joints);
  const SceneConfig sc = scene_config(a);
  const ModuleDatabase db = load_database(resolve_db(a.db));
  const auto obs = synthesize(d, joints, db, Pose::Identity(), sc);
  if (a.out.empty()) {
    out << scene_to_json(obs);
  } else {
    write_scene(a.out, obs);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RoundtripArgs : SynthArgs {
  int trials = 0;
};

int cmd_roundtrip(const RoundtripArgs& a, std::ostream& out, std::ostream& err) {
  if (a.trials < 1) throw UsageError("--trials must be at least 1");
  const ChainDescriptor d = parse_chain(a.chain, err);
  const std::string want = serialize(d);
  const std::vector<double> joints = parse_joints(a.joints);
  const SceneConfig base_cfg = scene_config(a);
  const ModuleDatabase db = load_database(resolve_db(a.db));

  IdentifyConfig geo_cfg, opt_cfg;
  opt_cfg.method = Method::kOptimization;
  const Identifier geo(db, geo_cfg), opt(db, opt_cfg);

  int exact_geo = 0, exact_opt = 0, agree = 0;
  double err_sum = 0.0, err_max = 0.0;
  std::size_t err_count = 0;
  for (int t = 0; t < a.trials; ++t) {
    SceneConfig sc = base_cfg;
    sc.seed = a.seed + static_cast<std::uint64_t>(t);
    const auto obs = synthesize(d, joints, db, Pose::Identity(), sc);
    std::optional<IdentifiedChain> g, o;
    try {
      g = geo.build_chain(obs);
    } catch (const IdentificationError&) {
    }
    try {
      o = opt.build_chain(obs);
    } catch (const IdentificationError&) {
    }
    const std::string gs = g ? g->description() : "";
    const std::string os = o ? o->description() : "";
    if (g && gs == want) {
      ++exact_geo;
      std::size_t j = 0;
      for (const ChainLink& l : g->links) {
        if (!l.joint_angle) continue;
        const double e = std::abs(wrap_degrees(*l.joint_angle - joints.at(j++)));
        err_sum += e;
        err_max = std::max(err_max, e);
        ++err_count;
      }
    }
    if (o && os == want) ++exact_opt;
    if (g && o && gs == os) ++agree;
  }
  out << "chain " << want << "\n";
  out << "trials " << a.trials << "\n";
  out << "exact_geometric " << exact_geo << "\n";
  out << "exact_optimization " << exact_opt << "\n";
  out << "agreement_rate " << fixed(static_cast<double>(agree) / a.trials) << "\n";
  out << "joint_error_mean_deg " << fixed(err_count ? err_sum / err_count : 0.0) << "\n";
  out << "joint_error_max_deg " << fixed(err_max) << "\n";

  const bool zero_noise = a.sigma_pos == 0.0 && a.sigma_rot == 0.0 && a.dropout == 0.0 &&
                          a.spurious == 0;
  if (zero_noise && (exact_geo != a.trials || exact_opt != a.trials)) {
    err << "error: zero-noise round trip is not exact\n";
    return kExitUsage;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_parse(const std::string& chain, std::ostream& out, std::ostream& err) {
  out << serialize(parse_chain(chain, err)) << "\n";
  return kExitOk;
}

int cmd_db_validate(const std::string& db_flag, std::ostream& out) {
  const ModuleDatabase db = load_database(resolve_db(db_flag));
  out << "ok " << db.catalog().size() << " types " << db.registry().size() << " modules\n";
  return kExitOk;
}

void add_synth_flags(CLI::App* cmd, SynthArgs& a) {
  cmd->add_option("--chain", a.chain, "Chain description string")->required();
  cmd->add_option("--db", a.db, "Module database file (default: $CHAINFORGE_DB)");
  cmd->add_option("--joints", a.joints, "Comma-separated joint angles in degrees, base first");
  cmd->add_option("--sigma-pos", a.sigma_pos, "Position noise per axis (mm)");
  cmd->add_option("--sigma-rot", a.sigma_rot, "Rotation noise magnitude (degrees)");
  cmd->add_option("--dropout", a.dropout, "Per-marker dropout probability");
  cmd->add_option("--spurious", a.spurious, "Number of spurious markers");
  cmd->add_option("--seed", a.seed, "Random seed")->required();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kinematic-chain identification for modular robots", "chainforge"};
  app.require_subcommand(1, 1);

  IdentifyArgs ia;
  CLI::App* identify = app.add_subcommand("identify", "Identify the chain in a scene file");
  identify->add_option("--scene", ia.scene, "Scene file")->required();
  identify->add_option("--db", ia.db, "Module database file (default: $CHAINFORGE_DB)");
  identify->add_option("--method", ia.method, "geometric | optimization");
  identify->add_option("--eps1", ia.eps1, "Distance slack (mm)");
  identify->add_option("--eps2", ia.eps2, "Collinearity slack");
  identify->add_option("--f-threshold", ia.f_threshold, "Objective acceptance threshold");
  identify->add_option("--out", ia.out, "Model file to write");
  identify->add_option("--format", ia.format, "xml | json");
  identify->add_flag("--tree", ia.tree, "Grow one branch from every tool module");

  SynthArgs sa;
  CLI::App* synth = app.add_subcommand("synth", "Synthesize a scene file");
  add_synth_flags(synth, sa);
  synth->add_option("--out", sa.out, "Scene file to write (default: standard output)");

  RoundtripArgs ra;
  CLI::App* roundtrip = app.add_subcommand("roundtrip", "Synthesize and identify repeatedly");
  add_synth_flags(roundtrip, ra);
  roundtrip->add_option("--trials", ra.trials, "Number of trials")->required();

  std::string parse_chain_text;
  CLI::App* parse_cmd = app.add_subcommand("parse", "Canonicalize a chain description");
  parse_cmd->add_option("--chain", parse_chain_text, "Chain description string")->required();

  std::string db_flag;
  CLI::App* db_validate = app.add_subcommand("db-validate", "Check a module database file");
  db_validate->add_option("--db", db_flag, "Module database file (default: $CHAINFORGE_DB)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*identify) return cmd_identify(ia, out, err);
    if (*synth) return cmd_synth(sa, out, err);
    if (*roundtrip) return cmd_roundtrip(ra, out, err);
    if (*parse_cmd) return cmd_parse(parse_chain_text, out, err);
    if (*db_validate) return cmd_db_validate(db_flag, out);
  } catch (const IdentificationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIdentification;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace chainforge
