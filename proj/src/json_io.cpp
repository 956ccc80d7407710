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

#include "chainforge/json_io.hpp"

#include <fstream>
#include <sstream>

#include "chainforge/errors.hpp"

namespace chainforge {

using json = nlohmann::json;

nlohmann::json parse_json_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points one past the offending character.
    std::size_t line = 1, column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError("malformed JSON: " + std::string(e.what()), line, column);
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw IoError("cannot write " + path.string());
}

nlohmann::json pose_to_json(const Pose& p) {
  const auto q = p.quaternion_xyzw();
  const Vec3& t = p.translation();
  return json{{"t", {t.x(), t.y(), t.z()}}, {"q", {q[0], q[1], q[2], q[3]}}};
}

Pose pose_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || j.size() != 2 || !j.contains("t") || !j.contains("q")) {
    throw ValidationError(where + ": a pose is exactly {\"t\": [x,y,z], \"q\": [x,y,z,w]}");
  }
  const auto& t = j.at("t");
  const auto& q = j.at("q");
  if (!t.is_array() || t.size() != 3 || !q.is_array() || q.size() != 4) {
    throw ValidationError(where + ": pose arrays must have 3 (t) and 4 (q) numbers");
  }
  for (const auto& v : t) {
    if (!v.is_number()) throw ValidationError(where + ": non-numeric pose component");
  }
  for (const auto& v : q) {
    if (!v.is_number()) throw ValidationError(where + ": non-numeric pose component");
  }
  return Pose::FromQuaternion(Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>()),
                              {q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                               q[3].get<double>()});
}

}  // namespace chainforge
