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

// Shared helpers for the JSON file formats.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "chainforge/geometry.hpp"
#include "json.hpp"

namespace chainforge {

/// Parses JSON, converting syntax errors into ParseError with line/column.
nlohmann::json parse_json_text(std::string_view text);

/// Throws IoError when the file cannot be read or written.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

/// {"t": [x, y, z], "q": [x, y, z, w]}
nlohmann::json pose_to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace chainforge
