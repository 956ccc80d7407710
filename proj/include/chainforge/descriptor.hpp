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

// Chain description strings, e.g. "G'-I0-T'0-L0-T'90-T180-I'0-G0".
//
//   chain = token ("-" token)*
//   token = CODE "'"? ANGLE?
//   ANGLE = "0" | "90" | "180" | "-90" | "(-90)"
//
// Tokens run from the base to the chain end. The base token carries no angle;
// every later token carries the connection angle to its predecessor.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainforge/geometry.hpp"

namespace chainforge {

inline constexpr std::string_view kDefaultCodes = "TtIiGgWSLlA";

struct ChainEntry {
  char type_code = '?';
  bool inverted = false;
  std::optional<ConnectionAngle> connection_angle;  // absent only on the base entry

  bool operator==(const ChainEntry&) const = default;
};

struct ChainDescriptor {
  std::vector<ChainEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool operator==(const ChainDescriptor&) const = default;
};

struct ParseWarning {
  std::size_t position;
  std::string message;
};

/// Throws SyntaxError with the byte offset of the first violation. A non-base
/// token without an angle parses as 0 and records a warning.
ChainDescriptor parse(std::string_view text, std::string_view codes = kDefaultCodes,
                      std::vector<ParseWarning>* warnings = nullptr);

/// Canonical form: angles on every non-base token, -90 written as "(-90)".
std::string serialize(const ChainDescriptor& d);

}  // namespace chainforge
