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

#include <random>

#include "chainforge/descriptor.hpp"
#include "chainforge/errors.hpp"
#include "doctest.h"
#include "support.hpp"

namespace chainforge {
namespace {

std::size_t syntax_error_position(std::string_view text) {
  try {
    parse(text);
  } catch (const SyntaxError& e) {
    return e.position();
  }
  FAIL("expected SyntaxError for \"" << std::string(text) << "\"");
  return 0;
}

TEST_CASE("parses the published chains") {
  SUBCASE("seven-module manipulator with an implicit angle") {
    std::vector<ParseWarning> warnings;
    const ChainDescriptor d = parse("I-T0-T0-A-i0-t180-g90", kDefaultCodes, &warnings);
    REQUIRE(d.entries.size() == 7);
    CHECK(d.entries[5] == ChainEntry{'t', false, ConnectionAngle::k180});
    CHECK(d.entries[3] == ChainEntry{'A', false, ConnectionAngle::kZero});
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].position == 9);  // where the angle after "A" is missing
  }
  SUBCASE("pole climber") {
    const ChainDescriptor d = parse("G'-I0-T'0-L0-T'90-T180-I'0-G0");
    REQUIRE(d.entries.size() == 8);
    CHECK(d.entries[0] == ChainEntry{'G', true, std::nullopt});
    CHECK(d.entries[4] == ChainEntry{'T', true, ConnectionAngle::kPlus90});
  }
  SUBCASE("parenthesized negative angle") {
    const ChainDescriptor d = parse("G'-I0-T'0-T'180-L'(-90)-T0-I'0-G0");
    CHECK(d.entries[4] == ChainEntry{'L', true, ConnectionAngle::kMinus90});
  }
  SUBCASE("bare negative angle") {
    CHECK(parse("L-G-90").entries[1].connection_angle == ConnectionAngle::kMinus90);
  }
}

TEST_CASE("syntax errors carry positions") {
  CHECK(syntax_error_position("X0-T0") == 0);
  CHECK(syntax_error_position("") == 0);
  CHECK(syntax_error_position("I-T45-G0") == 3);
  CHECK(syntax_error_position("I0-T0") == 1);   // angle on the base
  CHECK(syntax_error_position("I-T0-") == 5);   // dangling hyphen
  CHECK(syntax_error_position("I-T0G0") == 4);  // missing hyphen
  CHECK(syntax_error_position("I-T(90)") == 3);
  CHECK(syntax_error_position("I-T(-90") == 3);
  CHECK(syntax_error_position("I--T0") == 2);
}

TEST_CASE("serialize produces the canonical form") {
  CHECK(serialize(parse("I-T'0-T'0-A0-t0-i0-g0")) == "I-T'0-T'0-A0-t0-i0-g0");
  CHECK(serialize(parse("L-G-90")) == "L-G(-90)");
  CHECK(serialize(ChainDescriptor{{ChainEntry{'G', false, std::nullopt}}}) == "G");
  CHECK(serialize(parse("I-T0-T0-A-i0-t180-g90")) == "I-T0-T0-A0-i0-t180-g90");
}

TEST_CASE("a custom code set restricts the alphabet") {
  CHECK(parse("Q-Z90", "QZ").entries.size() == 2);
  CHECK_THROWS_AS(parse("I-T0", "QZ"), SyntaxError);
}

TEST_CASE("parse inverts serialize on random descriptors") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 2000; ++k) {
    const ChainDescriptor d = testing::random_descriptor(rng);
    const std::string text = serialize(d);
    CHECK(parse(text) == d);
    CHECK(serialize(parse(text)) == text);
  }
}

TEST_CASE("random byte strings parse or fail with a positioned error") {
  std::mt19937_64 rng(12);
  const std::string alphabet = std::string(kDefaultCodes) + "'-()0123456789 x";
  std::uniform_int_distribution<int> byte(0, 255), pick(0, static_cast<int>(alphabet.size()) - 1);
  for (int k = 0; k < 2000; ++k) {
    std::string s(32, '\0');
    // Half fully random bytes, half drawn from the grammar's alphabet.
    for (char& c : s) c = k % 2 ? static_cast<char>(byte(rng)) : alphabet[pick(rng)];
    try {
      const ChainDescriptor d = parse(s);
      CHECK(!d.entries.empty());
    } catch (const SyntaxError& e) {
      CHECK(e.position() <= s.size());
    }
  }
}

}  // namespace
}  // namespace chainforge
