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

#include "chainforge/descriptor.hpp"

#include <cctype>

#include "chainforge/errors.hpp"

namespace chainforge {

namespace {

class Parser {
 public:
  Parser(std::string_view text, std::string_view codes, std::vector<ParseWarning>* warnings)
      : text_(text), codes_(codes), warnings_(warnings) {}

  ChainDescriptor run() {
    if (text_.empty()) throw SyntaxError("empty description", 0);
    ChainDescriptor d;
    for (;;) {
      d.entries.push_back(token(d.entries.empty()));
      if (at_end()) break;
      if (peek() != '-') throw SyntaxError(describe_char() + " where '-' was expected", pos_);
      ++pos_;
      if (at_end()) throw SyntaxError("expected a module code after '-'", pos_);
    }
    return d;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }
  static bool digit(char c) { return c >= '0' && c <= '9'; }

  std::string describe_char() const {
    const unsigned char c = static_cast<unsigned char>(peek());
    if (std::isprint(c)) return std::string("'") + static_cast<char>(c) + "'";
    return "byte 0x" + std::to_string(static_cast<int>(c));
  }

  ChainEntry token(bool base) {
    ChainEntry e;
    const std::size_t start = pos_;
    const char c = peek();
    if (c == '\0' || codes_.find(c) == std::string_view::npos) {
      throw SyntaxError("unknown module code " + describe_char(), start);
    }
    e.type_code = c;
    ++pos_;
    if (peek() == '\'') {
      e.inverted = true;
      ++pos_;
    }
    const std::size_t angle_pos = pos_;
    std::optional<ConnectionAngle> angle = maybe_angle();
    if (base) {
      if (angle) throw SyntaxError("the base module takes no connection angle", angle_pos);
    } else if (angle) {
      e.connection_angle = angle;
    } else {
      e.connection_angle = ConnectionAngle::kZero;
      if (warnings_) {
        warnings_->push_back({angle_pos, "missing connection angle on '" +
                                             std::string(1, e.type_code) + "', assuming 0"});
      }
    }
    return e;
  }

  std::optional<ConnectionAngle> maybe_angle() {
    const std::size_t start = pos_;
    if (peek() == '(') {
      if (text_.substr(pos_, 5) != "(-90)") {
        throw SyntaxError("only \"(-90)\" may be parenthesized", start);
      }
      pos_ += 5;
      return ConnectionAngle::kMinus90;
    }
    bool negative = false;
    if (peek() == '-' && digit(peek(1))) {
      negative = true;
      ++pos_;
    }
    if (!digit(peek())) return std::nullopt;
    std::string digits;
    while (digit(peek())) {
      digits += peek();
      ++pos_;
      if (digits.size() > 6) throw SyntaxError("connection angle too long", start);
    }
    const std::string literal = (negative ? "-" : "") + digits;
    if (literal == "0") return ConnectionAngle::kZero;
    if (literal == "90") return ConnectionAngle::kPlus90;
    if (literal == "180") return ConnectionAngle::k180;
    if (literal == "-90") return ConnectionAngle::kMinus90;
    throw SyntaxError("connection angle " + literal + " is not one of -90, 0, 90, 180", start);
  }

  std::string_view text_;
  std::string_view codes_;
  std::vector<ParseWarning>* warnings_;
  std::size_t pos_ = 0;
};

}  // namespace

ChainDescriptor parse(std::string_view text, std::string_view codes,
                      std::vector<ParseWarning>* warnings) {
  return Parser(text, codes, warnings).run();
}

std::string serialize(const ChainDescriptor& d) {
  std::string out;
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    const ChainEntry& e = d.entries[i];
    if (i > 0) out += '-';
    out += e.type_code;
    if (e.inverted) out += '\'';
    if (i == 0) continue;
    switch (e.connection_angle.value_or(ConnectionAngle::kZero)) {
      case ConnectionAngle::kMinus90: out += "(-90)"; break;
      case ConnectionAngle::kZero: out += "0"; break;
      case ConnectionAngle::kPlus90: out += "90"; break;
      case ConnectionAngle::k180: out += "180"; break;
    }
  }
  return out;
}

}  // namespace chainforge
