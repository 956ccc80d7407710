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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace chainforge {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Carries the location when the parser knows it.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ")"
                   : what),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class EmptyCatalog : public Error {
 public:
  using Error::Error;
};

/// Description-string grammar violation at a byte offset.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t position)
      : Error("syntax error at position " + std::to_string(position) + ": " + what),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class LimitViolation : public Error {
 public:
  using Error::Error;
};

class MissingInstance : public Error {
 public:
  using Error::Error;
};

class NotInvertible : public Error {
 public:
  using Error::Error;
};

class IdentificationError : public Error {
 public:
  using Error::Error;
};

class NoToolModule : public IdentificationError {
 public:
  NoToolModule() : IdentificationError("NoToolModule: no tool module among the detected modules") {}
};

class AmbiguousParent : public IdentificationError {
 public:
  AmbiguousParent(const std::string& child, std::vector<std::string> candidates)
      : IdentificationError(Describe(child, candidates)), candidates_(std::move(candidates)) {}
  const std::vector<std::string>& candidates() const { return candidates_; }

 private:
  static std::string Describe(const std::string& child, const std::vector<std::string>& c) {
    std::string s = "AmbiguousParent: child " + child + " has " + std::to_string(c.size()) +
                    " admissible parents:";
    for (const auto& x : c) s += " " + x;
    return s;
  }
  std::vector<std::string> candidates_;
};

class NonCollinearBundles : public Error {
 public:
  using Error::Error;
};

class LimitExceeded : public Error {
 public:
  using Error::Error;
};

class InconsistentChain : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace chainforge
