/*
 * Copyright 2026 The sketchprove Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sketchprove {

/// A source position as the Lean server reports it: 1-based line, 0-based
/// codepoint column.
struct Position {
  std::size_t line = 1;
  std::size_t column = 0;

  auto operator<=>(const Position&) const = default;
};

enum class Severity { Error, Warning, Info };

struct LeanMessage {
  Severity severity = Severity::Error;
  std::string message;
  std::optional<Position> start;
  std::optional<Position> end;

  bool operator==(const LeanMessage&) const = default;
};

/// Outcome of compiling one Lean unit.
struct VerificationResult {
  bool passed = false;    // no error-severity diagnostics
  bool complete = false;  // additionally free of sorry/admit
  std::vector<LeanMessage> errors;
  double time = 0.0;

  bool proven() const { return passed && complete; }
  std::vector<LeanMessage> error_messages() const;

  /// A synthetic failure with a single unpositioned message.
  static VerificationResult failure(std::string message);

  bool operator==(const VerificationResult&) const = default;
};

void to_json(nlohmann::json& j, const Position& p);
void from_json(const nlohmann::json& j, Position& p);
void to_json(nlohmann::json& j, const LeanMessage& m);
void from_json(const nlohmann::json& j, LeanMessage& m);
void to_json(nlohmann::json& j, const VerificationResult& r);
void from_json(const nlohmann::json& j, VerificationResult& r);

}  // namespace sketchprove
