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

#include <atomic>
#include <string>
#include <string_view>

#include <json.hpp>

#include "sketchprove/verification.hpp"

namespace sketchprove::testing {

/// A deterministic stand-in for the Lean server. Rules (a pure function of
/// the submitted text, comments ignored):
///   - unbalanced brackets         -> error "unexpected token"
///   - the word `bad_tactic`       -> error "unknown tactic" over it
///   - `exact 0`                   -> error "type mismatch" over the `0`
///   - any `sorry`                 -> warning "declaration uses 'sorry'"
/// The AST export mimics the Lean exporter for declarations, `have`s and
/// `sorry`s; goals carry declaration binders and earlier `have`s as context.
class FakeLean {
 public:
  VerificationResult verify(std::string_view code) const;

  /// `/api/ast_code` style payload: {ast, sorries, error, time}.
  nlohmann::json export_ast(std::string_view code) const;

  /// Raw `/api/check` style response for one code.
  nlohmann::json check_response(std::string_view code, const std::string& custom_id) const;

  std::size_t verify_calls() const { return verify_calls_.load(); }
  std::size_t ast_calls() const { return ast_calls_.load(); }

 private:
  mutable std::atomic<std::size_t> verify_calls_{0};
  mutable std::atomic<std::size_t> ast_calls_{0};
};

}  // namespace sketchprove::testing
