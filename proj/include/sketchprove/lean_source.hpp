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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sketchprove::lean {

class SourceError : public std::runtime_error {
 public:
  enum class Kind { NoByBlock, SubgoalNotFound, AmbiguousSubgoal, NoCodeBlock, NoDeclaration };

  SourceError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// A Lean unit split into its header (imports, opens, options, variables)
/// and the declaration text that follows.
struct LeanSource {
  std::string preamble;
  std::string body;

  /// preamble + blank line + body; just the body when the preamble is empty.
  std::string combined() const;

  bool operator==(const LeanSource&) const = default;
};

/// The normalized header every generated artifact carries. The four
/// mandatory directives come first, in fixed order; user extras follow.
class CanonicalPreamble {
 public:
  static const std::vector<std::string>& mandatory_lines();

  CanonicalPreamble() = default;
  explicit CanonicalPreamble(std::vector<std::string> lines) : lines_(std::move(lines)) {}

  const std::vector<std::string>& lines() const { return lines_; }

  /// Imports, then options, then everything else, separated by blank lines.
  std::string text() const;

  bool operator==(const CanonicalPreamble&) const = default;

 private:
  std::vector<std::string> lines_;
};

LeanSource split_source(std::string_view code);

CanonicalPreamble normalize_preamble(std::string_view preamble);

/// Tactic text after the first top-level `:= by` of the first declaration,
/// dedented so its least-indented line starts at column 0.
/// Throws SourceError(NoByBlock) for term-mode proofs.
std::string extract_proof_body(std::string_view proof);

/// Like extract_proof_body, but term-mode proofs come back as `exact (<term>)`.
std::string extract_tactic_body(std::string_view proof);

/// Replaces the `sorry` proof of the unique unproven `have <name>` with
/// `proof_body`, nested two spaces deeper than the `have`.
std::string replace_subgoal(std::string_view sketch, std::string_view name, std::string_view proof_body);

/// Contents of the last ```lean4 / ```lean fenced block.
std::string extract_code_block(std::string_view response);

std::size_t count_sorries(std::string_view code);

/// An unproven `have` located in source text.
struct UnprovenHave {
  std::string name;
  std::size_t have_offset = 0;
  std::size_t have_column = 0;  // codepoint column of the `have` keyword
  std::size_t assign_end = 0;   // byte just past the `:=`
  std::size_t sorry_end = 0;    // byte just past the `sorry`
};

std::vector<UnprovenHave> find_unproven_haves(std::string_view code);

/// Declaration head up to (not including) its top-level `:=`, whitespace
/// collapsed. Empty when the text holds no declaration.
std::string declaration_header(std::string_view body);

/// The declaration with its proof replaced by `by\n  sorry`.
std::string statement_with_sorry(std::string_view body);

/// Name declared by the first `theorem`/`lemma`/... in the text, if any.
std::string declaration_name(std::string_view body);

}  // namespace sketchprove::lean
