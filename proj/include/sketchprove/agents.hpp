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

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sketchprove/theorem_hit.hpp"
#include "sketchprove/verification.hpp"

namespace sketchprove::agents {

class AgentError : public std::runtime_error {
 public:
  enum class Kind { MissingVariable, NoQueries, NoJudgement };

  AgentError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class PromptKind {
  Formalizer,
  ProverInitial,
  ProverCorrection,
  SemanticCheck,
  QueryInitial,
  QueryBacktrack,
  DecomposerInitial,
  DecomposerCorrection,
  DecomposerBacktrack,
};

inline constexpr std::array<PromptKind, 9> kAllPromptKinds = {
    PromptKind::Formalizer,         PromptKind::ProverInitial,     PromptKind::ProverCorrection,
    PromptKind::SemanticCheck,      PromptKind::QueryInitial,      PromptKind::QueryBacktrack,
    PromptKind::DecomposerInitial,  PromptKind::DecomposerCorrection, PromptKind::DecomposerBacktrack,
};

std::string_view to_string(PromptKind kind);

/// The raw template, placeholders included.
std::string_view template_text(PromptKind kind);

/// Placeholder names used by the template, in first-use order.
std::vector<std::string> required_variables(PromptKind kind);

struct PromptVars {
  std::optional<std::string> formal_statement_name;
  std::optional<std::string> informal_statement;
  std::optional<std::string> formal_statement;
  std::optional<std::string> formal_theorem;
  std::optional<std::string> prev_round_num;
  std::optional<std::string> error_message_for_prev_round;
  std::optional<std::string> theorem_hints_section;

  const std::optional<std::string>* lookup(std::string_view name) const;
};

/// Substitutes every `{{ name }}` in one pass; values are inserted verbatim
/// and never re-scanned. Throws MissingVariable.
std::string render_prompt(PromptKind kind, const PromptVars& vars);

/// Trimmed contents of each <search>...</search> pair, in order.
std::vector<std::string> parse_search_queries(std::string_view response);

enum class Verdict { Appropriate, Inappropriate };

struct Judgement {
  Verdict verdict = Verdict::Inappropriate;
  std::string rationale;

  bool appropriate() const { return verdict == Verdict::Appropriate; }
};

/// Reads the last `Judgement:` line; the rationale is the `Thought:` text
/// preceding it, if any.
Judgement parse_judgement(std::string_view response);

/// `theorem_` followed by the first 12 hex digits of SHA-256(informal).
std::string generate_theorem_name(std::string_view informal);

/// The code with each error span wrapped in <error></error>, followed by the
/// messages themselves.
std::string build_error_annotation(std::string_view code, const VerificationResult& result);

inline constexpr std::size_t kMaxHints = 20;

/// Bulleted `- <full_name> : <statement>` lines, at most `cap` of them.
std::string render_hints_section(const std::vector<TheoremHit>& hits, std::size_t cap = kMaxHints);

}  // namespace sketchprove::agents
