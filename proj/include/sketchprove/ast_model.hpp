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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sketchprove/lean_source.hpp"
#include "sketchprove/verification.hpp"

namespace sketchprove::ast {

class AstError : public std::runtime_error {
 public:
  enum class Kind { MalformedAst, AnonymousSorry, SubgoalNotFound, DuplicateSubgoalName };

  AstError(Kind kind, const std::string& what, std::vector<Position> positions = {})
      : std::runtime_error(what), kind_(kind), positions_(std::move(positions)) {}

  Kind kind() const { return kind_; }
  /// Offending source positions (anonymous sorries, duplicate names).
  const std::vector<Position>& positions() const { return positions_; }

 private:
  Kind kind_;
  std::vector<Position> positions_;
};

/// Syntax-tree node as exported by the AST endpoint.
///
/// Wire shape (unknown fields ignored):
///   { "kind": "Lean.Parser.Tactic.tacticHave_",
///     "value": "h",                       // atoms and identifiers only
///     "pos": {"line": 3, "column": 2},   // optional
///     "endPos": {...},                    // optional
///     "children": [ ... ] }
/// Atoms use kind "atom", identifiers kind "ident".
struct AstNode {
  std::string kind;
  std::optional<std::string> value;
  std::optional<Position> pos;
  std::optional<Position> end_pos;
  std::vector<AstNode> children;

  bool operator==(const AstNode&) const = default;
};

struct Binder {
  std::string name;
  std::string type;

  bool operator==(const Binder&) const = default;
};

/// One entry of the endpoint's `sorries` metadata.
struct SorryInfo {
  std::string goal_type;
  std::vector<Binder> binders;
  Position position;

  bool operator==(const SorryInfo&) const = default;
};

struct ParsedAst {
  AstNode root;
  std::vector<SorryInfo> sorries;
};

struct Subgoal {
  std::string name;
  std::string goal_type;
  std::vector<Binder> context_binders;
  std::string standalone_statement;
  Position position;

  bool operator==(const Subgoal&) const = default;
};

/// How hypotheses introduced by earlier sibling `have`s reach a subgoal.
enum class SiblingHypotheses {
  All,            // every earlier sibling in the goal context is kept
  WhenMentioned,  // kept only when the goal type names it
};

namespace kinds {
inline constexpr std::string_view kAtom = "atom";
inline constexpr std::string_view kIdent = "ident";
inline constexpr std::string_view kHave = "Lean.Parser.Tactic.tacticHave_";
inline constexpr std::string_view kHaveDecl = "Lean.Parser.Term.haveDecl";
inline constexpr std::string_view kHaveIdDecl = "Lean.Parser.Term.haveIdDecl";
inline constexpr std::string_view kHaveId = "Lean.Parser.Term.haveId";
inline constexpr std::string_view kTypeSpec = "Lean.Parser.Term.typeSpec";
inline constexpr std::string_view kByTactic = "Lean.Parser.Term.byTactic";
inline constexpr std::string_view kTacticSeq = "Lean.Parser.Tactic.tacticSeq";
inline constexpr std::string_view kTacticSeq1Indented = "Lean.Parser.Tactic.tacticSeq1Indented";
inline constexpr std::string_view kTacticSorry = "Lean.Parser.Tactic.tacticSorry";
inline constexpr std::string_view kTermSorry = "Lean.Parser.Term.sorry";
inline constexpr std::string_view kTheorem = "Lean.Parser.Command.theorem";
inline constexpr std::string_view kModule = "Lean.Parser.Module.module";
}  // namespace kinds

AstNode node_from_json(const nlohmann::json& j);
nlohmann::json node_to_json(const AstNode& node);

/// Splits a pretty-printed goal (`h : T` lines, then `⊢ goal`) into binders
/// and the goal proposition.
SorryInfo parse_goal(std::string_view goal, Position position);

/// Accepts either an endpoint payload `{ "ast": ..., "sorries": [...] }` or a
/// bare tree.
ParsedAst parse_ast(const nlohmann::json& payload);
ParsedAst parse_ast(std::string_view payload_text);
inline ParsedAst parse_ast(const std::string& payload_text) { return parse_ast(std::string_view(payload_text)); }
inline ParsedAst parse_ast(const char* payload_text) { return parse_ast(std::string_view(payload_text)); }

/// Every `have` whose whole proof is `sorry`, in source order. Throws
/// AnonymousSorry if any sorry is not the entire proof of a named have.
std::vector<Subgoal> extract_subgoals(const AstNode& ast, const std::vector<SorryInfo>& sorries);

std::vector<std::string> get_unproven_subgoal_names(const AstNode& ast);

/// A standalone theorem for `name`: header, hypotheses, goal, `by sorry`.
std::string get_named_subgoal_code(const std::vector<Subgoal>& subgoals, std::string_view name,
                                   const lean::CanonicalPreamble& preamble,
                                   const std::vector<Binder>& enclosing_binders,
                                   SiblingHypotheses policy = SiblingHypotheses::WhenMentioned);

/// The body part of get_named_subgoal_code (no preamble).
std::string render_subgoal_statement(const std::vector<Subgoal>& subgoals, std::string_view name,
                                     const std::vector<Binder>& enclosing_binders,
                                     SiblingHypotheses policy = SiblingHypotheses::WhenMentioned);

}  // namespace sketchprove::ast
