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

#include "sketchprove/ast_model.hpp"

#include <algorithm>
#include <map>

#include "sketchprove/lean_lexer.hpp"

namespace sketchprove::ast {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) { return s.ends_with(suffix); }

bool is_atom(const AstNode& n, std::string_view value) {
  return n.kind == kinds::kAtom && n.value && *n.value == value;
}

bool is_have(const AstNode& n) {
  return ends_with(n.kind, "tacticHave_") || ends_with(n.kind, "Term.have") || n.kind == "have";
}

bool is_sorry(const AstNode& n) {
  return ends_with(n.kind, "tacticSorry") || ends_with(n.kind, "Term.sorry") || n.kind == "sorry";
}

bool is_sequence(const AstNode& n) {
  return ends_with(n.kind, "tacticSeq") || ends_with(n.kind, "tacticSeq1Indented") ||
         ends_with(n.kind, "tacticSeqBracketed") || n.kind == "null";
}

std::optional<Position> first_position(const AstNode& n) {
  if (n.pos) return n.pos;
  for (const auto& c : n.children) {
    if (auto p = first_position(c)) return p;
  }
  return std::nullopt;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// First identifier of a have, searched before its type or `:=`.
std::optional<std::string> have_name(const AstNode& have) {
  std::optional<std::string> found;
  bool stopped = false;
  auto walk = [&](auto&& self, const AstNode& n) -> void {
    if (found || stopped) return;
    if (ends_with(n.kind, "typeSpec") || is_atom(n, ":=") || ends_with(n.kind, "byTactic")) {
      stopped = true;
      return;
    }
    if (n.kind == kinds::kIdent && n.value) {
      found = *n.value;
      return;
    }
    for (const auto& c : n.children) self(self, c);
  };
  for (const auto& c : have.children) walk(walk, c);
  if (!found && have.value) found = *have.value;
  return found;
}

// The subtree right after the have's `:=` atom.
const AstNode* have_proof(const AstNode& node) {
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (is_atom(node.children[i], ":=") && i + 1 < node.children.size()) return &node.children[i + 1];
  }
  for (const auto& c : node.children) {
    if (is_have(c) || ends_with(c.kind, "byTactic")) continue;
    if (const AstNode* p = have_proof(c)) return p;
  }
  return nullptr;
}

std::optional<std::string> have_type_text(const AstNode& node) {
  if (ends_with(node.kind, "typeSpec") && node.value) return node.value;
  for (const auto& c : node.children) {
    if (is_have(c) || ends_with(c.kind, "byTactic")) continue;
    if (auto t = have_type_text(c)) return t;
  }
  return std::nullopt;
}

void flatten_tactics(const AstNode& n, std::vector<const AstNode*>& out) {
  for (const auto& c : n.children) {
    if (c.kind == kinds::kAtom) continue;
    if (is_sequence(c)) {
      flatten_tactics(c, out);
    } else {
      out.push_back(&c);
    }
  }
}

/// The sorry node when `proof` consists of nothing but `sorry`.
const AstNode* sole_sorry(const AstNode& proof) {
  if (is_sorry(proof)) return &proof;
  if (is_atom(proof, "sorry")) return &proof;
  if (!ends_with(proof.kind, "byTactic")) return nullptr;
  std::vector<const AstNode*> tactics;
  flatten_tactics(proof, tactics);
  if (tactics.size() == 1 && (is_sorry(*tactics.front()) || is_atom(*tactics.front(), "sorry"))) return tactics.front();
  return nullptr;
}

struct SorryOccurrence {
  const AstNode* node;
  std::optional<Position> pos;
};

void collect_sorries(const AstNode& n, bool inside_sorry, std::vector<SorryOccurrence>& out) {
  bool here = is_sorry(n) || (!inside_sorry && is_atom(n, "sorry"));
  if (here) out.push_back({&n, first_position(n)});
  for (const auto& c : n.children) collect_sorries(c, inside_sorry || here, out);
}

struct HaveHit {
  std::string name;
  const AstNode* sorry;
  std::optional<std::string> type_text;
};

// A have whose proof is sorry yields a subgoal, then
// recurse into every child.
void traverse(const AstNode& node, std::vector<HaveHit>& hits) {
  if (is_have(node)) {
    if (const AstNode* proof = have_proof(node)) {
      if (const AstNode* s = sole_sorry(*proof)) {
        auto name = have_name(node);
        if (!name || !lean::is_identifier(*name)) {
          throw AstError(AstError::Kind::MalformedAst, "have with sorry proof has no usable name");
        }
        hits.push_back({*name, s, have_type_text(node)});
      }
    }
  }
  for (const auto& c : node.children) traverse(c, hits);
}

std::string format_positions(const std::vector<Position>& ps) {
  std::string out;
  for (const auto& p : ps) {
    if (!out.empty()) out += ", ";
    out += std::to_string(p.line) + ":" + std::to_string(p.column);
  }
  return out;
}

/// Matches have-sorries against every sorry in the tree; any sorry left over
/// is anonymous.
std::vector<HaveHit> checked_hits(const AstNode& ast) {
  std::vector<HaveHit> hits;
  traverse(ast, hits);
  std::vector<SorryOccurrence> all;
  collect_sorries(ast, false, all);
  std::vector<Position> anonymous;
  for (const auto& occ : all) {
    bool claimed = std::any_of(hits.begin(), hits.end(), [&](const HaveHit& h) { return h.sorry == occ.node; });
    if (!claimed) anonymous.push_back(occ.pos.value_or(Position{0, 0}));
  }
  if (!anonymous.empty()) {
    throw AstError(AstError::Kind::AnonymousSorry,
                   "sorry not attached to a named have at " + format_positions(anonymous), anonymous);
  }
  return hits;
}

std::string render_binder(const Binder& b) {
  if (b.name.find("✝") != std::string::npos) {
    // Inaccessible names: instances become instance binders, others are unreachable anyway.
    if (b.name.starts_with("inst")) return "[" + b.type + "]";
    return {};
  }
  return "(" + b.name + " : " + b.type + ")";
}

bool mentions(std::string_view text, std::string_view name) {
  for (const auto& t : lean::tokenize(text)) {
    if (t.kind == lean::TokenKind::Identifier && t.text == name) return true;
  }
  return false;
}

}  // namespace

AstNode node_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw AstError(AstError::Kind::MalformedAst, "AST node is not an object");
  auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string() || kind->get<std::string>().empty()) {
    throw AstError(AstError::Kind::MalformedAst, "AST node without kind");
  }
  AstNode n;
  n.kind = kind->get<std::string>();
  if (auto v = j.find("value"); v != j.end() && v->is_string()) n.value = v->get<std::string>();
  try {
    if (auto p = j.find("pos"); p != j.end() && p->is_object()) n.pos = p->get<Position>();
    if (auto p = j.find("endPos"); p != j.end() && p->is_object()) n.end_pos = p->get<Position>();
  } catch (const nlohmann::json::exception& e) {
    throw AstError(AstError::Kind::MalformedAst, std::string("bad position: ") + e.what());
  }
  if (auto c = j.find("children"); c != j.end()) {
    if (!c->is_array()) throw AstError(AstError::Kind::MalformedAst, "children is not an array");
    n.children.reserve(c->size());
    for (const auto& child : *c) n.children.push_back(node_from_json(child));
  }
  return n;
}

nlohmann::json node_to_json(const AstNode& node) {
  nlohmann::json j = {{"kind", node.kind}};
  if (node.value) j["value"] = *node.value;
  if (node.pos) j["pos"] = *node.pos;
  if (node.end_pos) j["endPos"] = *node.end_pos;
  if (!node.children.empty()) {
    auto& arr = j["children"] = nlohmann::json::array();
    for (const auto& c : node.children) arr.push_back(node_to_json(c));
  }
  return j;
}

SorryInfo parse_goal(std::string_view goal, Position position) {
  SorryInfo info;
  info.position = position;
  std::vector<std::string> goal_lines;
  bool in_goal = false;
  std::size_t group_start = std::string_view::npos;
  std::size_t p = 0;
  while (p <= goal.size()) {
    std::size_t nl = goal.find('\n', p);
    std::string_view raw = goal.substr(p, nl == std::string_view::npos ? std::string_view::npos : nl - p);
    p = nl == std::string_view::npos ? goal.size() + 1 : nl + 1;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    bool continuation = raw.front() == ' ' || raw.front() == '\t';
    if (line.starts_with("⊢")) {
      in_goal = true;
      goal_lines.emplace_back(trim(line.substr(std::string_view("⊢").size())));
      continue;
    }
    if (in_goal) {
      goal_lines.emplace_back(line);
      continue;
    }
    if (line.starts_with("case ")) continue;
    if (continuation && group_start < info.binders.size()) {
      // Wrapped hypothesis type: extend every binder of the last group.
      for (std::size_t i = group_start; i < info.binders.size(); ++i) {
        auto& type = info.binders[i].type;
        if (!type.empty()) type += ' ';
        type += line;
      }
      continue;
    }
    std::size_t colon = line.find(" : ");
    std::string type;
    if (colon != std::string_view::npos) {
      type = std::string(trim(line.substr(colon + 3)));
    } else if (line.ends_with(" :")) {
      colon = line.size() - 2;
    } else {
      continue;
    }
    std::string_view names = line.substr(0, colon);
    group_start = info.binders.size();
    std::size_t q = 0;
    while (q < names.size()) {
      while (q < names.size() && names[q] == ' ') ++q;
      std::size_t e = names.find(' ', q);
      if (e == std::string_view::npos) e = names.size();
      if (e > q) info.binders.push_back(Binder{std::string(names.substr(q, e - q)), type});
      q = e;
    }
  }
  for (std::size_t i = 0; i < goal_lines.size(); ++i) {
    if (i) info.goal_type += ' ';
    info.goal_type += goal_lines[i];
  }
  return info;
}

ParsedAst parse_ast(const nlohmann::json& payload) {
  if (!payload.is_object()) throw AstError(AstError::Kind::MalformedAst, "payload is not an object");
  ParsedAst out;
  if (payload.contains("ast")) {
    out.root = node_from_json(payload.at("ast"));
  } else {
    out.root = node_from_json(payload);
  }
  if (auto s = payload.find("sorries"); s != payload.end() && !s->is_null()) {
    if (!s->is_array()) throw AstError(AstError::Kind::MalformedAst, "sorries is not an array");
    for (const auto& entry : *s) {
      if (!entry.is_object() || !entry.contains("pos")) {
        throw AstError(AstError::Kind::MalformedAst, "sorries entry without pos");
      }
      Position pos;
      try {
        pos = entry.at("pos").get<Position>();
      } catch (const nlohmann::json::exception& e) {
        throw AstError(AstError::Kind::MalformedAst, std::string("bad sorry position: ") + e.what());
      }
      std::string goal = entry.value("goal", std::string());
      out.sorries.push_back(parse_goal(goal, pos));
    }
  }
  std::sort(out.sorries.begin(), out.sorries.end(),
            [](const SorryInfo& a, const SorryInfo& b) { return a.position < b.position; });
  return out;
}

ParsedAst parse_ast(std::string_view payload_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw AstError(AstError::Kind::MalformedAst, std::string("invalid JSON: ") + e.what());
  }
  return parse_ast(j);
}

std::vector<Subgoal> extract_subgoals(const AstNode& ast, const std::vector<SorryInfo>& sorries) {
  auto hits = checked_hits(ast);
  std::vector<SorryInfo> sorted = sorries;
  std::sort(sorted.begin(), sorted.end(),
            [](const SorryInfo& a, const SorryInfo& b) { return a.position < b.position; });

  bool positioned = std::all_of(hits.begin(), hits.end(), [](const HaveHit& h) { return first_position(*h.sorry); });
  std::vector<bool> used(sorted.size(), false);
  std::vector<Subgoal> out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto& h = hits[i];
    const SorryInfo* info = nullptr;
    if (positioned) {
      auto pos = *first_position(*h.sorry);
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (!used[k] && sorted[k].position == pos) {
          info = &sorted[k];
          used[k] = true;
          break;
        }
      }
    } else if (i < sorted.size()) {
      info = &sorted[i];
      used[i] = true;
    }
    Subgoal g;
    g.name = h.name;
    if (info) {
      g.goal_type = info->goal_type;
      g.context_binders = info->binders;
      g.position = info->position;
    } else if (h.type_text) {
      g.goal_type = *h.type_text;
      g.position = first_position(*h.sorry).value_or(Position{0, 0});
    } else {
      throw AstError(AstError::Kind::MalformedAst, "no goal information for have `" + h.name + "`");
    }
    out.push_back(std::move(g));
  }
  std::vector<Position> orphaned;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (!used[k]) orphaned.push_back(sorted[k].position);
  }
  if (!orphaned.empty()) {
    throw AstError(AstError::Kind::AnonymousSorry,
                   "sorry metadata not attached to a named have at " + format_positions(orphaned), orphaned);
  }
  std::stable_sort(out.begin(), out.end(), [](const Subgoal& a, const Subgoal& b) { return a.position < b.position; });
  for (auto& g : out) {
    g.standalone_statement = render_subgoal_statement({g}, g.name, {}, SiblingHypotheses::All);
  }
  return out;
}

std::vector<std::string> get_unproven_subgoal_names(const AstNode& ast) {
  std::vector<std::string> names;
  for (const auto& h : checked_hits(ast)) names.push_back(h.name);
  return names;
}

std::string render_subgoal_statement(const std::vector<Subgoal>& subgoals, std::string_view name,
                                     const std::vector<Binder>& enclosing_binders, SiblingHypotheses policy) {
  std::vector<std::size_t> matches;
  for (std::size_t i = 0; i < subgoals.size(); ++i) {
    if (subgoals[i].name == name) matches.push_back(i);
  }
  if (matches.empty()) {
    throw AstError(AstError::Kind::SubgoalNotFound, "no subgoal named `" + std::string(name) + "`");
  }
  if (matches.size() > 1) {
    std::vector<Position> ps;
    for (auto i : matches) ps.push_back(subgoals[i].position);
    throw AstError(AstError::Kind::DuplicateSubgoalName,
                   "subgoal `" + std::string(name) + "` declared at " + format_positions(ps), ps);
  }
  const Subgoal& goal = subgoals[matches.front()];
  std::vector<std::string> earlier;
  for (std::size_t i = 0; i < matches.front(); ++i) earlier.push_back(subgoals[i].name);

  std::vector<Binder> binders;
  auto present = [&](const std::string& n) {
    return std::any_of(binders.begin(), binders.end(), [&](const Binder& b) { return b.name == n; });
  };
  for (const auto& b : enclosing_binders) {
    if (!present(b.name)) binders.push_back(b);
  }
  for (const auto& b : goal.context_binders) {
    if (present(b.name)) continue;
    bool sibling = std::find(earlier.begin(), earlier.end(), b.name) != earlier.end();
    if (sibling && policy == SiblingHypotheses::WhenMentioned && !mentions(goal.goal_type, b.name)) continue;
    binders.push_back(b);
  }

  std::string out = "theorem " + goal.name;
  for (const auto& b : binders) {
    auto r = render_binder(b);
    if (!r.empty()) out += " " + r;
  }
  out += " : " + goal.goal_type + " := by\n  sorry";
  return out;
}

std::string get_named_subgoal_code(const std::vector<Subgoal>& subgoals, std::string_view name,
                                   const lean::CanonicalPreamble& preamble,
                                   const std::vector<Binder>& enclosing_binders, SiblingHypotheses policy) {
  return preamble.text() + "\n\n" + render_subgoal_statement(subgoals, name, enclosing_binders, policy);
}

}  // namespace sketchprove::ast
