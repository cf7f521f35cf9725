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

#include "sketchprove/proof_state.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <set>

namespace sketchprove::state {

namespace {

constexpr std::array<std::pair<NodeStatus, std::string_view>, 13> kStatusNames = {{
    {NodeStatus::AwaitingFormalization, "AwaitingFormalization"},
    {NodeStatus::AwaitingSyntaxCheck, "AwaitingSyntaxCheck"},
    {NodeStatus::AwaitingSemanticCheck, "AwaitingSemanticCheck"},
    {NodeStatus::AwaitingProof, "AwaitingProof"},
    {NodeStatus::AwaitingVerification, "AwaitingVerification"},
    {NodeStatus::AwaitingAstParse, "AwaitingAstParse"},
    {NodeStatus::AwaitingQueryGen, "AwaitingQueryGen"},
    {NodeStatus::AwaitingLookup, "AwaitingLookup"},
    {NodeStatus::AwaitingSketch, "AwaitingSketch"},
    {NodeStatus::AwaitingSketchCheck, "AwaitingSketchCheck"},
    {NodeStatus::AwaitingChildren, "AwaitingChildren"},
    {NodeStatus::Proven, "Proven"},
    {NodeStatus::Failed, "Failed"},
}};

constexpr std::array<std::pair<AgentRole, std::string_view>, 5> kRoleNames = {{
    {AgentRole::Formalizer, "formalizer"},
    {AgentRole::SemanticChecker, "semantic_checker"},
    {AgentRole::Prover, "prover"},
    {AgentRole::QueryGenerator, "query_generator"},
    {AgentRole::Decomposer, "decomposer"},
}};

template <typename T>
std::optional<T> opt_get(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <typename T>
void opt_put(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

}  // namespace

std::string_view to_string(NodeStatus s) {
  for (const auto& [k, v] : kStatusNames) {
    if (k == s) return v;
  }
  return "?";
}

std::optional<NodeStatus> status_from_string(std::string_view s) {
  for (const auto& [k, v] : kStatusNames) {
    if (v == s) return k;
  }
  return std::nullopt;
}

std::string_view to_string(AgentRole r) {
  for (const auto& [k, v] : kRoleNames) {
    if (k == r) return v;
  }
  return "?";
}

std::optional<AgentRole> role_from_string(std::string_view s) {
  for (const auto& [k, v] : kRoleNames) {
    if (v == s) return k;
  }
  return std::nullopt;
}

std::string ProofNode::with_preamble(std::string_view declaration) const {
  return lean::LeanSource{formal ? formal->preamble : std::string(), std::string(declaration)}.combined();
}

ProofTree::ProofTree(Limits limits) : limits_(limits) {}

NodeId ProofTree::fresh_id() { return "n" + std::to_string(next_seq_); }

void ProofTree::check(const NodeId& id) const {
  if (!nodes_.count(id)) throw StateError(StateError::Kind::UnknownNode, "unknown node `" + id + "`");
}

const ProofNode& ProofTree::node(const NodeId& id) const {
  check(id);
  return nodes_.at(id);
}

ProofNode& ProofTree::node(const NodeId& id) {
  check(id);
  return nodes_.at(id);
}

const NodeId& ProofTree::root() const {
  if (!root_) throw StateError(StateError::Kind::UnknownNode, "tree has no root");
  return *root_;
}

NodeId ProofTree::add_root_informal(std::string informal, std::string name, lean::CanonicalPreamble preamble) {
  if (root_) throw StateError(StateError::Kind::InvalidTree, "tree already has a root");
  ProofNode n;
  n.id = fresh_id();
  n.seq = next_seq_++;
  n.name = std::move(name);
  n.informal_statement = std::move(informal);
  n.formal = lean::LeanSource{preamble.text(), ""};
  n.status = NodeStatus::AwaitingFormalization;
  root_ = n.id;
  nodes_.emplace(n.id, std::move(n));
  return *root_;
}

NodeId ProofTree::add_root_formal(lean::LeanSource formal) {
  if (root_) throw StateError(StateError::Kind::InvalidTree, "tree already has a root");
  ProofNode n;
  n.id = fresh_id();
  n.seq = next_seq_++;
  n.name = lean::declaration_name(formal.body);
  n.formal = std::move(formal);
  n.status = NodeStatus::AwaitingProof;
  root_ = n.id;
  nodes_.emplace(n.id, std::move(n));
  return *root_;
}

NodeId ProofTree::add_child(const NodeId& parent_id, const ast::Subgoal& subgoal,
                            const std::vector<ast::Subgoal>& siblings, ast::SiblingHypotheses policy) {
  ProofNode& parent = node(parent_id);
  if (!parent.sketch) {
    throw StateError(StateError::Kind::NoSketch, "node `" + parent_id + "` has no sketch to decompose");
  }
  std::string statement = siblings.empty() ? ast::render_subgoal_statement({subgoal}, subgoal.name, {}, policy)
                                           : ast::render_subgoal_statement(siblings, subgoal.name, {}, policy);
  ProofNode n;
  n.id = fresh_id();
  n.seq = next_seq_++;
  n.parent = parent_id;
  n.depth = parent.depth + 1;
  n.name = subgoal.name;
  n.formal = lean::LeanSource{parent.formal ? parent.formal->preamble : std::string(), statement};
  n.status = NodeStatus::AwaitingProof;
  parent.children.push_back(n.id);
  NodeId id = n.id;
  nodes_.emplace(id, std::move(n));
  return id;
}

void ProofTree::record_attempt(const NodeId& id, AgentRole role, const std::string& prompt,
                               const std::string& response, const std::optional<VerificationResult>& verdict) {
  ProofNode& n = node(id);
  auto& conv = n.conversations[role];
  conv.push_back({"user", prompt});
  conv.push_back({"assistant", response});
  n.history.push_back({role, prompt, response, std::nullopt});
  if (verdict) record_verdict(id, role, *verdict);
}

void ProofTree::record_verdict(const NodeId& id, AgentRole role, const VerificationResult& verdict) {
  ProofNode& n = node(id);
  auto last = std::find_if(n.history.rbegin(), n.history.rend(), [&](const HistoryEntry& e) { return e.agent == role; });
  if (last == n.history.rend()) {
    throw StateError(StateError::Kind::InvalidTree, "no " + std::string(to_string(role)) + " attempt on `" + id + "`");
  }
  last->verdict = verdict;

  switch (role) {
    case AgentRole::Formalizer:
    case AgentRole::SemanticChecker:
      if (!verdict.passed) ++n.counters.formalize_retries;
      break;
    case AgentRole::Prover:
      if (!verdict.proven()) {
        if (++n.counters.self_correction_in_pass >= limits_.prover_self_correction) {
          n.counters.self_correction_in_pass = 0;
          ++n.counters.passes_used;
          n.conversations.erase(AgentRole::Prover);
        }
      }
      break;
    case AgentRole::Decomposer:
      if (!verdict.passed) ++n.counters.sketch_corrections_used;
      break;
    case AgentRole::QueryGenerator:
      break;
  }
}

bool ProofTree::prover_exhausted(const NodeId& id) const {
  return node(id).counters.passes_used >= limits_.prover_max_pass;
}

bool ProofTree::sketch_exhausted(const NodeId& id) const {
  return node(id).counters.sketch_corrections_used >= limits_.decomposer_self_correction;
}

bool ProofTree::formalization_exhausted(const NodeId& id) const {
  return node(id).counters.formalize_retries >= limits_.formalizer_max_retries;
}

std::optional<NodeId> ProofTree::find_backtrack_ancestor(const NodeId& id) const {
  const ProofNode* cur = &node(id);
  int distance = 0;
  while (cur->parent) {
    cur = &node(*cur->parent);
    ++distance;
    if (distance < 2) continue;
    if (cur->counters.sketch_corrections_used < limits_.decomposer_self_correction &&
        cur->counters.decompositions_used < limits_.decomposer_self_correction) {
      return cur->id;
    }
  }
  return std::nullopt;
}

std::vector<NodeId> ProofTree::descendants(const NodeId& id) const {
  std::vector<NodeId> out;
  std::deque<NodeId> queue(node(id).children.begin(), node(id).children.end());
  while (!queue.empty()) {
    NodeId cur = queue.front();
    queue.pop_front();
    out.push_back(cur);
    for (const auto& c : node(cur).children) queue.push_back(c);
  }
  return out;
}

void ProofTree::prune_subtree(const NodeId& id) {
  for (const auto& d : descendants(id)) nodes_.erase(d);
  ProofNode& n = node(id);
  n.children.clear();
  n.status = NodeStatus::AwaitingQueryGen;
  ++n.counters.decompositions_used;
  n.backtracked = true;
  n.sketch_ast.reset();
  n.pending_code.reset();
  n.search_queries.clear();
  n.hints.clear();
}

std::string ProofTree::reconstruct_body(const NodeId& id) const {
  const ProofNode& n = node(id);
  if (n.status != NodeStatus::Proven) {
    throw StateError(StateError::Kind::IncompleteSubtree,
                     "node `" + id + "` (" + n.name + ") is " + std::string(to_string(n.status)));
  }
  if (n.children.empty()) {
    if (!n.proof_attempt) {
      throw StateError(StateError::Kind::IncompleteSubtree, "proven leaf `" + id + "` has no proof text");
    }
    return *n.proof_attempt;
  }
  if (!n.sketch) throw StateError(StateError::Kind::NoSketch, "internal node `" + id + "` has no sketch");
  std::string text = *n.sketch;
  for (const auto& c : n.children) {
    const ProofNode& child = node(c);
    text = lean::replace_subgoal(text, child.name, lean::extract_tactic_body(reconstruct_body(c)));
  }
  return text;
}

std::string ProofTree::reconstruct(const NodeId& id) const { return node(id).with_preamble(reconstruct_body(id)); }

std::vector<const ProofNode*> ProofTree::nodes_in_order() const {
  std::vector<const ProofNode*> out;
  out.reserve(nodes_.size());
  for (const auto& [_, n] : nodes_) out.push_back(&n);
  std::sort(out.begin(), out.end(), [](const ProofNode* a, const ProofNode* b) { return a->seq < b->seq; });
  return out;
}

void ProofTree::validate() const {
  auto fail = [](const std::string& why) { throw StateError(StateError::Kind::InvalidTree, why); };
  if (nodes_.empty()) {
    if (root_) fail("root id set on an empty tree");
    return;
  }
  if (!root_ || !nodes_.count(*root_)) fail("missing root");
  std::set<std::uint64_t> seqs;
  for (const auto& [id, n] : nodes_) {
    if (id != n.id) fail("node keyed `" + id + "` carries id `" + n.id + "`");
    if (!seqs.insert(n.seq).second) fail("duplicate sequence number on `" + id + "`");
    if (n.seq >= next_seq_) fail("sequence number of `" + id + "` ahead of the counter");
    if (id == *root_) {
      if (n.parent) fail("root has a parent");
      if (n.depth != 0) fail("root depth is not 0");
    } else {
      if (!n.parent) fail("second root `" + id + "`");
      auto p = nodes_.find(*n.parent);
      if (p == nodes_.end()) fail("`" + id + "` points at missing parent `" + *n.parent + "`");
      const auto& siblings = p->second.children;
      if (std::count(siblings.begin(), siblings.end(), id) != 1) fail("parent of `" + id + "` does not list it once");
      if (n.depth != p->second.depth + 1) fail("depth law broken at `" + id + "`");
    }
    for (const auto& c : n.children) {
      auto ch = nodes_.find(c);
      if (ch == nodes_.end()) fail("`" + id + "` lists missing child `" + c + "`");
      if (ch->second.parent != id) fail("child `" + c + "` does not point back at `" + id + "`");
    }
    if (!n.children.empty() && !n.sketch) fail("internal node `" + id + "` has no sketch");
    const auto& c = n.counters;
    if (c.formalize_retries > limits_.formalizer_max_retries || c.passes_used > limits_.prover_max_pass ||
        c.self_correction_in_pass >= std::max(1, limits_.prover_self_correction) ||
        c.sketch_corrections_used > limits_.decomposer_self_correction ||
        c.decompositions_used > limits_.decomposer_self_correction) {
      fail("counter over budget on `" + id + "`");
    }
  }
  // Every node reachable from the root exactly once (acyclic, connected).
  std::size_t reached = 1 + descendants(*root_).size();
  if (reached != nodes_.size()) fail("tree is not connected or has a cycle");
}

namespace {

nlohmann::json source_json(const std::optional<lean::LeanSource>& s) {
  if (!s) return nullptr;
  return {{"preamble", s->preamble}, {"body", s->body}};
}

nlohmann::json hit_json(const TheoremHit& h) {
  return {{"full_name", h.full_name}, {"statement", h.statement}, {"package", h.source_package}, {"score", h.score}};
}

}  // namespace

nlohmann::json ProofTree::to_checkpoint() const {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["limits"] = {{"formalizer_max_retries", limits_.formalizer_max_retries},
                 {"prover_self_correction", limits_.prover_self_correction},
                 {"prover_max_pass", limits_.prover_max_pass},
                 {"decomposer_self_correction", limits_.decomposer_self_correction},
                 {"max_depth", limits_.max_depth}};
  opt_put(j, "root", root_);
  j["next_seq"] = next_seq_;
  auto& arr = j["nodes"] = nlohmann::json::array();
  for (const ProofNode* n : nodes_in_order()) {
    nlohmann::json o;
    o["id"] = n->id;
    opt_put(o, "parent", n->parent);
    o["depth"] = n->depth;
    o["seq"] = n->seq;
    o["name"] = n->name;
    opt_put(o, "informal_statement", n->informal_statement);
    o["formal"] = source_json(n->formal);
    o["status"] = to_string(n->status);
    opt_put(o, "proof_attempt", n->proof_attempt);
    opt_put(o, "sketch", n->sketch);
    o["children"] = n->children;
    auto& conv = o["conversations"] = nlohmann::json::object();
    for (const auto& [role, turns] : n->conversations) {
      auto& list = conv[std::string(to_string(role))] = nlohmann::json::array();
      for (const auto& t : turns) list.push_back({{"role", t.role}, {"content", t.content}});
    }
    auto& hist = o["history"] = nlohmann::json::array();
    for (const auto& h : n->history) {
      nlohmann::json e = {{"agent", to_string(h.agent)}, {"prompt", h.prompt}, {"response", h.response}};
      opt_put(e, "verdict", h.verdict);
      hist.push_back(std::move(e));
    }
    o["counters"] = {{"formalize_retries", n->counters.formalize_retries},
                     {"self_correction_in_pass", n->counters.self_correction_in_pass},
                     {"passes_used", n->counters.passes_used},
                     {"sketch_corrections_used", n->counters.sketch_corrections_used},
                     {"decompositions_used", n->counters.decompositions_used}};
    opt_put(o, "pending_code", n->pending_code);
    opt_put(o, "last_feedback", n->last_feedback);
    o["search_queries"] = n->search_queries;
    auto& hints = o["hints"] = nlohmann::json::array();
    for (const auto& h : n->hints) hints.push_back(hit_json(h));
    o["backtracked"] = n->backtracked;
    o["sketch_rounds"] = n->sketch_rounds;
    arr.push_back(std::move(o));
  }
  return j;
}

ProofTree ProofTree::from_checkpoint(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("version", 0) != kCheckpointVersion) {
      throw StateError(StateError::Kind::BadCheckpoint, "unsupported checkpoint version");
    }
    Limits limits;
    const auto& l = j.at("limits");
    limits.formalizer_max_retries = l.at("formalizer_max_retries");
    limits.prover_self_correction = l.at("prover_self_correction");
    limits.prover_max_pass = l.at("prover_max_pass");
    limits.decomposer_self_correction = l.at("decomposer_self_correction");
    limits.max_depth = l.at("max_depth");
    ProofTree tree(limits);
    tree.root_ = opt_get<std::string>(j, "root");
    tree.next_seq_ = j.at("next_seq");
    for (const auto& o : j.at("nodes")) {
      ProofNode n;
      n.id = o.at("id");
      n.parent = opt_get<std::string>(o, "parent");
      n.depth = o.at("depth");
      n.seq = o.at("seq");
      n.name = o.at("name");
      n.informal_statement = opt_get<std::string>(o, "informal_statement");
      if (const auto& f = o.at("formal"); !f.is_null()) n.formal = lean::LeanSource{f.at("preamble"), f.at("body")};
      auto status = status_from_string(o.at("status").get<std::string>());
      if (!status) throw StateError(StateError::Kind::BadCheckpoint, "unknown status on `" + n.id + "`");
      n.status = *status;
      n.proof_attempt = opt_get<std::string>(o, "proof_attempt");
      n.sketch = opt_get<std::string>(o, "sketch");
      n.children = o.at("children").get<std::vector<std::string>>();
      for (const auto& [role_name, turns] : o.at("conversations").items()) {
        auto role = role_from_string(role_name);
        if (!role) throw StateError(StateError::Kind::BadCheckpoint, "unknown agent role `" + role_name + "`");
        auto& list = n.conversations[*role];
        for (const auto& t : turns) list.push_back({t.at("role"), t.at("content")});
      }
      for (const auto& e : o.at("history")) {
        auto role = role_from_string(e.at("agent").get<std::string>());
        if (!role) throw StateError(StateError::Kind::BadCheckpoint, "unknown agent in history");
        n.history.push_back({*role, e.at("prompt"), e.at("response"), opt_get<VerificationResult>(e, "verdict")});
      }
      const auto& c = o.at("counters");
      n.counters = {c.at("formalize_retries"), c.at("self_correction_in_pass"), c.at("passes_used"),
                    c.at("sketch_corrections_used"), c.at("decompositions_used")};
      n.pending_code = opt_get<std::string>(o, "pending_code");
      n.last_feedback = opt_get<std::string>(o, "last_feedback");
      n.search_queries = o.value("search_queries", std::vector<std::string>{});
      for (const auto& h : o.value("hints", nlohmann::json::array())) {
        n.hints.push_back({h.at("full_name"), h.at("statement"), h.value("package", ""), h.value("score", 0.0)});
      }
      n.backtracked = o.value("backtracked", false);
      n.sketch_rounds = o.value("sketch_rounds", 0);
      std::string id = n.id;
      if (!tree.nodes_.emplace(id, std::move(n)).second) {
        throw StateError(StateError::Kind::BadCheckpoint, "duplicate node `" + id + "`");
      }
    }
    try {
      tree.validate();
    } catch (const StateError& e) {
      throw StateError(StateError::Kind::BadCheckpoint, std::string("checkpoint is not a valid tree: ") + e.what());
    }
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw StateError(StateError::Kind::BadCheckpoint, std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace sketchprove::state
