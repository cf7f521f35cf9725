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

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sketchprove/ast_model.hpp"
#include "sketchprove/lean_source.hpp"
#include "sketchprove/limits.hpp"
#include "sketchprove/theorem_hit.hpp"
#include "sketchprove/verification.hpp"

namespace sketchprove::state {

class StateError : public std::runtime_error {
 public:
  enum class Kind { UnknownNode, IncompleteSubtree, InvalidTree, BadCheckpoint, NoSketch };

  StateError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class NodeStatus {
  AwaitingFormalization,
  AwaitingSyntaxCheck,
  AwaitingSemanticCheck,
  AwaitingProof,
  AwaitingVerification,
  AwaitingAstParse,
  AwaitingQueryGen,
  AwaitingLookup,
  AwaitingSketch,
  AwaitingSketchCheck,
  AwaitingChildren,
  Proven,
  Failed,
};

std::string_view to_string(NodeStatus s);
std::optional<NodeStatus> status_from_string(std::string_view s);
inline bool is_terminal(NodeStatus s) { return s == NodeStatus::Proven || s == NodeStatus::Failed; }

enum class AgentRole { Formalizer, SemanticChecker, Prover, QueryGenerator, Decomposer };

std::string_view to_string(AgentRole r);
std::optional<AgentRole> role_from_string(std::string_view s);

using NodeId = std::string;

/// One message of an agent conversation, in chat-completion terms.
struct ChatTurn {
  std::string role;  // "user" or "assistant"
  std::string content;

  bool operator==(const ChatTurn&) const = default;
};

/// A prompt/response exchange kept for provenance; never reset.
struct HistoryEntry {
  AgentRole agent = AgentRole::Prover;
  std::string prompt;
  std::string response;
  std::optional<VerificationResult> verdict;

  bool operator==(const HistoryEntry&) const = default;
};

struct Counters {
  int formalize_retries = 0;
  int self_correction_in_pass = 0;
  int passes_used = 0;
  int sketch_corrections_used = 0;
  int decompositions_used = 0;

  bool operator==(const Counters&) const = default;
};

struct ProofNode {
  NodeId id;
  std::optional<NodeId> parent;
  int depth = 0;
  std::uint64_t seq = 0;  // creation order, used for breadth-first ties

  std::string name;  // declaration name of the formal statement
  std::optional<std::string> informal_statement;
  std::optional<lean::LeanSource> formal;  // preamble + `theorem … := by sorry`
  NodeStatus status = NodeStatus::AwaitingProof;

  std::optional<std::string> proof_attempt;  // declaration text, no preamble
  std::optional<std::string> sketch;         // declaration text, no preamble
  std::vector<NodeId> children;

  std::map<AgentRole, std::vector<ChatTurn>> conversations;
  std::vector<HistoryEntry> history;
  Counters counters;

  // Working state between actions.
  std::optional<std::string> pending_code;      // candidate awaiting a check
  std::optional<std::string> last_feedback;     // annotated errors for the next correction prompt
  std::vector<std::string> search_queries;
  std::vector<TheoremHit> hints;
  std::optional<ast::ParsedAst> sketch_ast;
  bool backtracked = false;  // re-decompose with the backtrack prompts
  int sketch_rounds = 0;     // sketches produced since the last (re)decomposition

  bool is_leaf() const { return children.empty(); }

  /// Verifiable unit: the stored preamble followed by `declaration`.
  std::string with_preamble(std::string_view declaration) const;
};

/// The proof tree. Not thread-safe: a single coordinator owns it.
class ProofTree {
 public:
  explicit ProofTree(Limits limits = {});

  /// Creates the root. A root can be informal (to be formalized) or formal.
  NodeId add_root_informal(std::string informal, std::string name, lean::CanonicalPreamble preamble);
  NodeId add_root_formal(lean::LeanSource formal);

  /// New leaf at depth + 1 awaiting proof. `siblings` is the full extraction
  /// result the subgoal came from (used to decide which earlier haves reach
  /// it); empty means only the subgoal itself.
  NodeId add_child(const NodeId& parent, const ast::Subgoal& subgoal, const std::vector<ast::Subgoal>& siblings = {},
                   ast::SiblingHypotheses policy = ast::SiblingHypotheses::WhenMentioned);

  /// Appends to the role's conversation and the history; updates counters
  /// for failed verdicts:
  ///   Formalizer, SemanticChecker -> formalize_retries
  ///   Prover -> self_correction_in_pass, rolling into passes_used (and a
  ///             fresh prover conversation) when a pass is spent
  ///   Decomposer -> sketch_corrections_used
  void record_attempt(const NodeId& id, AgentRole role, const std::string& prompt, const std::string& response,
                      const std::optional<VerificationResult>& verdict);

  /// Attaches a verdict to the role's latest attempt and applies the counter
  /// rules above.
  void record_verdict(const NodeId& id, AgentRole role, const VerificationResult& verdict);

  std::optional<NodeId> find_backtrack_ancestor(const NodeId& id) const;

  /// Removes every descendant and queues the node for re-decomposition.
  void prune_subtree(const NodeId& id);

  /// Declaration text with every descendant proof spliced in.
  std::string reconstruct_body(const NodeId& id) const;
  /// reconstruct_body under the node's stored preamble.
  std::string reconstruct(const NodeId& id) const;

  /// Throws InvalidTree on any broken structural invariant.
  void validate() const;

  const ProofNode& node(const NodeId& id) const;
  ProofNode& node(const NodeId& id);
  bool contains(const NodeId& id) const { return nodes_.count(id) != 0; }
  const NodeId& root() const;
  bool has_root() const { return root_.has_value(); }
  std::size_t size() const { return nodes_.size(); }
  const Limits& limits() const { return limits_; }
  void set_limits(const Limits& l) { limits_ = l; }

  /// Nodes in creation order.
  std::vector<const ProofNode*> nodes_in_order() const;
  std::vector<NodeId> descendants(const NodeId& id) const;

  bool prover_exhausted(const NodeId& id) const;
  bool sketch_exhausted(const NodeId& id) const;
  bool formalization_exhausted(const NodeId& id) const;

  nlohmann::json to_checkpoint() const;
  static ProofTree from_checkpoint(const nlohmann::json& j);

 private:
  NodeId fresh_id();
  void check(const NodeId& id) const;

  Limits limits_;
  std::map<NodeId, ProofNode> nodes_;
  std::optional<NodeId> root_;
  std::uint64_t next_seq_ = 0;
};

inline constexpr int kCheckpointVersion = 1;

}  // namespace sketchprove::state
