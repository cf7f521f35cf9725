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
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sketchprove/agents.hpp"
#include "sketchprove/config.hpp"
#include "sketchprove/lean_source.hpp"
#include "sketchprove/limits.hpp"
#include "sketchprove/proof_state.hpp"
#include "sketchprove/services.hpp"

namespace sketchprove::orchestrator {

enum class ActionKind {
  Formalize,
  SyntaxCheck,
  SemanticCheck,
  Prove,
  Verify,
  ParseAst,
  GenQueries,
  Lookup,
  Sketch,
  SketchCheck,
  ExtractSubgoals,
  Backtrack,
  Reconstruct,
  Finish,
};

std::string_view to_string(ActionKind kind);

enum class FailureReason {
  None,
  FormalizationExhausted,
  SketchExhausted,
  DepthExceeded,
  ServiceFailure,
  FinalVerificationFailed,
  Stuck,
};

std::string_view to_string(FailureReason reason);

struct Action {
  ActionKind kind = ActionKind::Finish;
  state::NodeId target;  // empty for Finish
  // Finish only.
  bool success = false;
  FailureReason reason = FailureReason::None;
  std::string message;

  bool operator==(const Action&) const = default;
};

/// The action a node's status calls for, ignoring the rest of the tree.
/// Nothing for AwaitingChildren and terminal nodes.
std::optional<Action> node_action(const state::ProofNode& node);

/// Highest-priority work in the tree: node work by status priority, depth,
/// creation order. A failed or overflowing node is escalated once no work is
/// left at its depth or above.
Action next_action(const state::ProofTree& tree);

/// The node-level actions `next_action` would choose from, best first.
/// Overflowing nodes are left to escalation.
std::vector<Action> pending_actions(const state::ProofTree& tree);

/// Backtrack to the nearest eligible ancestor, or Finish(failure).
Action handle_depth_overflow(const state::ProofTree& tree, const state::NodeId& id);

/// The same escalation for a node whose own budget ran out.
Action handle_failed_node(const state::ProofTree& tree, const state::NodeId& id);

struct Agents {
  std::shared_ptr<services::ChatBackend> formalizer;
  std::shared_ptr<services::ChatBackend> semantic_checker;
  std::shared_ptr<services::ChatBackend> prover;
  std::shared_ptr<services::ChatBackend> query_generator;
  std::shared_ptr<services::ChatBackend> decomposer;
  std::shared_ptr<services::LeanVerifier> verifier;
  std::shared_ptr<services::TheoremSearch> search;
};

/// HTTP clients for every agent and service named in `cfg`.
Agents make_agents(const config::Config& cfg);

struct Options {
  std::size_t workers = 4;
  std::ostream* run_log = nullptr;  // JSON lines
  std::optional<std::filesystem::path> checkpoint_path;
  /// Called on the coordinator before each action is executed.
  std::function<void(const Action&, const state::ProofTree&)> observer;
  std::size_t hint_cap = agents::kMaxHints;
};

struct Outcome {
  bool success = false;
  std::string proof;  // preamble + reconstructed proof
  FailureReason reason = FailureReason::None;
  std::string message;
  state::NodeId node;
  std::size_t actions = 0;

  /// Human-readable failure report.
  std::string report(const state::ProofTree& tree) const;
};

enum class ProveOutcome { Proven, NeedsDecomposition };

class OrchestratorError : public std::runtime_error {
 public:
  enum class Kind { FormalizationExhausted, WrongStatus };

  OrchestratorError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class Orchestrator {
 public:
  explicit Orchestrator(Agents agents, Options options = {});

  /// Executes one node-level action, or a Backtrack.
  void dispatch(state::ProofTree& tree, const Action& action);

  /// Formalize / syntax check / semantic check until the node awaits proof.
  void run_formalization(state::ProofTree& tree, const state::NodeId& id);
  /// Prove / verify until proven or out of passes.
  ProveOutcome run_prover_pass(state::ProofTree& tree, const state::NodeId& id);
  /// Queries, lookup, sketch rounds and extraction. Returns the escalation
  /// (Backtrack or Finish) when the sketch budget runs out.
  std::optional<Action> run_decomposition(state::ProofTree& tree, const state::NodeId& id);

  /// Runs to completion from the tree's current state.
  Outcome run(state::ProofTree& tree);

 private:
  using Apply = std::function<void(state::ProofTree&)>;
  using Job = std::function<Apply()>;

  Job prepare(const state::ProofTree& tree, const Action& action) const;
  Outcome finish(state::ProofTree& tree, const Action& action, std::size_t actions);
  Outcome reconstruct(state::ProofTree& tree, const state::NodeId& root, std::size_t actions);
  void log(const Action& action, const state::ProofTree& tree, const std::string& outcome);
  void save(const state::ProofTree& tree);

  Agents agents_;
  Options options_;
};

struct Problem {
  std::optional<std::string> informal;
  std::optional<lean::LeanSource> formal;
};

/// Builds the tree for `problem` with limits from `cfg` and runs it.
Outcome run(const Problem& problem, const config::Config& cfg, Agents agents, Options options = {});

/// The tree `run` starts from.
state::ProofTree initial_tree(const Problem& problem, const Limits& limits);

}  // namespace sketchprove::orchestrator
