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

#include "sketchprove/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>

namespace sketchprove::orchestrator {

using state::AgentRole;
using state::NodeId;
using state::NodeStatus;
using state::ProofNode;
using state::ProofTree;

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Formalize: return "Formalize";
    case ActionKind::SyntaxCheck: return "SyntaxCheck";
    case ActionKind::SemanticCheck: return "SemanticCheck";
    case ActionKind::Prove: return "Prove";
    case ActionKind::Verify: return "Verify";
    case ActionKind::ParseAst: return "ParseAst";
    case ActionKind::GenQueries: return "GenQueries";
    case ActionKind::Lookup: return "Lookup";
    case ActionKind::Sketch: return "Sketch";
    case ActionKind::SketchCheck: return "SketchCheck";
    case ActionKind::ExtractSubgoals: return "ExtractSubgoals";
    case ActionKind::Backtrack: return "Backtrack";
    case ActionKind::Reconstruct: return "Reconstruct";
    case ActionKind::Finish: return "Finish";
  }
  return "Finish";
}

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::None: return "None";
    case FailureReason::FormalizationExhausted: return "FormalizationExhausted";
    case FailureReason::SketchExhausted: return "SketchExhausted";
    case FailureReason::DepthExceeded: return "DepthExceeded";
    case FailureReason::ServiceFailure: return "ServiceFailure";
    case FailureReason::FinalVerificationFailed: return "FinalVerificationFailed";
    case FailureReason::Stuck: return "Stuck";
  }
  return "None";
}

namespace {

Action targeted(ActionKind kind, const NodeId& target) {
  Action a;
  a.kind = kind;
  a.target = target;
  return a;
}

Action finish_failure(FailureReason reason, std::string message, NodeId node = {}) {
  Action a;
  a.kind = ActionKind::Finish;
  a.target = std::move(node);
  a.reason = reason;
  a.message = std::move(message);
  return a;
}

// Lower runs first.
int priority(ActionKind kind) {
  switch (kind) {
    case ActionKind::Formalize: return 0;
    case ActionKind::SyntaxCheck: return 1;
    case ActionKind::SemanticCheck: return 2;
    case ActionKind::Prove: return 3;
    case ActionKind::Verify: return 4;
    case ActionKind::ParseAst:
    case ActionKind::ExtractSubgoals: return 5;
    case ActionKind::GenQueries:
    case ActionKind::Lookup: return 6;
    case ActionKind::Sketch:
    case ActionKind::SketchCheck: return 7;
    default: return 8;
  }
}

bool overflowing(const ProofNode& n, const Limits& limits) {
  return n.status == NodeStatus::AwaitingQueryGen && n.depth >= limits.max_depth;
}

std::string backticked(std::string_view name) { return "`" + std::string(name) + "`"; }

std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return os.str();
}

std::vector<services::ChatMessage> to_messages(const std::vector<state::ChatTurn>& turns) {
  std::vector<services::ChatMessage> out;
  for (const auto& t : turns) out.push_back({t.role, t.content});
  return out;
}

std::vector<state::ChatTurn> conversation(const ProofNode& n, AgentRole role) {
  auto it = n.conversations.find(role);
  return it == n.conversations.end() ? std::vector<state::ChatTurn>{} : it->second;
}

// The declaration inside the response's last Lean block, header stripped.
std::optional<std::string> response_declaration(const std::string& response) {
  try {
    std::string code = lean::extract_code_block(response);
    std::string body = lean::split_source(code).body;
    if (lean::declaration_name(body).empty()) return std::nullopt;
    return body;
  } catch (const lean::SourceError&) {
    return std::nullopt;
  }
}

// Shifts diagnostics from the verified unit onto the declaration alone.
VerificationResult relative_to_body(VerificationResult r, const std::string& unit, const std::string& body) {
  std::size_t offset = std::count(unit.begin(), unit.end() - static_cast<std::ptrdiff_t>(body.size()), '\n');
  for (auto& m : r.errors) {
    bool in_body = m.start && m.start->line > offset;
    if (!in_body) {
      m.start.reset();
      m.end.reset();
      continue;
    }
    m.start->line -= offset;
    if (m.end) {
      if (m.end->line > offset) {
        m.end->line -= offset;
      } else {
        m.end.reset();
      }
    }
  }
  return r;
}

std::string annotate(const std::string& unit, const std::string& body, const VerificationResult& r) {
  return agents::build_error_annotation(body, relative_to_body(r, unit, body));
}

const char* kNoCode = "no Lean 4 declaration was found in a ```lean4 code block of the response";

// Statement drift check shared by proofs and sketches.
std::optional<std::string> statement_changed(const ProofNode& n, const std::string& body) {
  std::string want = lean::declaration_header(n.formal ? n.formal->body : std::string());
  std::string got = lean::declaration_header(body);
  if (want == got) return std::nullopt;
  return "the declaration must keep the original statement `" + want + "` unchanged, got `" + got + "`";
}

// Why a verified sketch still cannot be decomposed, if at all.
std::optional<std::string> sketch_shape_problem(const std::string& sketch) {
  auto haves = lean::find_unproven_haves(sketch);
  if (haves.empty()) return "the sketch has no `have <name> : <type> := by sorry` subgoals";
  std::set<std::string> names;
  for (const auto& h : haves) {
    if (!names.insert(h.name).second) return "subgoal name " + backticked(h.name) + " is used more than once";
  }
  if (lean::count_sorries(sketch) != haves.size()) {
    return "every `sorry` in the sketch must be the entire proof of a named `have`";
  }
  return std::nullopt;
}

void mark_proven(ProofTree& tree, const NodeId& id) {
  tree.node(id).status = NodeStatus::Proven;
  auto parent = tree.node(id).parent;
  while (parent) {
    ProofNode& p = tree.node(*parent);
    if (p.status != NodeStatus::AwaitingChildren) break;
    bool all = std::all_of(p.children.begin(), p.children.end(),
                           [&](const NodeId& c) { return tree.node(c).status == NodeStatus::Proven; });
    if (!all) break;
    p.status = NodeStatus::Proven;
    parent = p.parent;
  }
}

// A sketch that cannot proceed goes back to the decomposer with feedback.
void reject_sketch(ProofTree& tree, const NodeId& id, const std::string& feedback) {
  tree.record_verdict(id, AgentRole::Decomposer, VerificationResult::failure(feedback));
  ProofNode& n = tree.node(id);
  n.last_feedback = feedback;
  n.sketch.reset();
  n.sketch_ast.reset();
  n.pending_code.reset();
  n.status = tree.sketch_exhausted(id) ? NodeStatus::Failed : NodeStatus::AwaitingSketch;
}

}  // namespace

std::optional<Action> node_action(const ProofNode& n) {
  auto make = [&](ActionKind k) { return targeted(k, n.id); };
  switch (n.status) {
    case NodeStatus::AwaitingFormalization: return make(ActionKind::Formalize);
    case NodeStatus::AwaitingSyntaxCheck: return make(ActionKind::SyntaxCheck);
    case NodeStatus::AwaitingSemanticCheck: return make(ActionKind::SemanticCheck);
    case NodeStatus::AwaitingProof: return make(ActionKind::Prove);
    case NodeStatus::AwaitingVerification: return make(ActionKind::Verify);
    case NodeStatus::AwaitingAstParse:
      return make(n.sketch_ast ? ActionKind::ExtractSubgoals : ActionKind::ParseAst);
    case NodeStatus::AwaitingQueryGen: return make(ActionKind::GenQueries);
    case NodeStatus::AwaitingLookup: return make(ActionKind::Lookup);
    case NodeStatus::AwaitingSketch: return make(ActionKind::Sketch);
    case NodeStatus::AwaitingSketchCheck: return make(ActionKind::SketchCheck);
    case NodeStatus::AwaitingChildren:
    case NodeStatus::Proven:
    case NodeStatus::Failed: return std::nullopt;
  }
  return std::nullopt;
}

std::vector<Action> pending_actions(const ProofTree& tree) {
  struct Ranked {
    int priority;
    int depth;
    std::uint64_t seq;
    Action action;
  };
  std::vector<Ranked> ranked;
  for (const ProofNode* n : tree.nodes_in_order()) {
    if (overflowing(*n, tree.limits())) continue;
    if (auto a = node_action(*n)) ranked.push_back({priority(a->kind), n->depth, n->seq, *a});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return std::tie(a.priority, a.depth, a.seq) < std::tie(b.priority, b.depth, b.seq);
  });
  std::vector<Action> out;
  for (auto& r : ranked) out.push_back(std::move(r.action));
  return out;
}

Action handle_depth_overflow(const ProofTree& tree, const NodeId& id) {
  const ProofNode& n = tree.node(id);
  if (auto ancestor = tree.find_backtrack_ancestor(id)) return targeted(ActionKind::Backtrack, *ancestor);
  return finish_failure(FailureReason::DepthExceeded,
                        "subgoal " + backticked(n.name) + " at depth " + std::to_string(n.depth) +
                            " needs decomposition beyond max_depth = " + std::to_string(tree.limits().max_depth) +
                            " and no ancestor can be backtracked to",
                        id);
}

Action handle_failed_node(const ProofTree& tree, const NodeId& id) {
  const ProofNode& n = tree.node(id);
  if (tree.formalization_exhausted(id)) {
    return finish_failure(FailureReason::FormalizationExhausted,
                          "formalization failed after " + std::to_string(n.counters.formalize_retries) +
                              " rounds" + (n.last_feedback ? ": " + *n.last_feedback : std::string()),
                          id);
  }
  if (auto ancestor = tree.find_backtrack_ancestor(id)) return targeted(ActionKind::Backtrack, *ancestor);
  return finish_failure(FailureReason::SketchExhausted,
                        "no valid proof sketch for " + backticked(n.name) + " after " +
                            std::to_string(n.counters.sketch_corrections_used) +
                            " attempts and no ancestor can be backtracked to",
                        id);
}

Action next_action(const ProofTree& tree) {
  if (!tree.has_root()) return finish_failure(FailureReason::Stuck, "the proof tree is empty");
  const NodeId& root = tree.root();
  if (tree.node(root).status == NodeStatus::Proven) return targeted(ActionKind::Reconstruct, root);

  // Failures are resolved once every node at their depth or above has
  // settled, shallowest and leftmost first, so the choice does not depend on
  // how sibling work was interleaved.
  std::vector<std::pair<std::vector<std::size_t>, const ProofNode*>> failures;
  std::vector<std::pair<std::vector<std::size_t>, const ProofNode*>> stack{{{}, &tree.node(root)}};
  while (!stack.empty()) {
    auto [path, n] = stack.back();
    stack.pop_back();
    if (n->status == NodeStatus::Failed || overflowing(*n, tree.limits())) failures.emplace_back(path, n);
    for (std::size_t i = 0; i < n->children.size(); ++i) {
      auto child = path;
      child.push_back(i);
      stack.emplace_back(std::move(child), &tree.node(n->children[i]));
    }
  }
  auto pending = pending_actions(tree);
  if (!failures.empty()) {
    auto first = std::min_element(failures.begin(), failures.end(), [](const auto& a, const auto& b) {
      return std::make_pair(a.second->depth, a.first) < std::make_pair(b.second->depth, b.first);
    });
    const ProofNode* failed = first->second;
    bool settled = std::none_of(pending.begin(), pending.end(),
                                [&](const Action& a) { return tree.node(a.target).depth <= failed->depth; });
    if (settled || pending.empty()) {
      return failed->status == NodeStatus::Failed ? handle_failed_node(tree, failed->id)
                                                  : handle_depth_overflow(tree, failed->id);
    }
  }
  if (pending.empty()) return finish_failure(FailureReason::Stuck, "no node has work left but the root is unproven");
  return pending.front();
}

Outcome run(const Problem& problem, const config::Config& cfg, Agents agents, Options options) {
  ProofTree tree = initial_tree(problem, config::typed_limits(cfg));
  return Orchestrator(std::move(agents), std::move(options)).run(tree);
}

ProofTree initial_tree(const Problem& problem, const Limits& limits) {
  ProofTree tree(limits);
  if (problem.formal) {
    tree.add_root_formal({problem.formal->preamble, lean::statement_with_sorry(problem.formal->body)});
  } else if (problem.informal) {
    tree.add_root_informal(*problem.informal, agents::generate_theorem_name(*problem.informal),
                           lean::normalize_preamble(""));
  } else {
    throw OrchestratorError(OrchestratorError::Kind::WrongStatus, "problem has neither an informal nor a formal statement");
  }
  return tree;
}

Agents make_agents(const config::Config& cfg) {
  using config::AgentLlm;
  auto chat = [&](AgentLlm a) { return std::make_shared<services::HttpChatBackend>(config::chat_backend(cfg, a)); };
  return Agents{chat(AgentLlm::Formalizer),
                chat(AgentLlm::Semantics),
                chat(AgentLlm::Prover),
                chat(AgentLlm::SearchQuery),
                chat(AgentLlm::Decomposer),
                std::make_shared<services::KiminaClient>(config::kimina(cfg)),
                std::make_shared<services::LeanExploreClient>(config::lean_explore(cfg))};
}

std::string Outcome::report(const ProofTree& tree) const {
  std::ostringstream os;
  if (success) {
    os << "status: proven\nactions: " << actions << "\n";
    return os.str();
  }
  os << "status: failed\nreason: " << to_string(reason) << "\n";
  if (!node.empty()) os << "node: " << node << "\n";
  os << "message: " << message << "\nactions: " << actions << "\n\nproof tree:\n";
  for (const ProofNode* n : tree.nodes_in_order()) {
    os << std::string(2 * static_cast<std::size_t>(n->depth) + 2, ' ') << n->id << " " << n->name << " ["
       << state::to_string(n->status) << "] formalize_retries=" << n->counters.formalize_retries
       << " passes_used=" << n->counters.passes_used
       << " sketch_corrections_used=" << n->counters.sketch_corrections_used
       << " decompositions_used=" << n->counters.decompositions_used << "\n";
  }
  os << "\nThe full prompt/response history of every node is stored in the checkpoint.\n";
  return os.str();
}

Orchestrator::Orchestrator(Agents agents, Options options) : agents_(std::move(agents)), options_(std::move(options)) {
  if (options_.workers == 0) options_.workers = 1;
}

Orchestrator::Job Orchestrator::prepare(const ProofTree& tree, const Action& action) const {
  const ProofNode& n = tree.node(action.target);
  const NodeId id = n.id;

  switch (action.kind) {
    case ActionKind::Formalize: {
      agents::PromptVars vars;
      vars.formal_statement_name = n.name;
      vars.informal_statement = n.informal_statement.value_or("");
      std::string prompt = agents::render_prompt(agents::PromptKind::Formalizer, vars);
      return [this, id, prompt]() -> Apply {
        std::string response;
        std::optional<std::string> failure;
        try {
          response = agents_.formalizer->complete({{"user", prompt}});
        } catch (const services::ServiceError& e) {
          failure = e.what();
        }
        return [id, prompt, response, failure](ProofTree& t) {
          t.node(id).conversations.erase(AgentRole::Formalizer);
          t.record_attempt(id, AgentRole::Formalizer, prompt, response, std::nullopt);
          ProofNode& node = t.node(id);
          node.pending_code = failure ? std::nullopt : response_declaration(response);
          node.last_feedback = failure;
          node.status = NodeStatus::AwaitingSyntaxCheck;
        };
      };
    }

    case ActionKind::SyntaxCheck: {
      std::optional<std::string> code = n.pending_code;
      std::optional<std::string> feedback = n.last_feedback;
      std::string unit = code ? n.with_preamble(*code) : std::string();
      return [this, id, code, unit, feedback]() -> Apply {
        VerificationResult r = !code ? VerificationResult::failure(feedback.value_or(kNoCode))
                                     : agents_.verifier->verify(unit);
        return [id, code, unit, r](ProofTree& t) {
          t.record_verdict(id, AgentRole::Formalizer, r);
          ProofNode& node = t.node(id);
          if (r.passed) {
            node.last_feedback.reset();
            node.status = NodeStatus::AwaitingSemanticCheck;
            return;
          }
          node.last_feedback = code ? annotate(unit, *code, r) : r.errors.at(0).message;
          node.pending_code.reset();
          node.status = t.formalization_exhausted(id) ? NodeStatus::Failed : NodeStatus::AwaitingFormalization;
        };
      };
    }

    case ActionKind::SemanticCheck: {
      agents::PromptVars vars;
      vars.informal_statement = n.informal_statement.value_or("");
      vars.formal_statement = n.pending_code.value_or("");
      std::string prompt = agents::render_prompt(agents::PromptKind::SemanticCheck, vars);
      return [this, id, prompt]() -> Apply {
        std::string response;
        agents::Judgement j;
        try {
          response = agents_.semantic_checker->complete({{"user", prompt}});
          j = agents::parse_judgement(response);
        } catch (const services::ServiceError& e) {
          j.rationale = e.what();
        } catch (const agents::AgentError& e) {
          j.rationale = e.what();
        }
        return [id, prompt, response, j](ProofTree& t) {
          VerificationResult verdict;
          if (j.appropriate()) {
            verdict.passed = verdict.complete = true;
          } else {
            verdict = VerificationResult::failure("semantic check rejected the formalization: " + j.rationale);
          }
          t.node(id).conversations.erase(AgentRole::SemanticChecker);
          t.record_attempt(id, AgentRole::SemanticChecker, prompt, response, verdict);
          ProofNode& node = t.node(id);
          if (j.appropriate()) {
            std::string statement = lean::statement_with_sorry(*node.pending_code);
            node.formal->body = statement;
            node.name = lean::declaration_name(statement);
            node.pending_code.reset();
            node.last_feedback.reset();
            node.status = NodeStatus::AwaitingProof;
            return;
          }
          node.last_feedback = verdict.errors.at(0).message;
          node.pending_code.reset();
          node.status = t.formalization_exhausted(id) ? NodeStatus::Failed : NodeStatus::AwaitingFormalization;
        };
      };
    }

    case ActionKind::Prove: {
      auto conv = conversation(n, AgentRole::Prover);
      agents::PromptVars vars;
      std::string prompt;
      if (conv.empty()) {
        vars.formal_statement = n.formal->combined();
        prompt = agents::render_prompt(agents::PromptKind::ProverInitial, vars);
      } else {
        vars.prev_round_num = std::to_string(conv.size() / 2);
        vars.error_message_for_prev_round = n.last_feedback.value_or("error: unknown error");
        prompt = agents::render_prompt(agents::PromptKind::ProverCorrection, vars);
      }
      auto messages = to_messages(conv);
      messages.push_back({"user", prompt});
      return [this, id, prompt, messages]() -> Apply {
        std::string response;
        std::optional<std::string> failure;
        try {
          response = agents_.prover->complete(messages);
        } catch (const services::ServiceError& e) {
          failure = e.what();
        }
        return [id, prompt, response, failure](ProofTree& t) {
          t.record_attempt(id, AgentRole::Prover, prompt, response, std::nullopt);
          ProofNode& node = t.node(id);
          node.pending_code = failure ? std::nullopt : response_declaration(response);
          node.last_feedback = failure;
          node.status = NodeStatus::AwaitingVerification;
        };
      };
    }

    case ActionKind::Verify: {
      std::optional<std::string> code = n.pending_code;
      std::optional<std::string> problem = code ? statement_changed(n, *code) : n.last_feedback.value_or(kNoCode);
      std::string unit = code ? n.with_preamble(*code) : std::string();
      return [this, id, code, unit, problem]() -> Apply {
        VerificationResult r = problem ? VerificationResult::failure(*problem) : agents_.verifier->verify(unit);
        return [id, code, unit, r](ProofTree& t) {
          t.record_verdict(id, AgentRole::Prover, r);
          ProofNode& node = t.node(id);
          node.pending_code.reset();
          if (r.proven()) {
            node.proof_attempt = code;
            node.last_feedback.reset();
            mark_proven(t, id);
            return;
          }
          node.last_feedback = code ? annotate(unit, *code, r) : r.errors.at(0).message;
          if (r.passed && !r.complete) {
            *node.last_feedback += "\nerror: the proof is incomplete; it must not use sorry or admit";
          }
          node.status = t.prover_exhausted(id) ? NodeStatus::AwaitingQueryGen : NodeStatus::AwaitingProof;
        };
      };
    }

    case ActionKind::GenQueries: {
      agents::PromptVars vars;
      vars.formal_theorem = n.formal->body;
      bool backtrack = n.backtracked;
      std::string prompt =
          agents::render_prompt(backtrack ? agents::PromptKind::QueryBacktrack : agents::PromptKind::QueryInitial, vars);
      std::vector<services::ChatMessage> messages;
      if (backtrack) messages = to_messages(conversation(n, AgentRole::Decomposer));
      messages.push_back({"user", prompt});
      return [this, id, prompt, messages]() -> Apply {
        std::vector<std::string> responses;
        std::vector<std::string> queries;
        // One re-ask when nothing parses; then go on with whatever we have.
        for (int attempt = 0; attempt < 2 && queries.empty(); ++attempt) {
          try {
            responses.push_back(agents_.query_generator->complete(messages));
            queries = agents::parse_search_queries(responses.back());
          } catch (const services::ServiceError&) {
            break;
          } catch (const agents::AgentError&) {
            queries.clear();
          }
        }
        return [id, prompt, responses, queries](ProofTree& t) {
          t.node(id).conversations.erase(AgentRole::QueryGenerator);
          for (const auto& r : responses) t.record_attempt(id, AgentRole::QueryGenerator, prompt, r, std::nullopt);
          ProofNode& node = t.node(id);
          node.search_queries = queries;
          node.status = NodeStatus::AwaitingLookup;
        };
      };
    }

    case ActionKind::Lookup: {
      auto queries = n.search_queries;
      return [this, id, queries]() -> Apply {
        std::vector<TheoremHit> hits;
        if (!queries.empty() && agents_.search) {
          try {
            hits = agents_.search->search(queries);
          } catch (const services::ServiceError&) {
            hits.clear();
          }
        }
        return [id, hits](ProofTree& t) {
          ProofNode& node = t.node(id);
          node.hints = hits;
          node.status = NodeStatus::AwaitingSketch;
        };
      };
    }

    case ActionKind::Sketch: {
      auto conv = conversation(n, AgentRole::Decomposer);
      agents::PromptVars vars;
      agents::PromptKind kind = agents::PromptKind::DecomposerInitial;
      std::string hints = agents::render_hints_section(n.hints, options_.hint_cap);
      if (!conv.empty() && n.last_feedback) {
        kind = agents::PromptKind::DecomposerCorrection;
        vars.prev_round_num = std::to_string(conv.size() / 2);
        vars.error_message_for_prev_round = *n.last_feedback;
      } else if (!conv.empty() && n.backtracked) {
        kind = agents::PromptKind::DecomposerBacktrack;
        vars.prev_round_num = std::to_string(conv.size() / 2);
        vars.theorem_hints_section = hints;
      } else {
        conv.clear();
        vars.formal_theorem = n.formal->combined();
        vars.theorem_hints_section = hints;
      }
      std::string prompt = agents::render_prompt(kind, vars);
      bool fresh = conv.empty();
      auto messages = to_messages(conv);
      messages.push_back({"user", prompt});
      return [this, id, prompt, messages, fresh]() -> Apply {
        std::string response;
        std::optional<std::string> failure;
        try {
          response = agents_.decomposer->complete(messages);
        } catch (const services::ServiceError& e) {
          failure = e.what();
        }
        return [id, prompt, response, failure, fresh](ProofTree& t) {
          if (fresh) t.node(id).conversations.erase(AgentRole::Decomposer);
          t.record_attempt(id, AgentRole::Decomposer, prompt, response, std::nullopt);
          ProofNode& node = t.node(id);
          node.pending_code = failure ? std::nullopt : response_declaration(response);
          node.last_feedback = failure;
          ++node.sketch_rounds;
          node.status = NodeStatus::AwaitingSketchCheck;
        };
      };
    }

    case ActionKind::SketchCheck: {
      std::optional<std::string> code = n.pending_code;
      std::optional<std::string> problem = code ? statement_changed(n, *code) : n.last_feedback.value_or(kNoCode);
      std::string unit = code ? n.with_preamble(*code) : std::string();
      return [this, id, code, unit, problem]() -> Apply {
        VerificationResult r = problem ? VerificationResult::failure(*problem) : agents_.verifier->verify(unit);
        return [id, code, unit, r](ProofTree& t) {
          std::optional<std::string> shape;
          if (r.passed && !r.complete) shape = sketch_shape_problem(*code);
          if (!r.passed || shape) {
            std::string feedback = !code ? r.errors.at(0).message : annotate(unit, *code, r);
            if (shape) feedback = *shape;
            t.record_verdict(id, AgentRole::Decomposer, r.passed ? VerificationResult::failure(*shape) : r);
            ProofNode& node = t.node(id);
            node.last_feedback = feedback;
            node.pending_code.reset();
            node.status = t.sketch_exhausted(id) ? NodeStatus::Failed : NodeStatus::AwaitingSketch;
            return;
          }
          t.record_verdict(id, AgentRole::Decomposer, r);
          ProofNode& node = t.node(id);
          node.pending_code.reset();
          node.last_feedback.reset();
          node.backtracked = false;
          if (r.complete) {
            // A sketch without placeholders already proves the statement.
            node.proof_attempt = code;
            mark_proven(t, id);
            return;
          }
          node.sketch = code;
          node.sketch_ast.reset();
          node.status = NodeStatus::AwaitingAstParse;
        };
      };
    }

    case ActionKind::ParseAst: {
      std::string unit = n.with_preamble(n.sketch.value_or(""));
      return [this, id, unit]() -> Apply {
        std::optional<ast::ParsedAst> parsed;
        std::string failure;
        try {
          parsed = agents_.verifier->fetch_ast(unit, "User.Code");
        } catch (const services::ServiceError& e) {
          if (e.kind() == services::ServiceError::Kind::ServiceUnavailable) throw;
          failure = e.what();
        }
        return [id, parsed, failure](ProofTree& t) {
          if (!parsed) {
            reject_sketch(t, id, "the sketch's syntax tree could not be exported: " + failure);
            return;
          }
          t.node(id).sketch_ast = parsed;
        };
      };
    }

    case ActionKind::ExtractSubgoals: {
      return [id]() -> Apply {
        return [id](ProofTree& t) {
          ProofNode& node = t.node(id);
          auto subgoals = ast::extract_subgoals(node.sketch_ast->root, node.sketch_ast->sorries);
          std::vector<std::string> found;
          for (const auto& h : lean::find_unproven_haves(*node.sketch)) found.push_back(h.name);
          std::vector<std::string> extracted;
          for (const auto& s : subgoals) extracted.push_back(s.name);
          if (extracted != found) {
            reject_sketch(t, id, "the " + std::to_string(extracted.size()) +
                                     " subgoals found in the syntax tree do not match the sketch's unproven haves");
            return;
          }
          for (const auto& s : subgoals) t.add_child(id, s, subgoals);
          t.node(id).status = NodeStatus::AwaitingChildren;
        };
      };
    }

    default:
      throw OrchestratorError(OrchestratorError::Kind::WrongStatus,
                              std::string(to_string(action.kind)) + " is not a node-level action");
  }
}

void Orchestrator::dispatch(ProofTree& tree, const Action& action) {
  if (options_.observer) options_.observer(action, tree);
  if (action.kind == ActionKind::Backtrack) {
    tree.prune_subtree(action.target);
    tree.node(action.target).last_feedback.reset();
    log(action, tree, "pruned");
    return;
  }
  prepare(tree, action)()(tree);
  log(action, tree, tree.contains(action.target) ? std::string(state::to_string(tree.node(action.target).status)) : "");
}

void Orchestrator::run_formalization(ProofTree& tree, const NodeId& id) {
  auto in_pipeline = [&] {
    auto s = tree.node(id).status;
    return s == NodeStatus::AwaitingFormalization || s == NodeStatus::AwaitingSyntaxCheck ||
           s == NodeStatus::AwaitingSemanticCheck;
  };
  if (!in_pipeline()) {
    throw OrchestratorError(OrchestratorError::Kind::WrongStatus, "node `" + id + "` is not awaiting formalization");
  }
  while (in_pipeline()) dispatch(tree, *node_action(tree.node(id)));
  if (tree.node(id).status == NodeStatus::Failed) {
    throw OrchestratorError(OrchestratorError::Kind::FormalizationExhausted,
                            handle_failed_node(tree, id).message);
  }
}

ProveOutcome Orchestrator::run_prover_pass(ProofTree& tree, const NodeId& id) {
  auto proving = [&] {
    auto s = tree.node(id).status;
    return s == NodeStatus::AwaitingProof || s == NodeStatus::AwaitingVerification;
  };
  if (!proving()) throw OrchestratorError(OrchestratorError::Kind::WrongStatus, "node `" + id + "` is not awaiting proof");
  while (proving()) dispatch(tree, *node_action(tree.node(id)));
  return tree.node(id).status == NodeStatus::Proven ? ProveOutcome::Proven : ProveOutcome::NeedsDecomposition;
}

std::optional<Action> Orchestrator::run_decomposition(ProofTree& tree, const NodeId& id) {
  auto decomposing = [&] {
    switch (tree.node(id).status) {
      case NodeStatus::AwaitingQueryGen:
      case NodeStatus::AwaitingLookup:
      case NodeStatus::AwaitingSketch:
      case NodeStatus::AwaitingSketchCheck:
      case NodeStatus::AwaitingAstParse: return true;
      default: return false;
    }
  };
  if (!decomposing()) {
    throw OrchestratorError(OrchestratorError::Kind::WrongStatus, "node `" + id + "` does not need decomposition");
  }
  while (decomposing()) dispatch(tree, *node_action(tree.node(id)));
  if (tree.node(id).status == NodeStatus::Failed) return handle_failed_node(tree, id);
  return std::nullopt;
}

void Orchestrator::log(const Action& action, const ProofTree& tree, const std::string& outcome) {
  if (!options_.run_log) return;
  nlohmann::json j;
  j["timestamp"] = now_iso8601();
  j["node"] = action.target;
  j["action"] = to_string(action.kind);
  if (!action.target.empty() && tree.contains(action.target)) {
    j["depth"] = tree.node(action.target).depth;
    j["name"] = tree.node(action.target).name;
  }
  j["outcome"] = outcome;
  *options_.run_log << j.dump() << '\n';
  options_.run_log->flush();
}

void Orchestrator::save(const ProofTree& tree) {
  if (!options_.checkpoint_path) return;
  auto tmp = *options_.checkpoint_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    out << tree.to_checkpoint().dump(2) << '\n';
  }
  std::filesystem::rename(tmp, *options_.checkpoint_path);
}

Outcome Orchestrator::finish(ProofTree& tree, const Action& action, std::size_t actions) {
  if (options_.observer) options_.observer(action, tree);
  log(action, tree, action.success ? "success" : std::string(to_string(action.reason)));
  save(tree);
  Outcome out;
  out.success = action.success;
  out.reason = action.reason;
  out.message = action.message;
  out.node = action.target;
  out.actions = actions;
  return out;
}

Outcome Orchestrator::reconstruct(ProofTree& tree, const NodeId& root, std::size_t actions) {
  Action a = targeted(ActionKind::Reconstruct, root);
  if (options_.observer) options_.observer(a, tree);
  std::string proof = tree.reconstruct(root);
  std::string body = tree.reconstruct_body(root);
  VerificationResult r;
  if (auto problem = statement_changed(tree.node(root), body)) {
    r = VerificationResult::failure(*problem);
  } else {
    r = agents_.verifier->verify(proof);
  }
  log(a, tree, r.proven() ? "verified" : "rejected");
  Action done;
  done.kind = ActionKind::Finish;
  done.target = root;
  if (r.proven()) {
    done.success = true;
    Outcome out = finish(tree, done, actions + 1);
    out.proof = proof;
    return out;
  }
  done.reason = FailureReason::FinalVerificationFailed;
  done.message = "the reconstructed proof did not verify:\n" + agents::build_error_annotation(proof, r);
  Outcome out = finish(tree, done, actions + 1);
  out.proof = proof;
  return out;
}

Outcome Orchestrator::run(ProofTree& tree) {
  tree.validate();
  std::size_t actions = 0;
  while (true) {
    Action action = next_action(tree);
    try {
      if (action.kind == ActionKind::Finish) return finish(tree, action, actions);
      if (action.kind == ActionKind::Reconstruct) return reconstruct(tree, action.target, actions);
      if (action.kind == ActionKind::Backtrack) {
        dispatch(tree, action);
        ++actions;
        save(tree);
        continue;
      }

      // Same kind, same depth: independent nodes that may run side by side.
      std::vector<Action> batch;
      int depth = tree.node(action.target).depth;
      for (const auto& a : pending_actions(tree)) {
        if (batch.size() >= options_.workers) break;
        if (a.kind == action.kind && tree.node(a.target).depth == depth) batch.push_back(a);
      }
      if (batch.empty() || batch.front() != action) batch.insert(batch.begin(), action);
      if (batch.size() > options_.workers) batch.resize(options_.workers);

      std::vector<Job> jobs;
      for (const auto& a : batch) {
        if (options_.observer) options_.observer(a, tree);
        jobs.push_back(prepare(tree, a));
      }
      std::vector<Apply> applies;
      if (jobs.size() == 1) {
        applies.push_back(jobs[0]());
      } else {
        std::vector<std::future<Apply>> futures;
        for (auto& job : jobs) futures.push_back(std::async(std::launch::async, job));
        std::exception_ptr first_error;
        for (auto& f : futures) {
          try {
            applies.push_back(f.get());
          } catch (...) {
            if (!first_error) first_error = std::current_exception();
          }
        }
        if (first_error) std::rethrow_exception(first_error);
      }
      for (std::size_t i = 0; i < batch.size(); ++i) {
        applies[i](tree);
        ++actions;
        const auto& target = batch[i].target;
        log(batch[i], tree, tree.contains(target) ? std::string(state::to_string(tree.node(target).status)) : "");
      }
      save(tree);
    } catch (const services::ServiceError& e) {
      return finish(tree, finish_failure(FailureReason::ServiceFailure, e.what(), action.target), actions);
    }
  }
}

}  // namespace sketchprove::orchestrator
