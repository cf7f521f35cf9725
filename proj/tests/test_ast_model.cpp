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

#include <doctest.h>

#include <random>

#include "sketchprove/ast_model.hpp"
#include "sketchprove/lean_source.hpp"
#include "support/fake_lean.hpp"
#include "support/fixtures.hpp"

using namespace sketchprove;
using namespace sketchprove::ast;
using sketchprove::testing::FakeLean;
using sketchprove::testing::read_fixture;

namespace {

const std::vector<std::string> kInfinitudeNames = {"prod_primes_def", "choose_P", "prime_divisor_exists",
                                                   "divisor_gt_n", "conclusion"};

std::size_t count_kind(const AstNode& n, std::string_view kind) {
  std::size_t c = n.kind == kind ? 1 : 0;
  for (const auto& ch : n.children) c += count_kind(ch, kind);
  return c;
}

std::vector<std::string> names_of(const std::vector<Subgoal>& gs) {
  std::vector<std::string> out;
  for (const auto& g : gs) out.push_back(g.name);
  return out;
}

ParsedAst parse_via_fake(const std::string& code) { return parse_ast(FakeLean().export_ast(code)); }

AstError::Kind ast_error_kind(auto&& fn) {
  try {
    fn();
  } catch (const AstError& e) {
    return e.kind();
  }
  FAIL("expected AstError");
  return AstError::Kind::MalformedAst;
}

}  // namespace

TEST_CASE("parse_ast reads the frozen infinitude payload") {
  auto parsed = parse_ast(read_fixture("infinitude_sketch.ast.json"));
  CHECK(parsed.root.kind == kinds::kModule);
  CHECK(count_kind(parsed.root, kinds::kTacticSorry) == 5);
  REQUIRE(parsed.sorries.size() == 5);
  CHECK(parsed.sorries[0].position == Position{12, 4});
  CHECK(parsed.sorries[4].goal_type == "∀ n, ∃ p, p > n ∧ Prime p");
  CHECK(parsed.sorries[4].binders.size() == 4);
  CHECK(parsed.sorries[4].binders[3].name == "divisor_gt_n");
}

TEST_CASE("parse_ast edge cases") {
  auto single = parse_ast(std::string_view(R"({"kind":"module","children":[]})"));
  CHECK(single.root.kind == "module");
  CHECK(single.root.children.empty());
  CHECK(single.sorries.empty());

  CHECK(ast_error_kind([] { parse_ast(std::string_view(R"({"children":[]})")); }) == AstError::Kind::MalformedAst);
  CHECK(ast_error_kind([] { parse_ast(std::string_view(R"({"kind":"m","children":[{"value":"x"}]})")); }) ==
        AstError::Kind::MalformedAst);
  CHECK(ast_error_kind([] { parse_ast(std::string_view("{not json")); }) == AstError::Kind::MalformedAst);
  CHECK(ast_error_kind([] { parse_ast(std::string_view(R"({"kind":"m","children":7})")); }) ==
        AstError::Kind::MalformedAst);
  CHECK(ast_error_kind([] { parse_ast(std::string_view(R"({"kind":""})")); }) == AstError::Kind::MalformedAst);
}

TEST_CASE("node json round trip is lossless") {
  auto payload = nlohmann::json::parse(read_fixture("infinitude_sketch.ast.json"));
  AstNode root = node_from_json(payload["ast"]);
  CHECK(node_from_json(node_to_json(root)) == root);
}

TEST_CASE("parse_goal splits hypotheses and goal") {
  auto info = parse_goal("n : ℕ\nh : 4 ≤ n\n⊢ n ^ 2 ≤ n !", Position{3, 4});
  REQUIRE(info.binders.size() == 2);
  CHECK(info.binders[0] == Binder{"n", "ℕ"});
  CHECK(info.binders[1] == Binder{"h", "4 ≤ n"});
  CHECK(info.goal_type == "n ^ 2 ≤ n !");

  auto grouped = parse_goal("a b : ℝ\nhab :\n  a ≤\n    b\n⊢ a ≤ b", Position{1, 0});
  REQUIRE(grouped.binders.size() == 3);
  CHECK(grouped.binders[1] == Binder{"b", "ℝ"});
  CHECK(grouped.goal_type == "a ≤ b");

  auto cased = parse_goal("case h\nx : ℕ\n⊢ x = x", Position{1, 0});
  CHECK(cased.binders.size() == 1);
  CHECK(parse_goal("⊢ True", Position{1, 0}).binders.empty());
}

TEST_CASE("extract_subgoals on the infinitude sketch") {
  auto parsed = parse_ast(read_fixture("infinitude_sketch.ast.json"));
  auto goals = extract_subgoals(parsed.root, parsed.sorries);
  CHECK(names_of(goals) == kInfinitudeNames);
  CHECK(get_unproven_subgoal_names(parsed.root) == kInfinitudeNames);
  CHECK(goals.size() == lean::count_sorries(read_fixture("listings/infinitude_sketch.lean")));
  for (std::size_t i = 1; i < goals.size(); ++i) CHECK(goals[i - 1].position < goals[i].position);
  CHECK(goals[2].goal_type ==
        "∀ n P, P = ∏ p in Finset.filter Prime (Finset.range (n + 1)), p → ∃ q, Prime q ∧ q ∣ (P + 1)");
}

TEST_CASE("extract_subgoals on the decomposer example sketch") {
  auto src = read_fixture("listings/nsqlefactn_sketch.lean");
  auto parsed = parse_via_fake(src);
  auto goals = extract_subgoals(parsed.root, parsed.sorries);
  CHECK(names_of(goals) == std::vector<std::string>{"base_case", "inductive_step", "final_proof"});
  CHECK(goals.size() == lean::count_sorries(src));
  CHECK(goals[0].goal_type == "4 ^ 2 ≤ 4 !");
}

TEST_CASE("fully proven theorem and empty module have no subgoals") {
  auto parsed = parse_via_fake(read_fixture("listings/even_sum_proof.lean"));
  CHECK(extract_subgoals(parsed.root, parsed.sorries).empty());

  AstNode empty{std::string(kinds::kModule), std::nullopt, std::nullopt, std::nullopt, {}};
  CHECK(get_unproven_subgoal_names(empty).empty());
  CHECK(extract_subgoals(empty, {}).empty());
}

TEST_CASE("sorry outside a named have is reported") {
  std::string src =
      "theorem t (n : ℕ) : n = n := by\n"
      "  have h : n = n := by\n"
      "    sorry\n"
      "  exact sorry\n";
  auto parsed = parse_via_fake(src);
  try {
    extract_subgoals(parsed.root, parsed.sorries);
    FAIL("expected AnonymousSorry");
  } catch (const AstError& e) {
    CHECK(e.kind() == AstError::Kind::AnonymousSorry);
    REQUIRE(e.positions().size() == 1);
    CHECK(e.positions()[0] == Position{4, 8});
  }

  std::string partial =
      "theorem t (n : ℕ) : n = n := by\n"
      "  have h : n = n := by\n"
      "    simp\n"
      "    sorry\n"
      "  exact h\n";
  auto p2 = parse_via_fake(partial);
  CHECK(ast_error_kind([&] { extract_subgoals(p2.root, p2.sorries); }) == AstError::Kind::AnonymousSorry);
}

TEST_CASE("duplicate have names are listed and rejected at code generation") {
  std::string src =
      "theorem t (n : ℕ) : n = n := by\n"
      "  have h : n = n := by\n"
      "    sorry\n"
      "  have h : n + 0 = n := by\n"
      "    sorry\n"
      "  exact rfl\n";
  auto parsed = parse_via_fake(src);
  CHECK(get_unproven_subgoal_names(parsed.root) == std::vector<std::string>{"h", "h"});
  auto goals = extract_subgoals(parsed.root, parsed.sorries);
  try {
    get_named_subgoal_code(goals, "h", lean::normalize_preamble(""), {});
    FAIL("expected DuplicateSubgoalName");
  } catch (const AstError& e) {
    CHECK(e.kind() == AstError::Kind::DuplicateSubgoalName);
    CHECK(e.positions() == std::vector<Position>{{3, 4}, {5, 4}});
  }
}

TEST_CASE("get_named_subgoal_code renders standalone theorems") {
  auto parsed = parse_via_fake(read_fixture("listings/nsqlefactn_sketch.lean"));
  auto goals = extract_subgoals(parsed.root, parsed.sorries);
  std::string code = get_named_subgoal_code(goals, "base_case", lean::normalize_preamble(""), {});
  CHECK(code ==
        "import Mathlib\nimport Aesop\n\nset_option maxHeartbeats 0\n\nopen BigOperators Real Nat Topology Rat\n\n"
        "theorem base_case (n : ℕ) (h : 4 ≤ n) : 4 ^ 2 ≤ 4 ! := by\n  sorry");

  Subgoal bare{"base_case", "4 ^ 2 ≤ 4 !", {}, "", Position{3, 4}};
  CHECK(render_subgoal_statement({bare}, "base_case", {}) == "theorem base_case : 4 ^ 2 ≤ 4 ! := by\n  sorry");

  Subgoal with_n{"add_zero'", "n + 0 = n", {{"n", "ℕ"}}, "", Position{2, 2}};
  CHECK(render_subgoal_statement({with_n}, "add_zero'", {}) == "theorem add_zero' (n : ℕ) : n + 0 = n := by\n  sorry");
  CHECK(render_subgoal_statement({with_n}, "add_zero'", {{"n", "ℕ"}, {"m", "ℕ"}}) ==
        "theorem add_zero' (n : ℕ) (m : ℕ) : n + 0 = n := by\n  sorry");

  CHECK(ast_error_kind([&] { get_named_subgoal_code(goals, "missing", lean::normalize_preamble(""), {}); }) ==
        AstError::Kind::SubgoalNotFound);
}

TEST_CASE("earlier siblings are passed only when mentioned") {
  auto parsed = parse_ast(read_fixture("infinitude_sketch.ast.json"));
  auto goals = extract_subgoals(parsed.root, parsed.sorries);
  CHECK(render_subgoal_statement(goals, "conclusion", {}) ==
        "theorem conclusion : ∀ n, ∃ p, p > n ∧ Prime p := by\n  sorry");
  auto all = render_subgoal_statement(goals, "conclusion", {}, SiblingHypotheses::All);
  CHECK(all.find("(divisor_gt_n : ∀ n P q,") != std::string::npos);
  CHECK(all.find("(prod_primes_def :") != std::string::npos);

  Subgoal a{"a", "1 = 1", {}, "", Position{2, 2}};
  Subgoal b{"b", "a = a", {{"a", "1 = 1"}}, "", Position{4, 2}};
  CHECK(render_subgoal_statement({a, b}, "b", {}) == "theorem b (a : 1 = 1) : a = a := by\n  sorry");
}

TEST_CASE("inaccessible hypotheses") {
  Subgoal g{"g", "x ≤ x", {{"x", "α"}, {"inst✝", "Preorder α"}, {"a✝", "x = x"}}, "", Position{1, 0}};
  CHECK(render_subgoal_statement({g}, "g", {{"α", "Type"}}) ==
        "theorem g (α : Type) (x : α) [Preorder α] : x ≤ x := by\n  sorry");
}

TEST_CASE("standalone statements pass the fake syntax check") {
  FakeLean lean;
  auto pre = lean::normalize_preamble("");
  for (const auto* fixture : {"listings/infinitude_sketch.lean", "listings/nsqlefactn_sketch.lean",
                              "listings/complex_theorem_sketch.lean"}) {
    CAPTURE(fixture);
    auto parsed = parse_via_fake(read_fixture(fixture));
    for (const auto& g : extract_subgoals(parsed.root, parsed.sorries)) {
      auto result = lean.verify(pre.text() + "\n\n" + g.standalone_statement);
      CHECK(result.passed);
      CHECK_FALSE(result.complete);
      CHECK(g.standalone_statement.starts_with("theorem " + g.name));
      CHECK(g.standalone_statement.ends_with(" : " + g.goal_type + " := by\n  sorry"));
    }
  }
}

TEST_CASE("property: subgoal count and order follow the sketch") {
  std::mt19937 rng(20260417);
  for (int round = 0; round < 60; ++round) {
    int haves = std::uniform_int_distribution<int>(0, 7)(rng);
    std::string src = "theorem prop_" + std::to_string(round) + " (n : ℕ) : n = n := by\n";
    std::vector<std::string> expect;
    for (int i = 0; i < haves; ++i) {
      std::string name = "h" + std::to_string(i) + "_" + std::to_string(rng() % 1000);
      bool proven = rng() % 3 == 0;
      bool one_line = rng() % 2 == 0;
      src += "  have " + name + " : n + " + std::to_string(i) + " = n + " + std::to_string(i) + " := by";
      if (proven) {
        src += "\n    rfl\n";
      } else if (one_line) {
        src += " sorry\n";
        expect.push_back(name);
      } else {
        src += "\n    sorry\n";
        expect.push_back(name);
      }
      if (rng() % 2) src += "  -- sorry in a comment\n";
    }
    src += "  rfl\n";
    CAPTURE(src);
    auto parsed = parse_via_fake(src);
    auto goals = extract_subgoals(parsed.root, parsed.sorries);
    CHECK(names_of(goals) == expect);
    CHECK(goals.size() == lean::count_sorries(src));
    for (std::size_t i = 1; i < goals.size(); ++i) CHECK(goals[i - 1].position < goals[i].position);
  }
}
