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

#include "sketchprove/lean_lexer.hpp"
#include "sketchprove/lean_source.hpp"
#include "support/fake_lean.hpp"
#include "support/fixtures.hpp"

using namespace sketchprove;
using namespace sketchprove::lean;
using sketchprove::testing::read_fixture;

namespace {

const char* kCanonical =
    "import Mathlib\n"
    "import Aesop\n"
    "\n"
    "set_option maxHeartbeats 0\n"
    "\n"
    "open BigOperators Real Nat Topology Rat";

std::size_t non_blank_lines(const std::string& s) {
  std::size_t n = 0;
  std::size_t p = 0;
  while (p <= s.size()) {
    auto nl = s.find('\n', p);
    auto line = s.substr(p, nl == std::string::npos ? std::string::npos : nl - p);
    if (line.find_first_not_of(" \t") != std::string::npos) ++n;
    if (nl == std::string::npos) break;
    p = nl + 1;
  }
  return n;
}

SourceError::Kind error_kind(auto&& fn) {
  try {
    fn();
  } catch (const SourceError& e) {
    return e.kind();
  }
  FAIL("expected SourceError");
  return SourceError::Kind::NoDeclaration;
}

}  // namespace

TEST_CASE("tokenizer skips comments and keeps unicode identifiers whole") {
  auto toks = tokenize("have h₁ : n ≤ m := by -- sorry\n  /- sorry /- nested -/ -/ exact «weird name».1");
  std::vector<std::string> texts;
  for (auto& t : toks) texts.emplace_back(t.text);
  CHECK(texts == std::vector<std::string>{"have", "h₁", ":", "n", "≤", "m", ":=", "by", "exact", "«weird name».1"});
  CHECK(is_identifier("h₁"));
  CHECK(is_identifier("cases'"));
  CHECK_FALSE(is_identifier("../etc"));
  CHECK(in_comment_or_string("x -- sorry", 6));
  CHECK_FALSE(in_comment_or_string("x := sorry", 5));
}

TEST_CASE("split_source") {
  SUBCASE("even-sum listing") {
    auto s = split_source(read_fixture("listings/even_sum_proof.lean"));
    CHECK(s.preamble == kCanonical);
    // The listing's header holds four directives separated by blank lines.
    CHECK(non_blank_lines(s.preamble) == 4);
    CHECK(s.body.starts_with("theorem theorem_b2f45cfb951a : ∀ m n : ℕ, Even m → Even n → Even (m + n) := by"));
  }
  SUBCASE("no header") {
    auto s = split_source("theorem t : True := by trivial");
    CHECK(s.preamble.empty());
    CHECK(s.body == "theorem t : True := by trivial");
  }
  SUBCASE("infinitude sketch") {
    auto s = split_source(read_fixture("listings/infinitude_sketch.lean"));
    CHECK(non_blank_lines(s.preamble) == 4);
    CHECK(s.body.starts_with("theorem infinitude_of_primes : ∀ n : Nat, ∃ p, p > n ∧ Prime p := by"));
  }
  SUBCASE("variable lines stay in the header, open ... in does not") {
    auto s = split_source("import Mathlib\nvariable (P Q : Nat → Prop)\n  (R : Prop)\nopen Nat in\ntheorem x : True := trivial");
    CHECK(s.preamble == "import Mathlib\nvariable (P Q : Nat → Prop)\n  (R : Prop)");
    CHECK(s.body == "open Nat in\ntheorem x : True := trivial");
  }
  SUBCASE("header only") {
    auto s = split_source("import Mathlib\n\nopen Nat\n");
    CHECK(s.body.empty());
  }
}

TEST_CASE("normalize_preamble") {
  const auto& mandatory = CanonicalPreamble::mandatory_lines();
  CHECK(normalize_preamble("").lines() == mandatory);
  CHECK(normalize_preamble("").text() == kCanonical);
  CHECK(normalize_preamble(kCanonical).text() == kCanonical);
  CHECK(normalize_preamble(std::string(kCanonical) + "\nimport Mathlib").text() == kCanonical);

  auto extras = normalize_preamble("import Mathlib.Tactic\n-- c\nopen Finset\nset_option maxHeartbeats 400000\nopen Finset\nimport  Mathlib.Tactic");
  CHECK(extras.lines() == std::vector<std::string>{"import Mathlib", "import Aesop", "import Mathlib.Tactic",
                                                   "set_option maxHeartbeats 0",
                                                   "open BigOperators Real Nat Topology Rat", "open Finset"});
}

TEST_CASE("normalize_preamble is idempotent over fixtures") {
  for (const char* f : {"listings/even_sum_proof.lean", "listings/infinitude_sketch.lean", "listings/complex_theorem_sketch.lean"}) {
    auto once = normalize_preamble(split_source(read_fixture(f)).preamble);
    auto twice = normalize_preamble(once.text());
    CHECK(once == twice);
  }
}

TEST_CASE("extract_proof_body") {
  CHECK(extract_proof_body("theorem t : True := by\n  trivial") == "trivial");
  CHECK(extract_proof_body("theorem t : True := by trivial") == "trivial");

  auto body = extract_proof_body(read_fixture("listings/even_sum_proof.lean"));
  CHECK(body.starts_with("intro m n hm hn\nhave h_main : Even (m + n) := by\n  -- Extract"));
  CHECK(body.ends_with("exact h_main"));

  // The first top-level `by` is the declaration's; the nested one survives.
  CHECK(extract_proof_body("theorem t : P := by\n  have h : Q := by\n    simp\n  exact h") ==
        "have h : Q := by\n  simp\nexact h");

  // `let ... :=` inside the statement is not the proof's `:=`.
  CHECK(extract_proof_body("theorem t : let x : ℕ := 1\n  x = 1 := by\n  rfl") == "rfl");

  CHECK(error_kind([] { extract_proof_body("theorem t : True := trivial"); }) == SourceError::Kind::NoByBlock);
  CHECK(extract_tactic_body("theorem t : True := trivial") == "exact (trivial)");
}

TEST_CASE("extract_proof_body stops at the next command") {
  CHECK(extract_proof_body("theorem a : True := by\n  trivial\n\ntheorem b : True := by\n  trivial") == "trivial");
}

TEST_CASE("replace_subgoal") {
  const std::string sketch = read_fixture("listings/nsqlefactn_sketch.lean");
  // Hand-spliced: base_case's sorry becomes the body at have-column + 2.
  const std::string expected =
      "theorem induction_ineq_nsqlefactn (n : ℕ) (h : 4 ≤ n) : n ^ 2 ≤ n ! := by\n"
      "  -- Base case\n"
      "  have base_case : 4 ^ 2 ≤ 4 ! := by\n"
      "    norm_num [Nat.factorial]\n"
      "\n"
      "  -- Inductive step\n"
      "  have inductive_step : ∀ k ≥ 4, k ^ 2 ≤ k ! → (k + 1) ^ 2 ≤ (k + 1) ! := by\n"
      "    sorry\n"
      "\n"
      "  -- Combine base case and inductive step\n"
      "  have final_proof : ∀ n ≥ 4, n ^ 2 ≤ n ! := by\n"
      "    sorry\n";
  CHECK(replace_subgoal(sketch, "base_case", "norm_num [Nat.factorial]") == expected);
  CHECK(replace_subgoal(sketch, "inductive_step", "sorry") == sketch);
  CHECK(error_kind([&] { replace_subgoal(sketch, "missing_goal", "simp"); }) == SourceError::Kind::SubgoalNotFound);

  std::string dup = "theorem t : True := by\n  have a : True := by sorry\n  have a : True := by sorry\n  trivial";
  CHECK(error_kind([&] { replace_subgoal(dup, "a", "trivial"); }) == SourceError::Kind::AmbiguousSubgoal);
}

TEST_CASE("replace_subgoal handles one-line sorries and multi-line bodies") {
  const std::string sketch = read_fixture("listings/complex_theorem_sketch.lean");
  auto out = replace_subgoal(sketch, "lemma2", "intro hq\n  exact foo hq\nsimp");
  CHECK(out.find("  have lemma2 : Q n → P n := by\n    intro hq\n      exact foo hq\n    simp\n  apply lemma2") !=
        std::string::npos);
  CHECK(out.find("have lemma1 : Q n := by sorry") != std::string::npos);
}

TEST_CASE("extract_code_block") {
  CHECK(extract_code_block("plan text\n```lean4\ntheorem t : True := by trivial\n```") == "theorem t : True := by trivial");
  CHECK(extract_code_block("```lean4\nfirst\n```\nanalysis\n```python\nx = 1\n```\n```lean\nsecond\n```\n") == "second");
  CHECK(extract_code_block("```lean4\ntheorem t : True := by\n  sorry```") == "theorem t : True := by\n  sorry");
  auto kind = error_kind([] { extract_code_block("plain prose, no fences"); });
  CHECK(kind == SourceError::Kind::NoCodeBlock);
}

TEST_CASE("count_sorries") {
  CHECK(count_sorries(read_fixture("listings/infinitude_sketch.lean")) == 5);
  CHECK(count_sorries(read_fixture("listings/even_sum_proof.lean")) == 0);
  CHECK(count_sorries("-- sorry") == 0);
  CHECK(count_sorries("/- sorry -/ theorem t : True := by\n  exact \"sorry\".length") == 0);
}

TEST_CASE("declaration helpers") {
  auto stmt = read_fixture("listings/even_sum_statement.lean");
  CHECK(declaration_name(stmt) == "theorem_b2f45cfb951a");
  CHECK(declaration_header(stmt) == declaration_header(read_fixture("listings/even_sum_proof.lean")));
  CHECK(statement_with_sorry("theorem x (a : ℕ) : a = a := by\n  rfl") == "theorem x (a : ℕ) : a = a := by\n  sorry");
  CHECK(statement_with_sorry("theorem x (a : ℕ) : a = a") == "theorem x (a : ℕ) : a = a := by\n  sorry");
}

TEST_CASE("property: splicing a sorry-free body removes exactly one sorry") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + static_cast<int>(rng() % 6);
    std::string sketch = "theorem t (x : ℕ) : x = x := by\n";
    for (int i = 0; i < n; ++i) {
      std::string indent(2 + 2 * (rng() % 2), ' ');
      sketch += indent + "have h" + std::to_string(i) + " : x + " + std::to_string(i) + " = x + " +
                std::to_string(i) + " := by" + ((rng() % 2) ? " sorry\n" : "\n" + indent + "  sorry\n");
    }
    sketch += "  rfl";
    int pick = static_cast<int>(rng() % n);
    std::string body = (rng() % 2) ? "rfl" : "simp\nring_nf";
    auto before = count_sorries(sketch);
    auto after = count_sorries(replace_subgoal(sketch, "h" + std::to_string(pick), body));
    CHECK(after + 1 == before);
  }
}

TEST_CASE("property: extracted bodies never begin with `by`") {
  for (const char* f : {"listings/even_sum_proof.lean", "listings/nsqlefactn_sketch.lean", "listings/infinitude_sketch.lean",
                        "listings/complex_theorem_sketch.lean"}) {
    auto body = extract_proof_body(read_fixture(f));
    CHECK_FALSE(body.starts_with("by"));
  }
}

TEST_CASE("round trip: normalized header plus body re-verifies") {
  sketchprove::testing::FakeLean lean;
  for (const char* f : {"listings/even_sum_proof.lean", "listings/infinitude_sketch.lean", "listings/complex_theorem_sketch.lean"}) {
    auto original = read_fixture(f);
    auto split = split_source(original);
    LeanSource rebuilt{normalize_preamble(split.preamble).text(), split.body};
    auto before = lean.verify(original);
    auto after = lean.verify(rebuilt.combined());
    CHECK(before.passed);
    CHECK(after.passed == before.passed);
    CHECK(after.complete == before.complete);
  }
}
