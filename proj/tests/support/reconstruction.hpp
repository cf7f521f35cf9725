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

#include <string>
#include <vector>

#include "sketchprove/proof_state.hpp"

namespace sketchprove::testing {

/// A hand-spliced reconstruction fixture: tests/fixtures/reconstruction/<name>/
/// holds sketch.lean, one subdirectory per subgoal (proof.lean for a leaf,
/// sketch.lean plus further subdirectories for an inner node) and the
/// expected.lean golden.
struct ReconstructionCase {
  std::string name;
  state::ProofTree tree;
  std::string expected;
  std::size_t leaves = 0;
};

std::vector<std::string> reconstruction_case_names();

/// Builds a fully proven tree for the case, extracting subgoals through the
/// fake AST exporter.
ReconstructionCase load_reconstruction_case(const std::string& name);

}  // namespace sketchprove::testing
