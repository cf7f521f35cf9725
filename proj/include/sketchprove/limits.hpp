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

namespace sketchprove {

/// Retry and depth budgets shared by the proof tree and the orchestrator.
struct Limits {
  int formalizer_max_retries = 10;
  int prover_self_correction = 2;  // attempts per pass
  int prover_max_pass = 32;
  int decomposer_self_correction = 6;
  int max_depth = 20;

  bool operator==(const Limits&) const = default;
};

}  // namespace sketchprove
