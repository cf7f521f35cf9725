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

#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sketchprove/config.hpp"
#include "sketchprove/lean_source.hpp"
#include "sketchprove/orchestrator.hpp"

namespace sketchprove::cli {

class InputError : public std::runtime_error {
 public:
  enum class Kind { MissingHeader, MissingDeclaration };

  InputError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Exit codes.
inline constexpr int kProven = 0;
inline constexpr int kNotProven = 1;
inline constexpr int kInputError = 2;

/// A formal input must carry a Lean header with at least one import and a
/// declaration after it. Returns the input with its header normalized.
lean::LeanSource validate_formal_input(std::string_view code);

/// Text written to diagnostic.txt when validation fails.
std::string diagnostic_text(const InputError& error);

using AgentFactory = std::function<orchestrator::Agents(const config::Config&)>;

/// The whole command line tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::map<std::string, std::string>& env, const AgentFactory& make_agents = orchestrator::make_agents);

/// `NAME=value` entries of the process environment.
std::map<std::string, std::string> process_environment();

}  // namespace sketchprove::cli
