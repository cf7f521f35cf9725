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

#include "sketchprove/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

extern char** environ;

namespace sketchprove::cli {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

bool has_import(std::string_view preamble) {
  std::istringstream in{std::string(preamble)};
  for (std::string line; std::getline(in, line);) {
    auto start = line.find_first_not_of(" \t");
    if (start != std::string::npos && line.compare(start, 7, "import ") == 0) return true;
  }
  return false;
}

}  // namespace

lean::LeanSource validate_formal_input(std::string_view code) {
  lean::LeanSource src = lean::split_source(code);
  if (!has_import(src.preamble)) {
    throw InputError(InputError::Kind::MissingHeader, "the formal input has no Lean header (no `import` line)");
  }
  if (lean::declaration_name(src.body).empty()) {
    throw InputError(InputError::Kind::MissingDeclaration, "the formal input has a header but no theorem declaration");
  }
  return {lean::normalize_preamble(src.preamble).text(), src.body};
}

std::string diagnostic_text(const InputError& error) {
  std::ostringstream os;
  os << "error: " << error.what() << "\n\n";
  if (error.kind() == InputError::Kind::MissingHeader) {
    os << "Formal inputs must start with the Lean header they compile against, at least\n"
          "`import Mathlib`, followed by the theorem to prove. For example:\n\n"
          "import Mathlib\n"
          "import Aesop\n\n"
          "set_option maxHeartbeats 400000\n\n"
          "open BigOperators Real Nat Topology Rat\n\n"
          "theorem my_theorem (n : ℕ) : n + 0 = n := by\n"
          "  sorry\n";
  } else {
    os << "After the header, the file must declare the statement to prove with\n"
          "`theorem <name> ... := by sorry` (or `lemma`).\n";
  }
  return os.str();
}

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
  }
  return env;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::map<std::string, std::string>& env, const AgentFactory& make_agents) {
  CLI::App app{"Prove a theorem in Lean 4 by recursive decomposition.", "sketchprove"};
  std::string informal;
  std::string file;
  std::string config_path;
  std::string out_dir = "sketchprove_out";
  std::string resume;
  int verbosity = 0;
  std::size_t workers = 4;
  std::optional<int> max_depth;

  auto* informal_opt = app.add_option("--informal", informal, "Natural-language statement to formalize and prove");
  auto* file_opt = app.add_option("--file", file, "Lean file holding a header and a `theorem ... := by sorry`");
  auto* resume_opt = app.add_option("--resume", resume, "Continue from a checkpoint.json");
  informal_opt->excludes(file_opt)->excludes(resume_opt);
  file_opt->excludes(resume_opt);
  app.add_option("--config", config_path, "INI file overriding the built-in defaults");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_flag("-v,--verbose", verbosity, "Log each action (-vv adds node counters)");
  app.add_option("--workers", workers, "Concurrent service calls")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--max-depth", max_depth, "Override the decomposition depth limit")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (informal_opt->count() + file_opt->count() + resume_opt->count() == 0) {
      throw CLI::RequiredError("one of --informal, --file or --resume");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kProven;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kInputError;
  }

  std::optional<fs::path> user_config;
  if (!config_path.empty()) {
    if (!fs::is_regular_file(config_path)) {
      err << "error: config file `" << config_path << "` does not exist\n\n" << app.help();
      return kInputError;
    }
    user_config = config_path;
  }

  config::Config cfg;
  Limits limits;
  try {
    cfg = config::load(config::default_ini(), user_config, env);
    if (max_depth) cfg.set("PROVER_AGENT_LLM", "max_depth", std::to_string(*max_depth));
    limits = config::typed_limits(cfg);
  } catch (const config::ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    err << "error: cannot create output directory `" << out_dir << "`: " << ec.message() << "\n";
    return kInputError;
  }
  fs::path dir(out_dir);

  state::ProofTree tree;
  try {
    if (!resume.empty()) {
      auto text = read_file(resume);
      if (!text) {
        err << "error: cannot read checkpoint `" << resume << "`\n";
        return kInputError;
      }
      tree = state::ProofTree::from_checkpoint(nlohmann::json::parse(*text));
      tree.set_limits(limits);
    } else if (!file.empty()) {
      auto text = read_file(file);
      if (!text) {
        err << "error: cannot read `" << file << "`\n";
        return kInputError;
      }
      orchestrator::Problem problem;
      problem.formal = validate_formal_input(*text);
      tree = orchestrator::initial_tree(problem, limits);
    } else {
      orchestrator::Problem problem;
      problem.informal = informal;
      tree = orchestrator::initial_tree(problem, limits);
    }
  } catch (const InputError& e) {
    write_file(dir / "diagnostic.txt", diagnostic_text(e));
    err << "error: " << e.what() << "\nsee " << (dir / "diagnostic.txt").string() << "\n";
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: checkpoint is not valid JSON: " << e.what() << "\n";
    return kInputError;
  } catch (const state::StateError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  std::ofstream run_log(dir / "run.jsonl", std::ios::app);
  orchestrator::Options options;
  options.workers = workers;
  options.run_log = &run_log;
  options.checkpoint_path = dir / "checkpoint.json";
  if (verbosity > 0) {
    options.observer = [&out, verbosity](const orchestrator::Action& a, const state::ProofTree& t) {
      out << "[" << orchestrator::to_string(a.kind) << "]";
      if (!a.target.empty() && t.contains(a.target)) {
        const auto& n = t.node(a.target);
        out << " " << n.id << " " << n.name << " (depth " << n.depth << ")";
        if (verbosity > 1) {
          out << " passes_used=" << n.counters.passes_used
              << " sketch_corrections_used=" << n.counters.sketch_corrections_used
              << " decompositions_used=" << n.counters.decompositions_used;
        }
      }
      out << "\n";
    };
  }

  orchestrator::Outcome outcome;
  try {
    outcome = orchestrator::Orchestrator(make_agents(cfg), options).run(tree);
  } catch (const config::ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  if (outcome.success) {
    std::string proof = outcome.proof + "\n";
    write_file(dir / "proof.lean", proof);
    out << proof;
    return kProven;
  }
  std::string report = outcome.report(tree);
  write_file(dir / "report.txt", report);
  err << report << "checkpoint: " << (dir / "checkpoint.json").string() << "\n";
  return kNotProven;
}

}  // namespace sketchprove::cli
