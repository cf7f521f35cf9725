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

#include "sketchprove/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace sketchprove::config {

namespace {

constexpr std::string_view kDefaults = R"INI([FORMALIZER_AGENT_LLM]
model = kdavis/goedel-formalizer-v2:32b
provider = ollama
url = http://localhost:11434/v1
api_key = ollama
max_tokens = 50000
num_ctx = 40960
max_retries = 10
max_remote_retries = 5

[PROVER_AGENT_LLM]
model = kdavis/Goedel-Prover-V2:32b
provider = ollama
url = http://localhost:11434/v1
api_key = ollama
max_tokens = 50000
num_ctx = 40960
max_self_correction_attempts = 2
max_depth = 20
max_pass = 32
max_remote_retries = 5

[SEMANTICS_AGENT_LLM]
model = qwen3:30b
provider = ollama
url = http://localhost:11434/v1
api_key = ollama
max_tokens = 50000
num_ctx = 262144
max_remote_retries = 5

[SEARCH_QUERY_AGENT_LLM]
model = qwen3:30b
provider = ollama
url = http://localhost:11434/v1
api_key = ollama
max_tokens = 50000
num_ctx = 262144
max_remote_retries = 5

[DECOMPOSER_AGENT_LLM]
model = gpt-5-2025-08-07
max_completion_tokens = 50000
max_remote_retries = 5
max_self_correction_attempts = 6

[KIMINA_LEAN_SERVER]
url = http://0.0.0.0:8000
max_retries = 5

[LEAN_EXPLORE_SERVER]
url = http://localhost:8001/api/v1
package_filters = Mathlib,Batteries,Std,Init,Lean
)INI";

constexpr std::string_view kOpenAiUrl = "https://api.openai.com/v1";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string where(std::string_view section, std::string_view option) {
  return "[" + upper(section) + "] " + lower(option);
}

int positive(const Config& cfg, std::string_view section, std::string_view option, std::optional<long> fallback = {}) {
  long v = cfg.get_int(section, option, fallback);
  if (v < 1 || v > 1'000'000'000) {
    throw ConfigError(ConfigError::Kind::TypeError, where(section, option) + " must be a positive integer");
  }
  return static_cast<int>(v);
}

int non_negative(const Config& cfg, std::string_view section, std::string_view option, long fallback) {
  long v = cfg.get_int(section, option, fallback);
  if (v < 0 || v > 1'000'000'000) {
    throw ConfigError(ConfigError::Kind::TypeError, where(section, option) + " must be a non-negative integer");
  }
  return static_cast<int>(v);
}

std::string url(const Config& cfg, std::string_view section, std::optional<std::string_view> fallback = {}) {
  auto v = cfg.get(section, "url");
  if (!v && fallback) v = std::string(*fallback);
  if (!v) throw ConfigError(ConfigError::Kind::TypeError, where(section, "url") + " is missing");
  std::string_view u = *v;
  std::size_t scheme = u.find("://");
  bool ok = scheme != std::string_view::npos && (u.substr(0, scheme) == "http" || u.substr(0, scheme) == "https") &&
            scheme + 3 < u.size() && u[scheme + 3] != '/' && u.find_first_of(" \t") == std::string_view::npos;
  if (!ok) throw ConfigError(ConfigError::Kind::TypeError, where(section, "url") + " is not an http(s) URL: " + *v);
  while (!v->empty() && v->back() == '/') v->pop_back();
  return *v;
}

}  // namespace

Config Config::parse_ini(std::string_view text) {
  Config cfg;
  std::optional<std::string> section;
  std::size_t line_no = 0;
  std::size_t p = 0;
  while (p <= text.size()) {
    std::size_t nl = text.find('\n', p);
    std::string_view raw = text.substr(p, nl == std::string_view::npos ? std::string_view::npos : nl - p);
    p = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    auto fail = [&](const std::string& why) {
      throw ConfigError(ConfigError::Kind::ParseError, "line " + std::to_string(line_no) + ": " + why);
    };
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail("empty section name");
      section = upper(name);
      cfg.sections_[*section];
      continue;
    }
    std::size_t eq = line.find_first_of("=:");
    if (eq == std::string_view::npos) fail("expected `key = value`");
    if (!section) fail("option outside of any section");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) fail("empty option name");
    cfg.sections_[*section][lower(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string Config::to_ini() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [name, options] : sections_) {
    if (!first) out << "\n";
    first = false;
    out << "[" << name << "]\n";
    for (const auto& [k, v] : options) out << k << " = " << v << "\n";
  }
  return out.str();
}

std::optional<std::string> Config::get(std::string_view section, std::string_view option) const {
  auto s = sections_.find(upper(section));
  if (s == sections_.end()) return std::nullopt;
  auto o = s->second.find(lower(option));
  if (o == s->second.end()) return std::nullopt;
  return o->second;
}

std::string Config::get_or(std::string_view section, std::string_view option, std::string fallback) const {
  auto v = get(section, option);
  return v ? *v : std::move(fallback);
}

long Config::get_int(std::string_view section, std::string_view option, std::optional<long> fallback) const {
  auto v = get(section, option);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(ConfigError::Kind::TypeError, where(section, option) + " is missing");
  }
  std::string_view t = trim(*v);
  long out = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(ConfigError::Kind::TypeError, where(section, option) + " is not an integer: `" + *v + "`");
  }
  return out;
}

double Config::get_double(std::string_view section, std::string_view option, double fallback) const {
  auto v = get(section, option);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used == trim(*v).size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(ConfigError::Kind::TypeError, where(section, option) + " is not a number: `" + *v + "`");
}

void Config::set(std::string_view section, std::string_view option, std::string value) {
  sections_[upper(section)][lower(option)] = std::move(value);
}

void Config::merge(const Config& over) {
  for (const auto& [name, options] : over.sections_) {
    auto& target = sections_[name];
    for (const auto& [k, v] : options) target[k] = v;
  }
}

std::string_view default_ini() { return kDefaults; }

Config load(std::string_view defaults, const std::optional<std::filesystem::path>& user_file,
            const std::map<std::string, std::string>& env) {
  Config cfg = Config::parse_ini(defaults);
  if (user_file) {
    std::ifstream in(*user_file, std::ios::binary);
    if (!in) throw ConfigError(ConfigError::Kind::FileError, "cannot read config file " + user_file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      cfg.merge(Config::parse_ini(buf.str()));
    } catch (const ConfigError& e) {
      throw ConfigError(e.kind(), user_file->string() + ": " + e.what());
    }
  }
  // Keys differing only in case name the same option; the canonical
  // upper-case spelling is applied last so it wins.
  for (bool canonical : {false, true}) {
    for (const auto& [key, value] : env) {
      std::size_t sep = key.find("__");
      if (sep == std::string::npos || sep == 0 || sep + 2 >= key.size()) continue;
      if ((key == upper(key)) != canonical) continue;
      cfg.set(key.substr(0, sep), key.substr(sep + 2), value);
    }
  }
  if (!cfg.get("DECOMPOSER_AGENT_LLM", "api_key")) {
    if (auto it = env.find("OPENAI_API_KEY"); it != env.end()) cfg.set("DECOMPOSER_AGENT_LLM", "api_key", it->second);
  }
  return cfg;
}

std::string_view section_name(AgentLlm agent) {
  switch (agent) {
    case AgentLlm::Formalizer: return "FORMALIZER_AGENT_LLM";
    case AgentLlm::Prover: return "PROVER_AGENT_LLM";
    case AgentLlm::Semantics: return "SEMANTICS_AGENT_LLM";
    case AgentLlm::SearchQuery: return "SEARCH_QUERY_AGENT_LLM";
    case AgentLlm::Decomposer: return "DECOMPOSER_AGENT_LLM";
  }
  return "";
}

ChatBackendConfig chat_backend(const Config& cfg, AgentLlm agent) {
  auto s = section_name(agent);
  ChatBackendConfig out;
  out.model = cfg.get_or(s, "model", "");
  if (out.model.empty()) throw ConfigError(ConfigError::Kind::TypeError, where(s, "model") + " is missing");
  bool openai = !cfg.get(s, "url");
  out.provider = cfg.get_or(s, "provider", openai ? "openai" : "");
  out.base_url = url(cfg, s, openai ? std::optional<std::string_view>(kOpenAiUrl) : std::nullopt);
  out.api_key = cfg.get_or(s, "api_key", "");
  if (cfg.get(s, "max_tokens")) {
    out.max_tokens = positive(cfg, s, "max_tokens");
  } else {
    out.max_tokens = positive(cfg, s, "max_completion_tokens", 4096);
  }
  if (cfg.get(s, "num_ctx")) out.context_window = positive(cfg, s, "num_ctx");
  out.max_remote_retries = non_negative(cfg, s, "max_remote_retries", 5);
  out.timeout_seconds = cfg.get_double(s, "timeout", out.timeout_seconds);
  out.backoff_seconds = cfg.get_double(s, "backoff_seconds", out.backoff_seconds);
  return out;
}

KiminaConfig kimina(const Config& cfg) {
  constexpr std::string_view s = "KIMINA_LEAN_SERVER";
  KiminaConfig out;
  out.url = url(cfg, s);
  out.max_retries = non_negative(cfg, s, "max_retries", 5);
  out.verify_path = cfg.get_or(s, "verify_path", out.verify_path);
  if (out.verify_path.empty() || out.verify_path.front() != '/') out.verify_path.insert(0, "/");
  out.timeout_seconds = cfg.get_double(s, "timeout", out.timeout_seconds);
  out.max_concurrency = positive(cfg, s, "max_concurrency", out.max_concurrency);
  out.backoff_seconds = cfg.get_double(s, "backoff_seconds", out.backoff_seconds);
  return out;
}

LeanExploreConfig lean_explore(const Config& cfg) {
  constexpr std::string_view s = "LEAN_EXPLORE_SERVER";
  LeanExploreConfig out;
  out.url = url(cfg, s);
  out.package_filters = split_csv(cfg.get_or(s, "package_filters", ""));
  out.max_results = positive(cfg, s, "max_results", out.max_results);
  out.max_retries = non_negative(cfg, s, "max_retries", out.max_retries);
  out.timeout_seconds = cfg.get_double(s, "timeout", out.timeout_seconds);
  out.backoff_seconds = cfg.get_double(s, "backoff_seconds", out.backoff_seconds);
  return out;
}

Limits typed_limits(const Config& cfg) {
  Limits l;
  l.formalizer_max_retries = positive(cfg, "FORMALIZER_AGENT_LLM", "max_retries");
  l.prover_self_correction = positive(cfg, "PROVER_AGENT_LLM", "max_self_correction_attempts");
  l.prover_max_pass = positive(cfg, "PROVER_AGENT_LLM", "max_pass");
  l.max_depth = positive(cfg, "PROVER_AGENT_LLM", "max_depth");
  l.decomposer_self_correction = positive(cfg, "DECOMPOSER_AGENT_LLM", "max_self_correction_attempts");
  return l;
}

std::vector<std::string> split_csv(std::string_view text) {
  std::vector<std::string> out;
  std::size_t p = 0;
  while (p <= text.size()) {
    std::size_t comma = text.find(',', p);
    if (comma == std::string_view::npos) comma = text.size();
    auto item = trim(text.substr(p, comma - p));
    if (!item.empty()) out.emplace_back(item);
    p = comma + 1;
  }
  return out;
}

}  // namespace sketchprove::config
