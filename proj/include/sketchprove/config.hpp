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

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sketchprove/limits.hpp"

namespace sketchprove::config {

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { ParseError, TypeError, FileError };

  ConfigError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// INI-style settings. Section names are stored upper-case and option names
/// lower-case; lookups are case-insensitive.
class Config {
 public:
  using Section = std::map<std::string, std::string>;

  /// `[SECTION]` headers, `key = value` lines, `#` / `;` comment lines.
  static Config parse_ini(std::string_view text);
  std::string to_ini() const;

  std::optional<std::string> get(std::string_view section, std::string_view option) const;
  std::string get_or(std::string_view section, std::string_view option, std::string fallback) const;
  /// Throws TypeError naming section and option when the value is not an
  /// integer (or the option is absent and no fallback is given).
  long get_int(std::string_view section, std::string_view option, std::optional<long> fallback = std::nullopt) const;
  double get_double(std::string_view section, std::string_view option, double fallback) const;

  void set(std::string_view section, std::string_view option, std::string value);
  void merge(const Config& over);

  const std::map<std::string, Section>& sections() const { return sections_; }
  bool operator==(const Config&) const = default;

 private:
  std::map<std::string, Section> sections_;
};

/// The packaged defaults.
std::string_view default_ini();

/// defaults < user file < environment (`SECTION__OPTION=value`).
Config load(std::string_view defaults, const std::optional<std::filesystem::path>& user_file,
            const std::map<std::string, std::string>& env);

enum class AgentLlm { Formalizer, Prover, Semantics, SearchQuery, Decomposer };

std::string_view section_name(AgentLlm agent);

struct ChatBackendConfig {
  std::string model;
  std::string provider;
  std::string base_url;
  std::string api_key;
  int max_tokens = 0;
  std::optional<int> context_window;
  int max_remote_retries = 5;
  double timeout_seconds = 600.0;
  double backoff_seconds = 1.0;  // first retry delay; doubles per retry

  bool operator==(const ChatBackendConfig&) const = default;
};

struct KiminaConfig {
  std::string url;
  int max_retries = 5;
  std::string verify_path = "/api/check";
  double timeout_seconds = 60.0;
  int max_concurrency = 4;
  double backoff_seconds = 1.0;

  bool operator==(const KiminaConfig&) const = default;
};

struct LeanExploreConfig {
  std::string url;
  std::vector<std::string> package_filters;
  int max_results = 20;
  int max_retries = 5;
  double timeout_seconds = 30.0;
  double backoff_seconds = 1.0;

  bool operator==(const LeanExploreConfig&) const = default;
};

ChatBackendConfig chat_backend(const Config& cfg, AgentLlm agent);
KiminaConfig kimina(const Config& cfg);
LeanExploreConfig lean_explore(const Config& cfg);
Limits typed_limits(const Config& cfg);

/// Comma-separated, trimmed, empty entries dropped.
std::vector<std::string> split_csv(std::string_view text);

}  // namespace sketchprove::config
