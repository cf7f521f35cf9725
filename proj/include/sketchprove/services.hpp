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

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sketchprove/ast_model.hpp"
#include "sketchprove/config.hpp"
#include "sketchprove/theorem_hit.hpp"
#include "sketchprove/verification.hpp"

namespace sketchprove::services {

class ServiceError : public std::runtime_error {
 public:
  enum class Kind { RemoteExhausted, BadResponse, ServiceUnavailable, InvalidModuleName, AstExportFailed, Rejected };

  ServiceError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

/// A chat-completion model. Implementations must be safe to call from
/// several threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

/// Lean checking and AST export.
class LeanVerifier {
 public:
  virtual ~LeanVerifier() = default;
  virtual VerificationResult verify(std::string_view code) = 0;
  virtual ast::ParsedAst fetch_ast(std::string_view code, std::string_view module_name = "User.Code") = 0;
};

class TheoremSearch {
 public:
  virtual ~TheoremSearch() = default;
  virtual std::vector<TheoremHit> search(const std::vector<std::string>& queries) = 0;
};

/// Bounded retry with exponential backoff and full jitter.
struct RetryPolicy {
  int max_retries = 5;
  std::chrono::duration<double> base_delay{1.0};
};

/// Splits `http://host:port/prefix` into origin and path prefix.
struct SplitUrl {
  std::string origin;
  std::string prefix;
};
SplitUrl split_url(std::string_view url);

/// OpenAI-compatible `POST {base_url}/chat/completions`.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(config::ChatBackendConfig cfg);
  std::string complete(const std::vector<ChatMessage>& messages) override;

  std::size_t requests_sent() const { return requests_.load(); }

 private:
  config::ChatBackendConfig cfg_;
  SplitUrl url_;
  std::atomic<std::size_t> requests_{0};
};

std::string chat_complete(const config::ChatBackendConfig& cfg, const std::vector<ChatMessage>& messages);

/// The Lean verification server with the AST export extension.
class KiminaClient : public LeanVerifier {
 public:
  explicit KiminaClient(config::KiminaConfig cfg);

  VerificationResult verify(std::string_view code) override;
  ast::ParsedAst fetch_ast(std::string_view code, std::string_view module_name = "User.Code") override;
  /// `POST /api/ast` for library modules; the raw response.
  nlohmann::json fetch_module_ast(const std::vector<std::string>& modules, bool one = true);

  std::size_t requests_sent() const { return requests_.load(); }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

  config::KiminaConfig cfg_;
  SplitUrl url_;
  std::counting_semaphore<1024> slots_;
  std::atomic<std::size_t> requests_{0};
};

/// Semantic search over library declarations:
/// `GET {base}/search?q=<query>&pkg=<csv>` -> `{results: [{full_name, statement, package, score}]}`.
class LeanExploreClient : public TheoremSearch {
 public:
  explicit LeanExploreClient(config::LeanExploreConfig cfg);
  std::vector<TheoremHit> search(const std::vector<std::string>& queries) override;

  std::size_t requests_sent() const { return requests_.load(); }

 private:
  config::LeanExploreConfig cfg_;
  SplitUrl url_;
  std::atomic<std::size_t> requests_{0};
};

/// `[A-Za-z0-9_.]+`, without empty or `..` components.
bool valid_module_name(std::string_view name);

/// One `results[i]` entry of the check endpoint.
VerificationResult parse_check_result(const nlohmann::json& item);

/// Keeps hits from `packages`, one per full_name (highest score), sorted by
/// descending score then name, at most `cap`.
std::vector<TheoremHit> merge_hits(const std::vector<std::vector<TheoremHit>>& per_query,
                                   const std::vector<std::string>& packages, std::size_t cap);

}  // namespace sketchprove::services
