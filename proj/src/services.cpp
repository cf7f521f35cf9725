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

#include "sketchprove/services.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <thread>

#include <httplib.h>

namespace sketchprove::services {

namespace {

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

void backoff(const RetryPolicy& policy, int retry) {
  if (policy.base_delay.count() <= 0) return;
  thread_local std::mt19937_64 rng{std::random_device{}()};
  double cap = policy.base_delay.count() * static_cast<double>(1ULL << std::min(retry, 20));
  std::uniform_real_distribution<double> jitter(0.0, cap);
  std::this_thread::sleep_for(std::chrono::duration<double>(jitter(rng)));
}

httplib::Client make_client(const SplitUrl& url, double timeout_seconds) {
  httplib::Client client(url.origin);
  auto t = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_seconds));
  client.set_connection_timeout(std::min<std::chrono::microseconds>(t, std::chrono::seconds(10)));
  client.set_read_timeout(t);
  client.set_write_timeout(t);
  return client;
}

// Runs `send` until it yields a non-transient response. Returns the final
// response; throws `exhausted` when every attempt was transient.
template <typename Send>
httplib::Result with_retries(const RetryPolicy& policy, ServiceError::Kind exhausted, const std::string& what,
                             Send&& send) {
  std::string last_problem;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) backoff(policy, attempt - 1);
    httplib::Result res = send();
    if (!res) {
      last_problem = httplib::to_string(res.error());
      continue;
    }
    if (transient_status(res->status)) {
      last_problem = "HTTP " + std::to_string(res->status);
      continue;
    }
    return res;
  }
  throw ServiceError(exhausted, what + " failed after " + std::to_string(policy.max_retries + 1) +
                                    " attempts: " + last_problem);
}

nlohmann::json parse_body(const httplib::Result& res, const std::string& what) {
  if (res->status < 200 || res->status >= 300) {
    throw ServiceError(ServiceError::Kind::Rejected,
                       what + " rejected with HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ServiceError(ServiceError::Kind::BadResponse, what + " returned invalid JSON: " + e.what());
  }
}

std::string query_escape(std::string_view s) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xf];
    }
  }
  return out;
}

bool mentions_sorry(const LeanMessage& m) {
  return m.message.find("declaration uses 'sorry'") != std::string::npos;
}

}  // namespace

SplitUrl split_url(std::string_view url) {
  std::size_t scheme = url.find("://");
  std::size_t host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
  std::size_t slash = url.find('/', host_start);
  SplitUrl out;
  if (slash == std::string_view::npos) {
    out.origin = std::string(url);
  } else {
    out.origin = std::string(url.substr(0, slash));
    out.prefix = std::string(url.substr(slash));
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

HttpChatBackend::HttpChatBackend(config::ChatBackendConfig cfg) : cfg_(std::move(cfg)), url_(split_url(cfg_.base_url)) {}

std::string HttpChatBackend::complete(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) throw ServiceError(ServiceError::Kind::BadResponse, "chat request without messages");
  nlohmann::json body;
  body["model"] = cfg_.model;
  auto& list = body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) list.push_back({{"role", m.role}, {"content", m.content}});
  // OpenAI's reasoning models only accept max_completion_tokens.
  body[cfg_.provider == "openai" ? "max_completion_tokens" : "max_tokens"] = cfg_.max_tokens;
  std::string payload = body.dump();
  std::string path = url_.prefix + "/chat/completions";

  RetryPolicy policy{cfg_.max_remote_retries, std::chrono::duration<double>(cfg_.backoff_seconds)};
  auto res = with_retries(policy, ServiceError::Kind::RemoteExhausted, "chat completion (" + cfg_.model + ")", [&] {
    auto client = make_client(url_, cfg_.timeout_seconds);
    if (!cfg_.api_key.empty()) client.set_bearer_token_auth(cfg_.api_key);
    ++requests_;
    return client.Post(path, payload, "application/json");
  });
  auto j = parse_body(res, "chat completion");
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw ServiceError(ServiceError::Kind::BadResponse, "chat completion returned no choices");
  }
  const auto& msg = (*choices)[0].value("message", nlohmann::json::object());
  auto content = msg.find("content");
  if (content == msg.end() || !content->is_string()) {
    throw ServiceError(ServiceError::Kind::BadResponse, "chat completion choice has no text content");
  }
  return content->get<std::string>();
}

std::string chat_complete(const config::ChatBackendConfig& cfg, const std::vector<ChatMessage>& messages) {
  return HttpChatBackend(cfg).complete(messages);
}

KiminaClient::KiminaClient(config::KiminaConfig cfg)
    : cfg_(std::move(cfg)), url_(split_url(cfg_.url)), slots_(std::clamp(cfg_.max_concurrency, 1, 1024)) {}

nlohmann::json KiminaClient::post(const std::string& path, const nlohmann::json& body) {
  std::string payload = body.dump();
  RetryPolicy policy{cfg_.max_retries, std::chrono::duration<double>(cfg_.backoff_seconds)};
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  // Leave the server room to enforce its own timeout first.
  double timeout = cfg_.timeout_seconds + 30.0;
  auto res = with_retries(policy, ServiceError::Kind::ServiceUnavailable, "Lean server " + path, [&] {
    auto client = make_client(url_, timeout);
    ++requests_;
    return client.Post(url_.prefix + path, payload, "application/json");
  });
  auto j = parse_body(res, "Lean server " + path);
  if (!j.is_object()) throw ServiceError(ServiceError::Kind::BadResponse, "Lean server returned a non-object");
  return j;
}

VerificationResult parse_check_result(const nlohmann::json& item) {
  VerificationResult r;
  r.time = item.value("time", 0.0);
  if (auto e = item.find("error"); e != item.end() && !e->is_null()) {
    auto failure = VerificationResult::failure(e->is_string() ? e->get<std::string>() : e->dump());
    failure.time = r.time;
    return failure;
  }
  const auto& response = item.value("response", nlohmann::json::object());
  for (const auto& m : response.value("messages", nlohmann::json::array())) r.errors.push_back(m.get<LeanMessage>());
  bool has_error = std::any_of(r.errors.begin(), r.errors.end(),
                               [](const LeanMessage& m) { return m.severity == Severity::Error; });
  bool has_sorry = !response.value("sorries", nlohmann::json::array()).empty() ||
                   std::any_of(r.errors.begin(), r.errors.end(), mentions_sorry);
  r.passed = !has_error;
  r.complete = r.passed && !has_sorry;
  return r;
}

VerificationResult KiminaClient::verify(std::string_view code) {
  if (code.empty()) throw ServiceError(ServiceError::Kind::BadResponse, "refusing to verify empty code");
  nlohmann::json body = {{"codes", {{{"custom_id", "0"}, {"code", std::string(code)}}}},
                         {"timeout", cfg_.timeout_seconds}};
  auto j = post(cfg_.verify_path, body);
  auto results = j.find("results");
  if (results == j.end() || !results->is_array() || results->empty()) {
    throw ServiceError(ServiceError::Kind::BadResponse, "check response has no results");
  }
  try {
    return parse_check_result((*results)[0]);
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(ServiceError::Kind::BadResponse, std::string("malformed check result: ") + e.what());
  }
}

ast::ParsedAst KiminaClient::fetch_ast(std::string_view code, std::string_view module_name) {
  if (!valid_module_name(module_name)) {
    throw ServiceError(ServiceError::Kind::InvalidModuleName, "invalid module name `" + std::string(module_name) + "`");
  }
  nlohmann::json body = {
      {"code", std::string(code)}, {"module_name", std::string(module_name)}, {"timeout", cfg_.timeout_seconds}};
  auto j = post("/api/ast_code", body);
  if (auto e = j.find("error"); e != j.end() && !e->is_null()) {
    throw ServiceError(ServiceError::Kind::AstExportFailed, e->is_string() ? e->get<std::string>() : e->dump());
  }
  if (!j.contains("ast") || j["ast"].is_null()) {
    throw ServiceError(ServiceError::Kind::AstExportFailed, "AST export returned no tree");
  }
  try {
    return ast::parse_ast(j);
  } catch (const ast::AstError& e) {
    throw ServiceError(ServiceError::Kind::BadResponse, std::string("malformed AST payload: ") + e.what());
  }
}

nlohmann::json KiminaClient::fetch_module_ast(const std::vector<std::string>& modules, bool one) {
  for (const auto& m : modules) {
    if (!valid_module_name(m)) throw ServiceError(ServiceError::Kind::InvalidModuleName, "invalid module name `" + m + "`");
  }
  return post("/api/ast", {{"modules", modules}, {"one", one}, {"timeout", cfg_.timeout_seconds}});
}

bool valid_module_name(std::string_view name) {
  if (name.empty() || name.front() == '.' || name.back() == '.') return false;
  if (name.find("..") != std::string_view::npos) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

LeanExploreClient::LeanExploreClient(config::LeanExploreConfig cfg) : cfg_(std::move(cfg)), url_(split_url(cfg_.url)) {}

std::vector<TheoremHit> LeanExploreClient::search(const std::vector<std::string>& queries) {
  std::string pkg;
  for (const auto& p : cfg_.package_filters) pkg += (pkg.empty() ? "" : ",") + p;
  RetryPolicy policy{cfg_.max_retries, std::chrono::duration<double>(cfg_.backoff_seconds)};
  std::vector<std::vector<TheoremHit>> per_query;
  for (const auto& q : queries) {
    std::string path = url_.prefix + "/search?q=" + query_escape(q);
    if (!pkg.empty()) path += "&pkg=" + query_escape(pkg);
    auto res = with_retries(policy, ServiceError::Kind::ServiceUnavailable, "theorem search", [&] {
      auto client = make_client(url_, cfg_.timeout_seconds);
      ++requests_;
      return client.Get(path);
    });
    auto j = parse_body(res, "theorem search");
    std::vector<TheoremHit> hits;
    try {
      for (const auto& r : j.value("results", nlohmann::json::array())) {
        hits.push_back({r.at("full_name"), r.value("statement", ""), r.value("package", ""), r.value("score", 0.0)});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError(ServiceError::Kind::BadResponse, std::string("malformed search result: ") + e.what());
    }
    per_query.push_back(std::move(hits));
  }
  return merge_hits(per_query, cfg_.package_filters, static_cast<std::size_t>(cfg_.max_results));
}

std::vector<TheoremHit> merge_hits(const std::vector<std::vector<TheoremHit>>& per_query,
                                   const std::vector<std::string>& packages, std::size_t cap) {
  std::map<std::string, TheoremHit> best;
  for (const auto& hits : per_query) {
    for (const auto& h : hits) {
      if (std::find(packages.begin(), packages.end(), h.source_package) == packages.end()) continue;
      auto [it, inserted] = best.emplace(h.full_name, h);
      if (!inserted && h.score > it->second.score) it->second = h;
    }
  }
  std::vector<TheoremHit> out;
  for (auto& [_, h] : best) out.push_back(std::move(h));
  std::stable_sort(out.begin(), out.end(), [](const TheoremHit& a, const TheoremHit& b) { return a.score > b.score; });
  if (out.size() > cap) out.resize(cap);
  return out;
}

}  // namespace sketchprove::services
