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

#include <algorithm>
#include <future>
#include <random>
#include <set>

#include "sketchprove/services.hpp"
#include "support/fake_servers.hpp"
#include "support/fixtures.hpp"

using namespace sketchprove;
using namespace sketchprove::services;
using sketchprove::testing::FakeLean;
using sketchprove::testing::read_fixture;

namespace {

ServiceError::Kind service_error_kind(auto&& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.kind();
  }
  FAIL("expected ServiceError");
  return ServiceError::Kind::BadResponse;
}

config::ChatBackendConfig chat_cfg(const std::string& url, int retries) {
  config::ChatBackendConfig c;
  c.model = "test-model";
  c.provider = "openai";
  c.base_url = url;
  c.api_key = "sk-test";
  c.max_tokens = 128;
  c.max_remote_retries = retries;
  c.timeout_seconds = 5;
  c.backoff_seconds = 0;
  return c;
}

config::KiminaConfig kimina_cfg(const std::string& url, int retries = 5) {
  config::KiminaConfig c;
  c.url = url;
  c.max_retries = retries;
  c.timeout_seconds = 5;
  c.backoff_seconds = 0;
  return c;
}

config::LeanExploreConfig search_cfg(const std::string& url, std::vector<std::string> pkgs) {
  config::LeanExploreConfig c;
  c.url = url;
  c.package_filters = std::move(pkgs);
  c.backoff_seconds = 0;
  c.timeout_seconds = 5;
  return c;
}

const std::vector<ChatMessage> kHello{{"user", "hello"}};

}  // namespace

TEST_CASE("split_url") {
  CHECK(split_url("http://localhost:8000").origin == "http://localhost:8000");
  CHECK(split_url("http://localhost:8000").prefix.empty());
  auto s = split_url("https://www.leanexplore.com/api/v1/");
  CHECK(s.origin == "https://www.leanexplore.com");
  CHECK(s.prefix == "/api/v1");
}

TEST_CASE("chat_complete retries transient failures then succeeds") {
  auto server = testing::make_chat_server([](const nlohmann::json&) { return "ok"; });
  server->fail_next(2, 503);
  CHECK(chat_complete(chat_cfg(server->url(), 5), kHello) == "ok");
  CHECK(server->requests() == 3);
}

TEST_CASE("chat_complete with no retry budget gives up after one request") {
  auto server = testing::make_chat_server([](const nlohmann::json&) { return "ok"; });
  server->fail_next(1, 500);
  CHECK(service_error_kind([&] { chat_complete(chat_cfg(server->url(), 0), kHello); }) ==
        ServiceError::Kind::RemoteExhausted);
  CHECK(server->requests() == 1);
}

TEST_CASE("chat_complete never exceeds 1 + retries requests") {
  for (int retries : {0, 1, 3}) {
    auto server = testing::make_chat_server([](const nlohmann::json&) { return "ok"; });
    server->fail_next(100, 429);
    CHECK_THROWS_AS(chat_complete(chat_cfg(server->url(), retries), kHello), ServiceError);
    CHECK(server->requests() == static_cast<std::size_t>(retries + 1));
  }
}

TEST_CASE("chat_complete does not retry non-transient statuses") {
  auto server = testing::make_chat_server([](const nlohmann::json&) { return "ok"; });
  server->fail_next(1, 401);
  CHECK(service_error_kind([&] { chat_complete(chat_cfg(server->url(), 5), kHello); }) ==
        ServiceError::Kind::Rejected);
  CHECK(server->requests() == 1);
}

TEST_CASE("chat_complete returns the assistant text untouched") {
  const std::string text = "  Thought: x\n```lean4\ntheorem t : True := by trivial\n```\n\n";
  auto server = testing::make_chat_server([&](const nlohmann::json&) { return text; });
  CHECK(chat_complete(chat_cfg(server->url() + "/v1", 0), kHello) == text);
  auto req = server->log().at(0);
  CHECK(req.path == "/v1/chat/completions");
  CHECK(req.headers.at("Authorization") == "Bearer sk-test");
  auto body = nlohmann::json::parse(req.body);
  CHECK(body["model"] == "test-model");
  CHECK(body["messages"][0]["content"] == "hello");
  CHECK(body["max_completion_tokens"] == 128);
  CHECK_FALSE(body.contains("max_tokens"));
}

TEST_CASE("chat_complete sends max_tokens to other providers") {
  auto server = testing::make_chat_server([](const nlohmann::json&) { return "ok"; });
  auto cfg = chat_cfg(server->url(), 0);
  cfg.provider = "ollama";
  chat_complete(cfg, kHello);
  auto body = nlohmann::json::parse(server->log().at(0).body);
  CHECK(body["max_tokens"] == 128);
}

TEST_CASE("chat_complete rejects responses without choices") {
  testing::FakeServer server([](const testing::FakeRequest&) { return testing::FakeResponse{200, R"({"choices":[]})"}; });
  CHECK(service_error_kind([&] { chat_complete(chat_cfg(server.url(), 0), kHello); }) ==
        ServiceError::Kind::BadResponse);
  testing::FakeServer garbage([](const testing::FakeRequest&) { return testing::FakeResponse{200, "not json"}; });
  CHECK(service_error_kind([&] { chat_complete(chat_cfg(garbage.url(), 0), kHello); }) ==
        ServiceError::Kind::BadResponse);
}

TEST_CASE("unreachable chat backend exhausts retries") {
  int port;
  {
    auto s = testing::make_chat_server([](const nlohmann::json&) { return ""; });
    port = std::stoi(s->url().substr(s->url().rfind(':') + 1));
  }
  auto cfg = chat_cfg("http://127.0.0.1:" + std::to_string(port), 1);
  CHECK(service_error_kind([&] { chat_complete(cfg, kHello); }) == ServiceError::Kind::RemoteExhausted);
}

TEST_CASE("verify: even-sum proof is passed and complete") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  KiminaClient client(kimina_cfg(server->url()));
  auto r = client.verify(read_fixture("listings/even_sum_proof.lean"));
  CHECK(r.passed);
  CHECK(r.complete);
  CHECK(r.proven());
  CHECK(server->log().at(0).path == "/api/check");
}

TEST_CASE("verify: infinitude sketch is passed but incomplete") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  KiminaClient client(kimina_cfg(server->url()));
  auto r = client.verify(read_fixture("listings/infinitude_sketch.lean"));
  CHECK(r.passed);
  CHECK_FALSE(r.complete);
  CHECK(r.error_messages().empty());
  auto sorry_warnings = std::count_if(r.errors.begin(), r.errors.end(), [](const LeanMessage& m) {
    return m.severity == Severity::Warning && m.message == "declaration uses 'sorry'";
  });
  CHECK(sorry_warnings >= 1);
  auto raw = lean.check_response(read_fixture("listings/infinitude_sketch.lean"), "0");
  CHECK(raw["response"]["sorries"].size() == 5);
}

TEST_CASE("verify: type mismatch fails") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  KiminaClient client(kimina_cfg(server->url()));
  auto r = client.verify("theorem t : True := by exact 0");
  CHECK_FALSE(r.passed);
  CHECK_FALSE(r.complete);
  REQUIRE(r.error_messages().size() == 1);
  CHECK(r.error_messages()[0].message.find("type mismatch") != std::string::npos);
  REQUIRE(r.error_messages()[0].start);
  CHECK(*r.error_messages()[0].start == Position{1, 29});
}

TEST_CASE("verify honours the configured path and retry budget") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  auto cfg = kimina_cfg(server->url(), 2);
  server->fail_next(5, 502);
  KiminaClient client(cfg);
  CHECK(service_error_kind([&] { client.verify("theorem t : True := trivial"); }) ==
        ServiceError::Kind::ServiceUnavailable);
  CHECK(server->requests() == 3);
  cfg.verify_path = "/missing";
  KiminaClient wrong(cfg);
  CHECK(service_error_kind([&] { wrong.verify("theorem t : True := trivial"); }) == ServiceError::Kind::Rejected);
}

TEST_CASE("parse_check_result") {
  SUBCASE("service-level error") {
    auto r = parse_check_result({{"custom_id", "0"}, {"error", "timeout"}, {"response", nullptr}});
    CHECK_FALSE(r.passed);
    CHECK(r.errors.at(0).message == "timeout");
  }
  SUBCASE("sorry warning without sorries list") {
    nlohmann::json item = {{"error", nullptr},
                           {"response",
                            {{"messages", {{{"severity", "warning"}, {"data", "declaration uses 'sorry'"}, {"pos", {{"line", 1}, {"column", 8}}}}}}}}};
    auto r = parse_check_result(item);
    CHECK(r.passed);
    CHECK_FALSE(r.complete);
  }
  SUBCASE("info messages do not fail") {
    nlohmann::json item = {{"error", nullptr}, {"response", {{"messages", {{{"severity", "info"}, {"data", "x"}}}}}}};
    auto r = parse_check_result(item);
    CHECK(r.proven());
  }
}

TEST_CASE("verify is deterministic") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  KiminaClient client(kimina_cfg(server->url()));
  std::mt19937 rng(7);
  const std::vector<std::string> parts{"trivial", "sorry", "exact 0", "bad_tactic", "(", "simp", "omega"};
  for (int i = 0; i < 25; ++i) {
    std::string code = "theorem t : True := by\n";
    for (int k = 0; k < 3; ++k) code += "  " + parts[rng() % parts.size()] + "\n";
    CHECK(client.verify(code) == client.verify(code));
  }
}

TEST_CASE("fetch_ast: infinitude sketch has five sorries") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  KiminaClient client(kimina_cfg(server->url()));
  auto ast = client.fetch_ast(read_fixture("listings/infinitude_sketch.lean"), "User.Code");
  CHECK(ast.sorries.size() == 5);
  auto body = nlohmann::json::parse(server->log().at(0).body);
  CHECK(body["module_name"] == "User.Code");
  CHECK(server->log().at(0).path == "/api/ast_code");
}

TEST_CASE("fetch_ast validates module names before any request") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  KiminaClient client(kimina_cfg(server->url()));
  for (const char* bad : {"../etc", "", "User/Code", "User..Code", ".hidden", "a b", "User.Code."}) {
    CHECK(service_error_kind([&] { client.fetch_ast("theorem t : True := trivial", bad); }) ==
          ServiceError::Kind::InvalidModuleName);
  }
  CHECK(server->requests() == 0);
  CHECK(valid_module_name("Mathlib.Data.Nat.Basic"));
  CHECK(valid_module_name("User_1.Code"));
}

TEST_CASE("fetch_ast surfaces the export error") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  KiminaClient client(kimina_cfg(server->url()));
  try {
    client.fetch_ast("theorem t : True := by (exact trivial");
    FAIL("expected AstExportFailed");
  } catch (const ServiceError& e) {
    CHECK(e.kind() == ServiceError::Kind::AstExportFailed);
    CHECK(std::string(e.what()).find("unexpected token") != std::string::npos);
  }
}

TEST_CASE("fetch_module_ast posts to /api/ast") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  KiminaClient client(kimina_cfg(server->url()));
  auto j = client.fetch_module_ast({"Mathlib.Data.Nat.Basic"});
  CHECK(j["results"].size() == 1);
  auto req = server->log().at(0);
  CHECK(req.path == "/api/ast");
  auto body = nlohmann::json::parse(req.body);
  CHECK(body["one"] == true);
  CHECK(body["modules"][0] == "Mathlib.Data.Nat.Basic");
}

TEST_CASE("concurrent verification through one client") {
  FakeLean lean;
  auto server = testing::make_kimina_server(lean);
  auto cfg = kimina_cfg(server->url());
  cfg.max_concurrency = 2;
  KiminaClient client(cfg);
  std::vector<std::future<bool>> futures;
  for (int i = 0; i < 8; ++i) {
    futures.push_back(std::async(std::launch::async, [&, i] {
      return client.verify(i % 2 ? "theorem t : True := trivial" : "theorem t : True := by exact 0").passed;
    }));
  }
  for (int i = 0; i < 8; ++i) CHECK(futures[i].get() == (i % 2 == 1));
  CHECK(server->requests() == 8);
}

TEST_CASE("search filters by package") {
  auto server = testing::make_search_server({{"Nat.factorial_pos", "0 < n !", "Mathlib", 0.9},
                                             {"Nat.factorial_succ", "(n+1)! = (n+1) * n !", "Batteries", 0.8},
                                             {"Nat.self_le_factorial", "n ≤ n !", "Mathlib", 0.7}});
  LeanExploreClient client(search_cfg(server->url() + "/api/v1", {"Mathlib"}));
  auto hits = client.search({"factorial"});
  REQUIRE(hits.size() == 2);
  for (const auto& h : hits) CHECK(h.source_package == "Mathlib");
  auto req = server->log().at(0);
  CHECK(req.path == "/api/v1/search");
  CHECK(req.params.find("q")->second == "factorial");
  CHECK(req.params.find("pkg")->second == "Mathlib");
}

TEST_CASE("search merges overlapping hits keeping the best score") {
  // Hand-merged: A appears for both queries (0.4, 0.9), B and C once each.
  testing::FakeServer server([](const testing::FakeRequest& req) {
    std::string q = req.params.find("q")->second;
    nlohmann::json results = nlohmann::json::array();
    if (q == "first") {
      results.push_back({{"full_name", "A"}, {"statement", "a"}, {"package", "Mathlib"}, {"score", 0.4}});
      results.push_back({{"full_name", "B"}, {"statement", "b"}, {"package", "Mathlib"}, {"score", 0.6}});
    } else {
      results.push_back({{"full_name", "A"}, {"statement", "a"}, {"package", "Mathlib"}, {"score", 0.9}});
      results.push_back({{"full_name", "C"}, {"statement", "c"}, {"package", "Mathlib"}, {"score", 0.6}});
    }
    return testing::FakeResponse{200, nlohmann::json{{"results", results}}.dump()};
  });
  LeanExploreClient client(search_cfg(server.url(), {"Mathlib"}));
  auto hits = client.search({"first", "second"});
  std::vector<TheoremHit> expected{{"A", "a", "Mathlib", 0.9}, {"B", "b", "Mathlib", 0.6}, {"C", "c", "Mathlib", 0.6}};
  CHECK(hits == expected);
  CHECK(server.requests() == 2);
}

TEST_CASE("search on an empty index") {
  auto server = testing::make_search_server({});
  LeanExploreClient client(search_cfg(server->url(), {"Mathlib"}));
  CHECK(client.search({"anything"}).empty());
}

TEST_CASE("search retry budget") {
  auto server = testing::make_search_server({});
  auto cfg = search_cfg(server->url(), {"Mathlib"});
  cfg.max_retries = 1;
  server->fail_next(10, 503);
  LeanExploreClient client(cfg);
  CHECK(service_error_kind([&] { client.search({"q"}); }) == ServiceError::Kind::ServiceUnavailable);
  CHECK(server->requests() == 2);
}

TEST_CASE("merge_hits property: sorted, unique, filtered, capped") {
  std::mt19937 rng(11);
  const std::vector<std::string> pkgs{"Mathlib", "Batteries", "Std", "Other"};
  for (int round = 0; round < 100; ++round) {
    std::vector<std::vector<TheoremHit>> per_query(1 + rng() % 4);
    for (auto& hits : per_query) {
      int n = rng() % 12;
      for (int i = 0; i < n; ++i) {
        hits.push_back({"T" + std::to_string(rng() % 15), "s", pkgs[rng() % pkgs.size()],
                        static_cast<double>(rng() % 100) / 100.0});
      }
    }
    std::size_t cap = 1 + rng() % 20;
    std::vector<std::string> filter{"Mathlib", "Std"};
    auto out = merge_hits(per_query, filter, cap);
    CHECK(out.size() <= cap);
    for (std::size_t i = 0; i + 1 < out.size(); ++i) CHECK(out[i].score >= out[i + 1].score);
    std::set<std::string> names;
    for (const auto& h : out) {
      CHECK(names.insert(h.full_name).second);
      CHECK((h.source_package == "Mathlib" || h.source_package == "Std"));
      double best = 0;
      for (const auto& hits : per_query)
        for (const auto& x : hits)
          if (x.full_name == h.full_name && (x.source_package == "Mathlib" || x.source_package == "Std"))
            best = std::max(best, x.score);
      CHECK(h.score == best);
    }
  }
}
