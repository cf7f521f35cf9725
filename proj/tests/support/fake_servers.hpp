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
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchprove/theorem_hit.hpp"
#include "support/fake_lean.hpp"

namespace sketchprove::testing {

struct FakeRequest {
  std::string method;
  std::string path;
  std::multimap<std::string, std::string> params;
  std::map<std::string, std::string> headers;
  std::string body;
};

struct FakeResponse {
  int status = 200;
  std::string body;
};

/// An HTTP server on 127.0.0.1 and a kernel-chosen port, serving one handler
/// from a background thread. Counts requests and can inject failures.
class FakeServer {
 public:
  using Handler = std::function<FakeResponse(const FakeRequest&)>;

  explicit FakeServer(Handler handler);
  ~FakeServer();
  FakeServer(const FakeServer&) = delete;
  FakeServer& operator=(const FakeServer&) = delete;

  std::string url() const;
  std::size_t requests() const;
  std::vector<FakeRequest> log() const;

  /// The next `n` requests answer `status` without reaching the handler.
  void fail_next(std::size_t n, int status = 503);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// `/api/check`, `/api/ast_code` and `/api/ast` backed by `lean`.
std::unique_ptr<FakeServer> make_kimina_server(const FakeLean& lean);

/// `/search?q=&pkg=`: every entry whose name or statement shares a word with
/// the query, scored by the number of shared words. `pkg` is ignored so the
/// client's own filter is exercised.
std::unique_ptr<FakeServer> make_search_server(std::vector<TheoremHit> index);

/// `/chat/completions` answering with `reply(request body)`.
std::unique_ptr<FakeServer> make_chat_server(std::function<std::string(const nlohmann::json&)> reply);

}  // namespace sketchprove::testing
