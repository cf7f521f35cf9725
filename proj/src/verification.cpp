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

#include "sketchprove/verification.hpp"

namespace sketchprove {

std::vector<LeanMessage> VerificationResult::error_messages() const {
  std::vector<LeanMessage> out;
  for (const auto& m : errors) {
    if (m.severity == Severity::Error) out.push_back(m);
  }
  return out;
}

VerificationResult VerificationResult::failure(std::string message) {
  VerificationResult r;
  r.errors.push_back(LeanMessage{Severity::Error, std::move(message), std::nullopt, std::nullopt});
  return r;
}

namespace {

const char* severity_name(Severity s) {
  switch (s) {
    case Severity::Error: return "error";
    case Severity::Warning: return "warning";
    case Severity::Info: return "info";
  }
  return "error";
}

Severity parse_severity(const std::string& s) {
  if (s == "warning") return Severity::Warning;
  if (s == "info" || s == "information") return Severity::Info;
  return Severity::Error;
}

}  // namespace

void to_json(nlohmann::json& j, const Position& p) { j = {{"line", p.line}, {"column", p.column}}; }

void from_json(const nlohmann::json& j, Position& p) {
  p.line = j.at("line").get<std::size_t>();
  p.column = j.at("column").get<std::size_t>();
}

void to_json(nlohmann::json& j, const LeanMessage& m) {
  j = {{"severity", severity_name(m.severity)}, {"data", m.message}};
  j["pos"] = m.start ? nlohmann::json(*m.start) : nlohmann::json(nullptr);
  j["endPos"] = m.end ? nlohmann::json(*m.end) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, LeanMessage& m) {
  m.severity = parse_severity(j.value("severity", std::string("error")));
  if (j.contains("data")) {
    m.message = j.at("data").get<std::string>();
  } else {
    m.message = j.value("message", std::string());
  }
  auto pos = [&](const char* key) -> std::optional<Position> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<Position>();
  };
  m.start = pos("pos");
  m.end = pos("endPos");
}

void to_json(nlohmann::json& j, const VerificationResult& r) {
  j = {{"passed", r.passed}, {"complete", r.complete}, {"errors", r.errors}, {"time", r.time}};
}

void from_json(const nlohmann::json& j, VerificationResult& r) {
  r.passed = j.at("passed").get<bool>();
  r.complete = j.at("complete").get<bool>();
  r.errors = j.value("errors", std::vector<LeanMessage>{});
  r.time = j.value("time", 0.0);
}

}  // namespace sketchprove
