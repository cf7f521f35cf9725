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

#include "sketchprove/agents.hpp"

#include <algorithm>
#include <cctype>

#include <openssl/evp.h>

#include "sketchprove/lean_lexer.hpp"

namespace sketchprove::agents {

namespace detail {
extern const std::string_view k_template_formalizer;
extern const std::string_view k_template_prover_initial;
extern const std::string_view k_template_prover_correction;
extern const std::string_view k_template_semantic_check;
extern const std::string_view k_template_query_initial;
extern const std::string_view k_template_query_backtrack;
extern const std::string_view k_template_decomposer_initial;
extern const std::string_view k_template_decomposer_correction;
extern const std::string_view k_template_decomposer_backtrack;
}  // namespace detail

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct Placeholder {
  std::size_t begin;
  std::size_t end;
  std::string name;
};

std::vector<Placeholder> scan_placeholders(std::string_view text) {
  std::vector<Placeholder> out;
  std::size_t p = 0;
  while ((p = text.find("{{", p)) != std::string_view::npos) {
    std::size_t close = text.find("}}", p + 2);
    if (close == std::string_view::npos) break;
    out.push_back({p, close + 2, std::string(trim(text.substr(p + 2, close - p - 2)))});
    p = close + 2;
  }
  return out;
}

std::string_view raw_template(PromptKind kind) {
  switch (kind) {
    case PromptKind::Formalizer: return detail::k_template_formalizer;
    case PromptKind::ProverInitial: return detail::k_template_prover_initial;
    case PromptKind::ProverCorrection: return detail::k_template_prover_correction;
    case PromptKind::SemanticCheck: return detail::k_template_semantic_check;
    case PromptKind::QueryInitial: return detail::k_template_query_initial;
    case PromptKind::QueryBacktrack: return detail::k_template_query_backtrack;
    case PromptKind::DecomposerInitial: return detail::k_template_decomposer_initial;
    case PromptKind::DecomposerCorrection: return detail::k_template_decomposer_correction;
    case PromptKind::DecomposerBacktrack: return detail::k_template_decomposer_backtrack;
  }
  return {};
}

// Strips decoration a model may put around a label or value: markdown
// emphasis, brackets, trailing punctuation.
std::string_view strip_decoration(std::string_view s) {
  auto junk = [](char c) { return c == '*' || c == '_' || c == '#' || c == '[' || c == ']' || c == '`' || c == '.'; };
  s = trim(s);
  while (!s.empty() && (junk(s.front()) || std::isspace(static_cast<unsigned char>(s.front())))) s.remove_prefix(1);
  while (!s.empty() && (junk(s.back()) || std::isspace(static_cast<unsigned char>(s.back())))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t p = 0;
  while (true) {
    std::size_t nl = s.find('\n', p);
    if (nl == std::string_view::npos) {
      lines.push_back(s.substr(p));
      break;
    }
    lines.push_back(s.substr(p, nl - p));
    p = nl + 1;
  }
  return lines;
}

// If `line` is `<label>: rest` (case-insensitive, decoration allowed),
// returns rest.
std::optional<std::string_view> labelled(std::string_view line, std::string_view label) {
  std::size_t colon = line.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  if (lower(strip_decoration(line.substr(0, colon))) != label) return std::nullopt;
  return line.substr(colon + 1);
}

std::string describe(const LeanMessage& m) {
  std::string head = m.severity == Severity::Error ? "error" : m.severity == Severity::Warning ? "warning" : "info";
  if (m.start) {
    head += " (line " + std::to_string(m.start->line) + ", column " + std::to_string(m.start->column) + ")";
  }
  return head + ": " + m.message;
}

}  // namespace

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::Formalizer: return "formalizer";
    case PromptKind::ProverInitial: return "prover_initial";
    case PromptKind::ProverCorrection: return "prover_correction";
    case PromptKind::SemanticCheck: return "semantic_check";
    case PromptKind::QueryInitial: return "query_initial";
    case PromptKind::QueryBacktrack: return "query_backtrack";
    case PromptKind::DecomposerInitial: return "decomposer_initial";
    case PromptKind::DecomposerCorrection: return "decomposer_correction";
    case PromptKind::DecomposerBacktrack: return "decomposer_backtrack";
  }
  return "unknown";
}

std::string_view template_text(PromptKind kind) {
  std::string_view t = raw_template(kind);
  if (t.ends_with('\n')) t.remove_suffix(1);
  return t;
}

std::vector<std::string> required_variables(PromptKind kind) {
  std::vector<std::string> names;
  for (auto& p : scan_placeholders(template_text(kind))) {
    if (std::find(names.begin(), names.end(), p.name) == names.end()) names.push_back(p.name);
  }
  return names;
}

const std::optional<std::string>* PromptVars::lookup(std::string_view name) const {
  if (name == "formal_statement_name") return &formal_statement_name;
  if (name == "informal_statement") return &informal_statement;
  if (name == "formal_statement") return &formal_statement;
  if (name == "formal_theorem") return &formal_theorem;
  if (name == "prev_round_num") return &prev_round_num;
  if (name == "error_message_for_prev_round") return &error_message_for_prev_round;
  if (name == "theorem_hints_section") return &theorem_hints_section;
  return nullptr;
}

std::string render_prompt(PromptKind kind, const PromptVars& vars) {
  std::string_view text = template_text(kind);
  std::string out;
  std::size_t last = 0;
  for (const auto& p : scan_placeholders(text)) {
    const auto* slot = vars.lookup(p.name);
    if (!slot || !slot->has_value()) {
      throw AgentError(AgentError::Kind::MissingVariable,
                       std::string(to_string(kind)) + " prompt needs `" + p.name + "`");
    }
    out.append(text.substr(last, p.begin - last));
    out.append(**slot);
    last = p.end;
  }
  out.append(text.substr(last));
  return out;
}

std::vector<std::string> parse_search_queries(std::string_view response) {
  static constexpr std::string_view open = "<search>";
  static constexpr std::string_view close = "</search>";
  std::vector<std::string> out;
  std::size_t p = 0;
  while ((p = response.find(open, p)) != std::string_view::npos) {
    std::size_t start = p + open.size();
    std::size_t end = response.find(close, start);
    if (end == std::string_view::npos) break;
    auto q = trim(response.substr(start, end - start));
    if (!q.empty()) out.emplace_back(q);
    p = end + close.size();
  }
  if (out.empty()) throw AgentError(AgentError::Kind::NoQueries, "response contains no <search> queries");
  return out;
}

Judgement parse_judgement(std::string_view response) {
  auto lines = split_lines(response);
  for (std::size_t i = lines.size(); i-- > 0;) {
    auto value = labelled(lines[i], "judgement");
    if (!value) value = labelled(lines[i], "judgment");
    if (!value) continue;
    std::string v = lower(strip_decoration(*value));
    Judgement j;
    if (v.starts_with("inappropriate")) {
      j.verdict = Verdict::Inappropriate;
    } else if (v.starts_with("appropriate")) {
      j.verdict = Verdict::Appropriate;
    } else {
      continue;
    }
    for (std::size_t k = i; k-- > 0;) {
      auto thought = labelled(lines[k], "thought");
      if (!thought) continue;
      std::string text(*thought);
      for (std::size_t m = k + 1; m < i; ++m) {
        text += '\n';
        text += lines[m];
      }
      j.rationale = std::string(trim(text));
      break;
    }
    return j;
  }
  throw AgentError(AgentError::Kind::NoJudgement, "response has no Judgement line");
}

std::string generate_theorem_name(std::string_view informal) {
  auto text = trim(informal);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string name = "theorem_";
  for (int i = 0; i < 6; ++i) {
    name += hex[digest[i] >> 4];
    name += hex[digest[i] & 0xf];
  }
  return name;
}

std::string build_error_annotation(std::string_view code, const VerificationResult& result) {
  std::vector<LeanMessage> shown = result.error_messages();
  if (shown.empty()) shown = result.errors;

  struct Span {
    std::size_t begin;
    std::size_t end;
  };
  std::vector<Span> spans;
  for (const auto& m : shown) {
    if (!m.start) continue;
    std::size_t b = lean::offset_of(code, m.start->line, m.start->column);
    std::size_t e = b;
    if (m.end && *m.end > *m.start) e = lean::offset_of(code, m.end->line, m.end->column);
    if (e <= b) {
      // No usable extent: mark to the end of the line.
      e = code.find('\n', b);
      if (e == std::string_view::npos) e = code.size();
    }
    spans.push_back({b, e});
  }
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.begin < b.begin; });
  std::vector<Span> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.begin < merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }

  std::string out;
  std::size_t last = 0;
  for (const auto& s : merged) {
    out.append(code.substr(last, s.begin - last));
    out += "<error>";
    out.append(code.substr(s.begin, s.end - s.begin));
    out += "</error>";
    last = s.end;
  }
  out.append(code.substr(last));
  out += "\n\n";
  if (shown.empty()) return out + "error: unknown error";

  std::stable_sort(shown.begin(), shown.end(), [](const LeanMessage& a, const LeanMessage& b) {
    if (a.start.has_value() != b.start.has_value()) return a.start.has_value();
    return a.start && *a.start < *b.start;
  });
  for (std::size_t i = 0; i < shown.size(); ++i) {
    if (i) out += '\n';
    out += describe(shown[i]);
  }
  return out;
}

std::string render_hints_section(const std::vector<TheoremHit>& hits, std::size_t cap) {
  if (hits.empty()) return "No relevant existing theorems were found.";
  std::string out = "Existing theorems that may be useful:";
  for (std::size_t i = 0; i < hits.size() && i < cap; ++i) {
    std::string statement = hits[i].statement;
    std::replace(statement.begin(), statement.end(), '\n', ' ');
    out += "\n- " + hits[i].full_name + " : " + std::string(trim(statement));
  }
  return out;
}

}  // namespace sketchprove::agents
