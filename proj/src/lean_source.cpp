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

#include "sketchprove/lean_source.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <sstream>

#include "sketchprove/lean_lexer.hpp"

namespace sketchprove::lean {

namespace {

constexpr std::array<std::string_view, 4> kMandatory = {
    "import Mathlib",
    "import Aesop",
    "set_option maxHeartbeats 0",
    "open BigOperators Real Nat Topology Rat",
};

constexpr std::array<std::string_view, 7> kDeclKeywords = {
    "theorem", "lemma", "example", "def", "abbrev", "instance", "opaque"};

constexpr std::array<std::string_view, 16> kCommandKeywords = {
    "theorem",  "lemma",      "example", "def",       "abbrev",   "instance",
    "opaque",   "namespace",  "section", "end",       "open",     "set_option",
    "variable", "noncomputable", "universe", "attribute"};

template <std::size_t N>
bool one_of(std::string_view s, const std::array<std::string_view, N>& set) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  std::size_t e = s.size();
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return s.substr(b, e - b);
}

std::string_view rtrim(std::string_view s) {
  std::size_t e = s.size();
  while (e > 0 && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return s.substr(0, e);
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(s)) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t p = 0;
  while (p <= s.size()) {
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

std::string_view first_word(std::string_view line) {
  line = trim(line);
  std::size_t e = 0;
  while (e < line.size() && line[e] != ' ' && line[e] != '\t') ++e;
  return line.substr(0, e);
}

std::size_t leading_spaces(std::string_view line) {
  std::size_t n = 0;
  while (n < line.size() && (line[n] == ' ' || line[n] == '\t')) ++n;
  return n;
}

/// Re-bases a block of lines so the least-indented non-blank line sits at
/// column 0.
std::vector<std::string> dedent(const std::vector<std::string_view>& lines) {
  std::size_t min_indent = std::string_view::npos;
  for (auto l : lines) {
    if (trim(l).empty()) continue;
    min_indent = std::min(min_indent, leading_spaces(l));
  }
  std::vector<std::string> out;
  for (auto l : lines) {
    if (trim(l).empty()) {
      out.emplace_back();
    } else {
      out.emplace_back(rtrim(l.substr(min_indent)));
    }
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  while (!out.empty() && out.front().empty()) out.erase(out.begin());
  return out;
}

std::string join(const std::vector<std::string>& lines, std::string_view sep = "\n") {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += sep;
    out += lines[i];
  }
  return out;
}

struct DeclarationSpan {
  std::size_t keyword = 0;  // token index of `theorem`/`lemma`/...
  std::optional<std::size_t> assign;  // token index of the top-level `:=`
};

std::optional<DeclarationSpan> locate_declaration(const std::vector<Token>& toks) {
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != TokenKind::Identifier || !one_of(toks[i].text, kDeclKeywords)) continue;
    DeclarationSpan span{i, std::nullopt};
    int depth = 0;
    int pending_bindings = 0;
    for (std::size_t j = i + 1; j < toks.size(); ++j) {
      const Token& t = toks[j];
      if (t.is_open_bracket()) {
        ++depth;
      } else if (t.is_close_bracket()) {
        --depth;
      } else if (depth == 0 && (t.is("let") || t.is("have") || t.is("letI") || t.is("haveI"))) {
        ++pending_bindings;
      } else if (depth == 0 && t.is(":=")) {
        if (pending_bindings > 0) {
          --pending_bindings;
          continue;
        }
        span.assign = j;
        break;
      }
    }
    return span;
  }
  return std::nullopt;
}

/// End of the declaration whose proof starts at token `from`: the start of
/// the next line opening with a top-level command, or end of text.
std::size_t declaration_end(std::string_view code, const std::vector<Token>& toks, std::size_t from) {
  for (std::size_t j = from; j < toks.size(); ++j) {
    const Token& t = toks[j];
    if (t.column != 0) continue;
    if (one_of(t.text, kCommandKeywords) || t.text.starts_with("#") || t.text == "@") {
      return line_start(code, t.offset);
    }
  }
  return code.size();
}

/// Lines after the token ending at `start`: an inline remainder keeps its
/// first line, continuation lines are dedented on their own.
std::vector<std::string> block_after(std::string_view code, std::size_t start, std::size_t end) {
  std::string_view rest = code.substr(start, end - start);
  auto lines = split_lines(rest);
  std::vector<std::string> out;
  if (!lines.empty() && !trim(lines.front()).empty()) {
    out.emplace_back(trim(lines.front()));
    auto tail = dedent(std::vector<std::string_view>(lines.begin() + 1, lines.end()));
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
  }
  return dedent(std::vector<std::string_view>(lines.begin() + (lines.empty() ? 0 : 1), lines.end()));
}

}  // namespace

std::string LeanSource::combined() const {
  if (trim(preamble).empty()) return body;
  return std::string(rtrim(preamble)) + "\n\n" + body;
}

const std::vector<std::string>& CanonicalPreamble::mandatory_lines() {
  static const std::vector<std::string> lines(kMandatory.begin(), kMandatory.end());
  return lines;
}

std::string CanonicalPreamble::text() const {
  std::vector<std::string> imports, options, rest;
  for (const auto& l : lines_) {
    auto w = first_word(l);
    if (w == "import") {
      imports.push_back(l);
    } else if (w == "set_option") {
      options.push_back(l);
    } else {
      rest.push_back(l);
    }
  }
  std::vector<std::string> groups;
  for (auto* g : {&imports, &options, &rest}) {
    if (!g->empty()) groups.push_back(join(*g));
  }
  return join(groups, "\n\n");
}

LeanSource split_source(std::string_view code) {
  auto lines = split_lines(code);
  std::size_t offset = 0;
  std::size_t body_start = code.size();
  bool in_block_comment = false;
  bool after_command = false;
  for (auto line : lines) {
    std::string_view t = trim(line);
    bool header = false;
    if (in_block_comment) {
      header = true;
      if (t.find("-/") != std::string_view::npos) in_block_comment = false;
    } else if (t.empty() || t.starts_with("--")) {
      header = true;
    } else if (t.starts_with("/-") && !t.starts_with("/--")) {
      header = true;
      in_block_comment = t.find("-/", 2) == std::string_view::npos;
    } else if (after_command && leading_spaces(line) > 0) {
      header = true;  // continuation of a multi-line header command
    } else {
      auto w = first_word(t);
      bool open_in = w == "open" && (t.ends_with(" in"));
      header = (w == "import" || w == "open" || w == "set_option" || w == "variable" ||
                w == "universe") &&
               !open_in;
      after_command = header;
    }
    if (!header) {
      body_start = offset;
      break;
    }
    offset += line.size() + 1;
  }
  if (body_start > code.size()) body_start = code.size();
  LeanSource out;
  out.preamble = std::string(rtrim(code.substr(0, body_start)));
  out.body = std::string(rtrim(code.substr(body_start)));
  return out;
}

CanonicalPreamble normalize_preamble(std::string_view preamble) {
  std::vector<std::string> extra_imports, extra_options, extra_rest;
  auto push_unique = [](std::vector<std::string>& v, std::string line) {
    if (std::find(v.begin(), v.end(), line) == v.end()) v.push_back(std::move(line));
  };
  auto lines = split_lines(preamble);
  bool in_block_comment = false;
  std::vector<std::string> commands;
  for (auto line : lines) {
    std::string_view t = trim(line);
    if (in_block_comment) {
      if (t.find("-/") != std::string_view::npos) in_block_comment = false;
      continue;
    }
    if (t.starts_with("/-")) {
      in_block_comment = t.find("-/", 2) == std::string_view::npos;
      continue;
    }
    if (t.empty() || t.starts_with("--")) continue;
    if (leading_spaces(line) > 0 && !commands.empty()) {
      commands.back() += " ";
      commands.back() += t;
      continue;
    }
    commands.emplace_back(t);
  }
  for (auto& raw : commands) {
    std::string line = collapse_whitespace(raw);
    if (one_of(std::string_view(line), kMandatory)) continue;
    auto w = first_word(line);
    if (w == "import") {
      push_unique(extra_imports, line);
    } else if (w == "set_option") {
      // maxHeartbeats is pinned by the mandatory block.
      if (line.starts_with("set_option maxHeartbeats ")) continue;
      push_unique(extra_options, line);
    } else {
      push_unique(extra_rest, line);
    }
  }
  std::vector<std::string> out{std::string(kMandatory[0]), std::string(kMandatory[1])};
  out.insert(out.end(), extra_imports.begin(), extra_imports.end());
  out.emplace_back(kMandatory[2]);
  out.insert(out.end(), extra_options.begin(), extra_options.end());
  out.emplace_back(kMandatory[3]);
  out.insert(out.end(), extra_rest.begin(), extra_rest.end());
  return CanonicalPreamble(std::move(out));
}

std::string extract_proof_body(std::string_view proof) {
  auto toks = tokenize(proof);
  auto decl = locate_declaration(toks);
  if (!decl) throw SourceError(SourceError::Kind::NoDeclaration, "no declaration found");
  if (!decl->assign || *decl->assign + 1 >= toks.size() || !toks[*decl->assign + 1].is("by")) {
    throw SourceError(SourceError::Kind::NoByBlock, "declaration proof does not start with a top-level `by`");
  }
  std::size_t by = *decl->assign + 1;
  std::size_t end = declaration_end(proof, toks, by + 1);
  return join(block_after(proof, toks[by].end(), end));
}

std::string extract_tactic_body(std::string_view proof) {
  try {
    return extract_proof_body(proof);
  } catch (const SourceError& e) {
    if (e.kind() != SourceError::Kind::NoByBlock) throw;
  }
  auto toks = tokenize(proof);
  auto decl = locate_declaration(toks);
  if (!decl->assign) throw SourceError(SourceError::Kind::NoByBlock, "declaration has no proof term");
  std::size_t a = *decl->assign;
  std::size_t end = declaration_end(proof, toks, a + 1);
  auto lines = block_after(proof, toks[a].end(), end);
  if (lines.empty()) throw SourceError(SourceError::Kind::NoByBlock, "empty proof term");
  lines.front() = "exact (" + lines.front();
  lines.back() += ")";
  return join(lines);
}

std::vector<UnprovenHave> find_unproven_haves(std::string_view code) {
  auto toks = tokenize(code);
  std::vector<UnprovenHave> out;
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (!toks[i].is("have") || toks[i + 1].kind != TokenKind::Identifier) continue;
    const Token& have = toks[i];
    int depth = 0;
    int pending = 0;
    std::optional<std::size_t> assign;
    for (std::size_t j = i + 2; j < toks.size(); ++j) {
      const Token& t = toks[j];
      if (t.is_open_bracket()) {
        ++depth;
      } else if (t.is_close_bracket()) {
        if (--depth < 0) break;
      } else if (depth == 0 && (t.is("let") || t.is("have"))) {
        ++pending;
      } else if (depth == 0 && t.is(":=")) {
        if (pending > 0) {
          --pending;
          continue;
        }
        assign = j;
        break;
      }
    }
    if (!assign) continue;
    std::size_t k = *assign + 1;
    if (k < toks.size() && toks[k].is("by")) ++k;
    if (k >= toks.size() || !toks[k].is("sorry")) continue;
    // The proof must be the lone `sorry`: nothing else may follow on its line.
    if (k + 1 < toks.size() && toks[k + 1].line == toks[k].line && !toks[k + 1].is_close_bracket()) continue;
    out.push_back(UnprovenHave{std::string(toks[i + 1].text), have.offset,
                               codepoint_column(code, have.offset), toks[*assign].end(), toks[k].end()});
  }
  return out;
}

std::string replace_subgoal(std::string_view sketch, std::string_view name, std::string_view proof_body) {
  auto haves = find_unproven_haves(sketch);
  std::vector<UnprovenHave> matches;
  for (auto& h : haves) {
    if (h.name == name) matches.push_back(h);
  }
  if (matches.empty()) {
    throw SourceError(SourceError::Kind::SubgoalNotFound, "no unproven have named `" + std::string(name) + "`");
  }
  if (matches.size() > 1) {
    throw SourceError(SourceError::Kind::AmbiguousSubgoal,
                      "unproven have `" + std::string(name) + "` occurs " + std::to_string(matches.size()) + " times");
  }
  const auto& h = matches.front();
  std::string indent(h.have_column + 2, ' ');
  auto lines = dedent(split_lines(proof_body));
  std::string replacement = " by";
  for (const auto& l : lines) {
    replacement += "\n";
    if (!l.empty()) replacement += indent + l;
  }
  std::string out(sketch.substr(0, h.assign_end));
  out += replacement;
  out += sketch.substr(h.sorry_end);
  return out;
}

std::string extract_code_block(std::string_view response) {
  std::optional<std::string_view> last;
  std::size_t p = 0;
  while (true) {
    std::size_t open = response.find("```", p);
    if (open == std::string_view::npos) break;
    std::size_t eol = response.find('\n', open);
    if (eol == std::string_view::npos) break;
    std::string_view tag = trim(response.substr(open + 3, eol - open - 3));
    std::size_t close = response.find("```", eol + 1);
    std::size_t content_end = close == std::string_view::npos ? response.size() : close;
    if (tag == "lean4" || tag == "lean") last = response.substr(eol + 1, content_end - eol - 1);
    if (close == std::string_view::npos) break;
    p = close + 3;
  }
  if (!last) throw SourceError(SourceError::Kind::NoCodeBlock, "response contains no ```lean4 code block");
  auto lines = split_lines(rtrim(*last));
  while (!lines.empty() && trim(lines.front()).empty()) lines.erase(lines.begin());
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += "\n";
    out += lines[i];
  }
  return out;
}

std::size_t count_sorries(std::string_view code) {
  auto toks = tokenize(code);
  return static_cast<std::size_t>(
      std::count_if(toks.begin(), toks.end(), [](const Token& t) { return t.is("sorry"); }));
}

std::string declaration_header(std::string_view body) {
  auto toks = tokenize(body);
  auto decl = locate_declaration(toks);
  if (!decl) return {};
  std::size_t stop = decl->assign.value_or(toks.size());
  std::string out;
  for (std::size_t i = decl->keyword; i < stop; ++i) {
    if (!out.empty()) out += ' ';
    out += toks[i].text;
  }
  return out;
}

std::string statement_with_sorry(std::string_view body) {
  auto toks = tokenize(body);
  auto decl = locate_declaration(toks);
  if (!decl) throw SourceError(SourceError::Kind::NoDeclaration, "no declaration found");
  std::size_t start = line_start(body, toks[decl->keyword].offset);
  std::string_view head =
      decl->assign ? body.substr(start, toks[*decl->assign].offset - start) : body.substr(start);
  // Keep leading doc comments / attributes that precede the keyword line.
  std::string prefix(rtrim(body.substr(0, start)));
  std::string out = prefix.empty() ? "" : prefix + "\n";
  out += std::string(rtrim(head)) + " := by\n  sorry";
  return out;
}

std::string declaration_name(std::string_view body) {
  auto toks = tokenize(body);
  auto decl = locate_declaration(toks);
  if (!decl || decl->keyword + 1 >= toks.size()) return {};
  const Token& t = toks[decl->keyword + 1];
  return t.kind == TokenKind::Identifier ? std::string(t.text) : std::string();
}

}  // namespace sketchprove::lean
