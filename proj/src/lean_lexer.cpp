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

#include "sketchprove/lean_lexer.hpp"

#include <cctype>
#include <cstdint>

namespace sketchprove::lean {

namespace {

struct Decoded {
  char32_t cp;
  std::size_t len;
};

Decoded decode(std::string_view s, std::size_t i) {
  auto b = static_cast<unsigned char>(s[i]);
  if (b < 0x80) return {b, 1};
  std::size_t len = (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 1;
  if (i + len > s.size()) return {b, 1};
  char32_t cp = len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
  for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  return {cp, len};
}

// Mirrors Lean's `isLetterLike`.
bool letter_like(char32_t c) {
  return (0x3b1 <= c && c <= 0x3c9 && c != 0x3bb) ||
         (0x391 <= c && c <= 0x3A9 && c != 0x3A0 && c != 0x3A3) ||
         (0x3ca <= c && c <= 0x3fb) || (0x1f00 <= c && c <= 0x1ffe) ||
         (0x2100 <= c && c <= 0x214f) || (0x1d49c <= c && c <= 0x1d59f);
}

bool subscript(char32_t c) {
  return (0x2080 <= c && c <= 0x2089) || (0x2090 <= c && c <= 0x209c) || (0x1d62 <= c && c <= 0x1d6a);
}

bool ident_start(char32_t c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || letter_like(c);
}

bool ident_rest(char32_t c) {
  return ident_start(c) || (c >= '0' && c <= '9') || c == '\'' || c == '!' || c == '?' || subscript(c);
}

bool digit(char c) { return c >= '0' && c <= '9'; }

class Scanner {
 public:
  explicit Scanner(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        line_begin_ = ++pos_;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
        continue;
      }
      if (starts_with("--")) {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        continue;
      }
      if (starts_with("/-")) {
        skip_block_comment();
        continue;
      }
      std::size_t start = pos_;
      std::size_t start_line = line_;
      std::size_t start_col = pos_ - line_begin_;
      TokenKind kind = scan_token();
      out.push_back(Token{kind, src_.substr(start, pos_ - start), start, start_line, start_col});
    }
    return out;
  }

  // Walks until `target` and reports whether it was consumed inside a comment
  // or literal.
  bool covered(std::size_t target) {
    while (pos_ < src_.size()) {
      if (pos_ > target) return false;
      char c = src_[pos_];
      if (starts_with("--")) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        if (target >= start && target < pos_) return true;
        continue;
      }
      if (starts_with("/-")) {
        std::size_t start = pos_;
        skip_block_comment();
        if (target >= start && target < pos_) return true;
        continue;
      }
      if (c == '"') {
        std::size_t start = pos_;
        scan_string();
        if (target >= start && target < pos_) return true;
        continue;
      }
      if (c == '\n') {
        ++line_;
        line_begin_ = ++pos_;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
        continue;
      }
      scan_token();
    }
    return false;
  }

 private:
  bool starts_with(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  void advance_tracking(std::size_t n) {
    for (std::size_t k = 0; k < n && pos_ < src_.size(); ++k) {
      if (src_[pos_] == '\n') {
        ++line_;
        line_begin_ = pos_ + 1;
      }
      ++pos_;
    }
  }

  void skip_block_comment() {
    int depth = 0;
    while (pos_ < src_.size()) {
      if (starts_with("/-")) {
        ++depth;
        pos_ += 2;
      } else if (starts_with("-/")) {
        pos_ += 2;
        if (--depth == 0) return;
      } else {
        advance_tracking(1);
      }
    }
  }

  void scan_string() {
    ++pos_;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      if (src_[pos_] == '\\') advance_tracking(1);
      advance_tracking(1);
    }
    if (pos_ < src_.size()) ++pos_;
  }

  TokenKind scan_token() {
    char c = src_[pos_];
    if (c == '"') {
      scan_string();
      return TokenKind::String;
    }
    if (c == '\'' ) {
      // 'x' or '\n' char literal; otherwise a lone quote symbol.
      if (pos_ + 2 < src_.size() && src_[pos_ + 1] == '\\') {
        std::size_t close = src_.find('\'', pos_ + 2);
        if (close != std::string_view::npos && close - pos_ <= 8) {
          pos_ = close + 1;
          return TokenKind::Char;
        }
      } else if (pos_ + 1 < src_.size()) {
        auto d = decode(src_, pos_ + 1);
        if (pos_ + 1 + d.len < src_.size() && src_[pos_ + 1 + d.len] == '\'') {
          pos_ += 2 + d.len;
          return TokenKind::Char;
        }
      }
      ++pos_;
      return TokenKind::Symbol;
    }
    if (digit(c)) {
      while (pos_ < src_.size() && (digit(src_[pos_]) || src_[pos_] == '_' ||
                                    std::isalpha(static_cast<unsigned char>(src_[pos_]))))
        ++pos_;
      if (pos_ + 1 < src_.size() && src_[pos_] == '.' && digit(src_[pos_ + 1])) {
        ++pos_;
        while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
      }
      return TokenKind::Number;
    }
    if (starts_with(":=")) {
      pos_ += 2;
      return TokenKind::Symbol;
    }
    if (scan_identifier()) return TokenKind::Identifier;
    auto d = decode(src_, pos_);
    pos_ += d.len;
    return TokenKind::Symbol;
  }

  bool scan_identifier_part() {
    if (starts_with("«")) {
      std::size_t close = src_.find("»", pos_);
      if (close == std::string_view::npos) return false;
      pos_ = close + std::string_view("»").size();
      return true;
    }
    auto d = decode(src_, pos_);
    if (!ident_start(d.cp)) return false;
    pos_ += d.len;
    while (pos_ < src_.size()) {
      auto n = decode(src_, pos_);
      if (!ident_rest(n.cp)) break;
      pos_ += n.len;
    }
    return true;
  }

  bool scan_identifier() {
    if (!scan_identifier_part()) return false;
    // Dotted names: `Nat.Prime`, `h.1` style projections stay attached.
    while (pos_ + 1 < src_.size() && src_[pos_] == '.') {
      std::size_t save = pos_;
      ++pos_;
      if (digit(src_[pos_])) {
        while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
        continue;
      }
      if (!scan_identifier_part()) {
        pos_ = save;
        break;
      }
    }
    return true;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t line_begin_ = 0;
};

}  // namespace

bool Token::is_open_bracket() const {
  return text == "(" || text == "[" || text == "{" || text == "⟨" || text == "⦃";
}

bool Token::is_close_bracket() const {
  return text == ")" || text == "]" || text == "}" || text == "⟩" || text == "⦄";
}

std::vector<Token> tokenize(std::string_view source) { return Scanner(source).run(); }

bool in_comment_or_string(std::string_view source, std::size_t offset) {
  return Scanner(source).covered(offset);
}

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  auto toks = tokenize(text);
  return toks.size() == 1 && toks.front().kind == TokenKind::Identifier && toks.front().text == text;
}

std::size_t line_start(std::string_view source, std::size_t offset) {
  if (offset > source.size()) offset = source.size();
  std::size_t p = source.rfind('\n', offset == 0 ? 0 : offset - 1);
  if (offset == 0 || p == std::string_view::npos) return 0;
  return p + 1;
}

std::size_t indentation_at(std::string_view source, std::size_t offset) {
  std::size_t p = line_start(source, offset);
  std::size_t n = 0;
  while (p + n < source.size() && (source[p + n] == ' ' || source[p + n] == '\t')) ++n;
  return n;
}

std::size_t codepoint_column(std::string_view source, std::size_t offset) {
  std::size_t p = line_start(source, offset);
  std::size_t col = 0;
  while (p < offset && p < source.size()) {
    p += decode(source, p).len;
    ++col;
  }
  return col;
}

std::size_t offset_of(std::string_view source, std::size_t line, std::size_t codepoint_column) {
  std::size_t p = 0;
  for (std::size_t l = 1; l < line; ++l) {
    std::size_t nl = source.find('\n', p);
    if (nl == std::string_view::npos) return source.size();
    p = nl + 1;
  }
  for (std::size_t c = 0; c < codepoint_column; ++c) {
    if (p >= source.size() || source[p] == '\n') break;
    p += decode(source, p).len;
  }
  return p;
}

}  // namespace sketchprove::lean
