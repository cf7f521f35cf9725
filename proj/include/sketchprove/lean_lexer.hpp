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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace sketchprove::lean {

enum class TokenKind {
  Identifier,
  Number,
  String,
  Char,
  Symbol,
};

/// A lexeme of Lean 4 source. Comments and whitespace never produce tokens.
struct Token {
  TokenKind kind;
  std::string_view text;
  std::size_t offset = 0;  // byte offset into the scanned source
  std::size_t line = 1;    // 1-based
  std::size_t column = 0;  // 0-based byte column within the line

  std::size_t end() const { return offset + text.size(); }
  bool is(std::string_view s) const { return text == s; }
  bool is_open_bracket() const;
  bool is_close_bracket() const;
};

/// Lightweight Lean 4 tokenizer. It understands enough of the surface syntax
/// (nested block comments, line comments, string and char literals, unicode
/// identifiers with subscripts, `«escaped»` names) to locate keywords and
/// bracket structure reliably. It is not a parser.
std::vector<Token> tokenize(std::string_view source);

/// Returns true if the byte range [offset, offset+len) lies inside a comment
/// or string literal of `source`.
bool in_comment_or_string(std::string_view source, std::size_t offset);

bool is_identifier(std::string_view text);

/// Start-of-line byte offset for the line containing `offset`.
std::size_t line_start(std::string_view source, std::size_t offset);

/// Number of leading spaces on the line containing `offset` (tabs count as one).
std::size_t indentation_at(std::string_view source, std::size_t offset);

/// Codepoint column of `offset` within its line.
std::size_t codepoint_column(std::string_view source, std::size_t offset);

/// Converts a codepoint column on a given 1-based line into a byte offset.
/// Columns past the end of the line clamp to the line end.
std::size_t offset_of(std::string_view source, std::size_t line, std::size_t codepoint_column);

}  // namespace sketchprove::lean
