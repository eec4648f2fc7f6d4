#pragma once

#include <string_view>
#include <vector>

namespace cdlgen::detail {

enum class TokenKind { identifier, number, string, symbol, end };

struct Token {
  TokenKind kind = TokenKind::end;
  std::string_view text;  // raw slice; strings keep their quotes
  std::size_t offset = 0;
  std::size_t end = 0;
  int line = 1;
  int column = 1;
  bool space_before = false;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool is_symbol(std::string_view t) const { return is(TokenKind::symbol, t); }
  bool is_word(std::string_view t) const { return is(TokenKind::identifier, t); }
};

// Tokenises Modelica source. Comments are dropped; the final token is
// always TokenKind::end. Throws SyntaxError on stray characters.
std::vector<Token> tokenize(std::string_view source);

}  // namespace cdlgen::detail
