#include "lexer.hpp"

#include <cctype>

#include "cdlgen/error.hpp"

namespace cdlgen::detail {

namespace {

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      bool space = skip_trivia();
      Token tok;
      tok.offset = pos_;
      tok.line = line_;
      tok.column = column();
      tok.space_before = space;
      if (pos_ >= src_.size()) {
        tok.kind = TokenKind::end;
        tok.end = pos_;
        out.push_back(tok);
        return out;
      }
      char c = src_[pos_];
      if (ident_start(c)) {
        while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
        tok.kind = TokenKind::identifier;
      } else if (digit(c) || (c == '.' && pos_ + 1 < src_.size() && digit(src_[pos_ + 1]))) {
        lex_number();
        tok.kind = TokenKind::number;
      } else if (c == '"') {
        lex_string(tok);
        tok.kind = TokenKind::string;
      } else if (c == '\'') {
        // quoted identifier
        ++pos_;
        while (pos_ < src_.size() && src_[pos_] != '\'') advance_char();
        if (pos_ >= src_.size())
          throw SyntaxError(tok.line, tok.column, "unterminated quoted identifier");
        ++pos_;
        tok.kind = TokenKind::identifier;
      } else {
        lex_symbol(tok);
        tok.kind = TokenKind::symbol;
      }
      tok.end = pos_;
      tok.text = src_.substr(tok.offset, tok.end - tok.offset);
      out.push_back(tok);
    }
  }

 private:
  int column() const { return static_cast<int>(pos_ - line_start_) + 1; }

  void advance_char() {
    if (src_[pos_] == '\n') {
      ++line_;
      line_start_ = pos_ + 1;
    }
    ++pos_;
  }

  bool skip_trivia() {
    bool skipped = false;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v') {
        advance_char();
        skipped = true;
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        skipped = true;
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        int line = line_, col = column();
        pos_ += 2;
        while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/'))
          advance_char();
        if (pos_ + 1 >= src_.size()) throw SyntaxError(line, col, "unterminated comment");
        pos_ += 2;
        skipped = true;
      } else {
        break;
      }
    }
    return skipped;
  }

  void lex_number() {
    while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && digit(src_[pos_])) {
        while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
      } else {
        pos_ = save;
      }
    }
  }

  void lex_string(const Token& tok) {
    ++pos_;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) ++pos_;
      advance_char();
    }
    if (pos_ >= src_.size()) throw SyntaxError(tok.line, tok.column, "unterminated string");
    ++pos_;
  }

  void lex_symbol(const Token& tok) {
    static constexpr std::string_view two[] = {"==", "<>", "<=", ">=", ":=", ".+", ".-", ".*", "./", ".^"};
    for (auto t : two) {
      if (src_.substr(pos_, 2) == t) {
        pos_ += 2;
        return;
      }
    }
    static constexpr std::string_view single = "(){}[];,.=<>+-*/^:";
    char c = src_[pos_];
    if (single.find(c) == std::string_view::npos) {
      auto uc = static_cast<unsigned char>(c);
      std::string shown = uc >= 0x80 ? "non-ASCII byte" : std::string("'") + c + "'";
      throw SyntaxError(tok.line, tok.column, "unexpected character " + shown);
    }
    ++pos_;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::size_t line_start_ = 0;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace cdlgen::detail
