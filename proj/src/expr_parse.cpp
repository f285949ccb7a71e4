// Recursive-descent parser for the expression grammar:
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | power
//   power  := atom ('^' factor)?
//   atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//
// '^' is right-associative; unary minus binds looser than '^'.  A '-'
// directly in front of a bare numeric literal folds into a negative
// constant (unless the literal is the base of a '^'), so rendered negative
// constants parse back to themselves.

#include "varmin/expr.hpp"

#include <cctype>
#include <cstdlib>
#include <string>
#include <vector>

namespace varmin::exprkit {

namespace {

struct Token {
  enum Type { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };
  Type type;
  double number = 0.0;
  std::string text;
  std::size_t offset = 0;
};

[[noreturn]] void fail(const std::string& what, std::size_t offset) {
  throw ParseError("syntax error at offset " + std::to_string(offset) + ": " + what,
                   offset);
}

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.offset = i;
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j < src.size() && src[j] == '.') {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      // exponent part only if followed by digits (with optional sign)
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          ++k;
          while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
          j = k;
        }
      }
      t.type = Token::Number;
      t.text = std::string(src.substr(i, j - i));
      t.number = std::strtod(t.text.c_str(), nullptr);
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      t.type = Token::Ident;
      t.text = std::string(src.substr(i, j - i));
      i = j;
    } else {
      switch (c) {
        case '+': t.type = Token::Plus; break;
        case '-': t.type = Token::Minus; break;
        case '*': t.type = Token::Star; break;
        case '/': t.type = Token::Slash; break;
        case '^': t.type = Token::Caret; break;
        case '(': t.type = Token::LParen; break;
        case ')': t.type = Token::RParen; break;
        default:
          fail(std::string("unexpected character '") + c + "'", i);
      }
      ++i;
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.type = Token::End;
  end.offset = src.size();
  out.push_back(end);
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, const std::set<std::string>& params)
      : toks_(std::move(toks)), params_(params) {}

  Expr run() {
    Expr e = parse_expr();
    if (peek().type != Token::End) fail("unexpected trailing input", peek().offset);
    return e;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& advance() { return toks_[pos_++]; }
  bool accept(Token::Type t) {
    if (peek().type != t) return false;
    ++pos_;
    return true;
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (accept(Token::Plus)) e = e + parse_term();
      else if (accept(Token::Minus)) e = e - parse_term();
      else return e;
    }
  }

  Expr parse_term() {
    Expr e = parse_factor();
    for (;;) {
      if (accept(Token::Star)) e = e * parse_factor();
      else if (accept(Token::Slash)) e = e / parse_factor();
      else return e;
    }
  }

  Expr parse_factor() {
    if (accept(Token::Minus)) {
      // fold '-literal' unless the literal is the base of a '^' (where the
      // minus applies to the whole power: -4^2 = -(4^2))
      if (peek().type == Token::Number && peek(1).type != Token::Caret) {
        double v = advance().number;
        return Expr(-v);
      }
      return -parse_factor();
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    if (accept(Token::Caret)) return pow(std::move(base), parse_factor());
    return base;
  }

  Expr parse_atom() {
    const Token& t = peek();
    switch (t.type) {
      case Token::Number:
        advance();
        return Expr(t.number);
      case Token::Ident: {
        advance();
        const std::string& name = t.text;
        // resolution order: variable, declared parameter, then function name
        // at call position
        if (name == "x") return Expr::variable(Var::X);
        if (name == "y") return Expr::variable(Var::Y);
        if (name == "yp") return Expr::variable(Var::Yp);
        if (params_.count(name)) return Expr::parameter(name);
        if (peek().type == Token::LParen) {
          if (!is_known_function(name)) fail("unknown function \"" + name + "\"", t.offset);
          advance();  // '('
          Expr arg = parse_expr();
          if (!accept(Token::RParen)) fail("expected ')'", peek().offset);
          return Expr::call(name, std::move(arg));
        }
        if (is_known_function(name))
          fail("expected '(' after function name \"" + name + "\"", peek().offset);
        fail("unknown identifier \"" + name +
                 "\" (not x/y/yp and not a declared parameter)",
             t.offset);
      }
      case Token::LParen: {
        advance();
        Expr e = parse_expr();
        if (!accept(Token::RParen)) fail("expected ')'", peek().offset);
        return e;
      }
      case Token::End:
        fail("unexpected end of input", t.offset);
      default:
        fail("unexpected token", t.offset);
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const std::set<std::string>& params_;
};

}  // namespace

Expr parse(std::string_view source, const std::set<std::string>& parameters) {
  return Parser(tokenize(source), parameters).run();
}

}  // namespace varmin::exprkit
