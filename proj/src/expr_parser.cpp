#include "bitup/expr_parser.hpp"

#include <cctype>
#include <vector>

#include "bitup/error.hpp"

namespace bitup {
namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  QueryExpr parse() {
    QueryExpr e = parse_or();
    skip_space();
    if (pos_ < text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(0, pos_, "column " + std::to_string(pos_ + 1) + ": " + message);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      fail(pos_ < text_.size() ? "expected '" + std::string(1, c) + "'"
                               : "expected '" + std::string(1, c) + "' at end of input");
    }
  }

  static bool is_special(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '&' || c == '|' || c == '^' ||
           c == '(' || c == ')' || c == '=' || c == '{' || c == '}' || c == ',' || c == '"';
  }

  std::string word(const char* what) {
    skip_space();
    if (pos_ >= text_.size()) fail(std::string("expected ") + what + " at end of input");
    if (text_[pos_] == '"') {
      ++pos_;
      std::string out;
      while (true) {
        if (pos_ >= text_.size()) fail("unterminated quoted string");
        char c = text_[pos_++];
        if (c == '"') break;
        if (c == '\\') {
          if (pos_ >= text_.size()) fail("dangling escape");
          c = text_[pos_++];
        }
        out.push_back(c);
      }
      if (out.empty()) fail(std::string("empty ") + what);
      return out;
    }
    if (is_special(text_[pos_]) || text_[pos_] == '-') fail(std::string("expected ") + what);
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_special(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  QueryExpr parse_primary() {
    if (accept('(')) {
      QueryExpr e = parse_or();
      expect(')');
      return e;
    }
    std::string label = word("label");
    expect('=');
    if (accept('{')) {
      std::vector<std::string> values{word("value")};
      while (accept(',')) values.push_back(word("value"));
      expect('}');
      return QueryExpr::any_value(label, values);
    }
    return QueryExpr::predicate(std::move(label), word("value"));
  }

  QueryExpr parse_and() {
    std::vector<QueryExpr> terms{parse_primary()};
    while (accept('&')) terms.push_back(parse_primary());
    return terms.size() == 1 ? std::move(terms[0]) : QueryExpr::all_of(std::move(terms));
  }

  QueryExpr parse_diff() {
    QueryExpr e = parse_and();
    while (accept('-')) e = QueryExpr::and_not(std::move(e), parse_and());
    return e;
  }

  QueryExpr parse_xor() {
    QueryExpr e = parse_diff();
    while (accept('^')) e = QueryExpr::exclusive_or(std::move(e), parse_diff());
    return e;
  }

  QueryExpr parse_or() {
    std::vector<QueryExpr> terms{parse_xor()};
    while (accept('|')) terms.push_back(parse_xor());
    return terms.size() == 1 ? std::move(terms[0]) : QueryExpr::any_of(std::move(terms));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

QueryExpr parse_expr(std::string_view text) { return Parser(text).parse(); }

std::string caret_diagnostic(std::string_view text, std::size_t column) {
  std::string out(text);
  out += "\n";
  out += std::string(std::min(column, text.size()), ' ');
  out += "^";
  return out;
}

}  // namespace bitup
