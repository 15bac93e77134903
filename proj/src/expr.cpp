#include "birkhoff/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "birkhoff/error.hpp"

namespace birkhoff {

struct Expression::Node {
  enum class Kind { constant, variable, negate, add, sub, mul, div, pow, call };
  Kind kind = Kind::constant;
  double value = 0.0;
  std::string function;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

[[noreturn]] void fail(std::string_view text, std::size_t pos,
                       const std::string& what) {
  throw Error(ErrorCode::ParseError, "cli", "parse_expression",
              what + " at offset " + std::to_string(pos) + " in '" +
                  std::string(text) + "'");
}

NodePtr make(Kind kind, std::vector<NodePtr> args = {}, double value = 0.0,
             std::string function = {}) {
  auto node = std::make_shared<Expression::Node>();
  node->kind = kind;
  node->value = value;
  node->function = std::move(function);
  node->args = std::move(args);
  return node;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse_all(bool& uses_x) {
    NodePtr root = expression();
    skip();
    if (pos_ != text_.size()) fail(text_, pos_, "unexpected character");
    uses_x = uses_x_;
    return root;
  }

 private:
  void skip() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expression() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make(Kind::add, {lhs, term()});
      else if (accept('-'))
        lhs = make(Kind::sub, {lhs, term()});
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make(Kind::mul, {lhs, unary()});
      else if (accept('/'))
        lhs = make(Kind::div, {lhs, unary()});
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Kind::negate, {unary()});
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Kind::pow, {base, unary()});
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= text_.size()) fail(text_, pos_, "unexpected end");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = expression();
      if (!accept(')')) fail(text_, pos_, "expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::string buf(text_.substr(pos_));
      char* end = nullptr;
      double v = std::strtod(buf.c_str(), &end);
      if (end == buf.c_str()) fail(text_, pos_, "bad number");
      pos_ += static_cast<std::size_t>(end - buf.c_str());
      return make(Kind::constant, {}, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_'))
        ++pos_;
      std::string name(text_.substr(start, pos_ - start));
      if (accept('(')) {
        std::vector<NodePtr> args;
        if (!accept(')')) {
          do {
            args.push_back(expression());
          } while (accept(','));
          if (!accept(')')) fail(text_, pos_, "expected ')'");
        }
        check_call(name, args.size(), start);
        return make(Kind::call, std::move(args), 0.0, name);
      }
      if (name == "x") {
        uses_x_ = true;
        return make(Kind::variable);
      }
      if (name == "pi") return make(Kind::constant, {}, std::numbers::pi);
      if (name == "e") return make(Kind::constant, {}, std::numbers::e);
      if (name == "inf") return make(Kind::constant, {}, INFINITY);
      fail(text_, start, "unknown identifier '" + name + "'");
    }
    fail(text_, pos_, "unexpected character");
  }

  void check_call(const std::string& name, std::size_t arity,
                  std::size_t at) const {
    static const std::vector<std::string> unary = {
        "log", "ln", "log2", "log10", "exp", "sqrt",
        "abs", "sin", "cos",  "tan",   "floor"};
    for (const auto& u : unary)
      if (u == name) {
        if (arity != 1) fail(text_, at, name + " takes one argument");
        return;
      }
    if (name == "pow" || name == "min" || name == "max") {
      if (arity != 2) fail(text_, at, name + " takes two arguments");
      return;
    }
    fail(text_, at, "unknown function '" + name + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  bool uses_x_ = false;
};

double eval(const Expression::Node& n, double x) {
  switch (n.kind) {
    case Kind::constant: return n.value;
    case Kind::variable: return x;
    case Kind::negate: return -eval(*n.args[0], x);
    case Kind::add: return eval(*n.args[0], x) + eval(*n.args[1], x);
    case Kind::sub: return eval(*n.args[0], x) - eval(*n.args[1], x);
    case Kind::mul: return eval(*n.args[0], x) * eval(*n.args[1], x);
    case Kind::div: return eval(*n.args[0], x) / eval(*n.args[1], x);
    case Kind::pow: return std::pow(eval(*n.args[0], x), eval(*n.args[1], x));
    case Kind::call: break;
  }
  const std::string& f = n.function;
  double a = eval(*n.args[0], x);
  if (f == "log" || f == "ln") return std::log(a);
  if (f == "log2") return std::log2(a);
  if (f == "log10") return std::log10(a);
  if (f == "exp") return std::exp(a);
  if (f == "sqrt") return std::sqrt(a);
  if (f == "abs") return std::fabs(a);
  if (f == "sin") return std::sin(a);
  if (f == "cos") return std::cos(a);
  if (f == "tan") return std::tan(a);
  if (f == "floor") return std::floor(a);
  double b = eval(*n.args[1], x);
  if (f == "pow") return std::pow(a, b);
  if (f == "min") return std::fmin(a, b);
  return std::fmax(a, b);
}

}  // namespace

Expression Expression::parse(std::string_view text) {
  Expression e;
  Parser p(text);
  e.root_ = p.parse_all(e.uses_x_);
  e.text_ = std::string(text);
  return e;
}

double Expression::operator()(double x) const { return eval(*root_, x); }

double evaluate_number(std::string_view text) {
  Expression e = Expression::parse(text);
  if (e.depends_on_x())
    throw Error(ErrorCode::ParseError, "cli", "evaluate_number",
                "constant expected, found x in '" + std::string(text) + "'");
  return e(0.0);
}

}  // namespace birkhoff
