#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace birkhoff {

// A parsed arithmetic expression in one free variable `x`.
//
// Grammar: numbers, `x`, the constants `pi` and `e`, the operators
// `+ - * / ^` (right-associative power), parentheses, and the functions
// log/ln, log2, log10, exp, sqrt, abs, sin, cos, tan, pow, min, max.
class Expression {
 public:
  struct Node;

  static Expression parse(std::string_view text);

  double operator()(double x) const;
  const std::string& text() const noexcept { return text_; }
  bool depends_on_x() const noexcept { return uses_x_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
  bool uses_x_ = false;
};

// Evaluates a constant expression such as "log(2)" or "1/3".
double evaluate_number(std::string_view text);

}  // namespace birkhoff
