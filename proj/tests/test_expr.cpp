#include <cmath>

#include "birkhoff/error.hpp"
#include "birkhoff/expr.hpp"
#include "doctest.h"

using namespace birkhoff;

TEST_CASE("constant expressions evaluate at parse time") {
  CHECK(evaluate_number("1/3") == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(evaluate_number("log(2)") == std::log(2.0));
  CHECK(evaluate_number("-2^2") == -4.0);
  CHECK(evaluate_number("2^3^2") == 512.0);  // right associative
  CHECK(evaluate_number("(1+2)*3 - 4/2") == 7.0);
  CHECK(evaluate_number("1e-6") == 1e-6);
  CHECK(evaluate_number("max(1, pow(2, 3))") == 8.0);
  CHECK(evaluate_number("log2(8) + log10(100)") == doctest::Approx(5.0));
  CHECK(std::isinf(evaluate_number("-inf")));
}

TEST_CASE("expressions of x") {
  Expression e = Expression::parse("0.3 + 0.5*sin(2*pi*x)");
  CHECK(e.depends_on_x());
  CHECK(e(0.0) == doctest::Approx(0.3));
  CHECK(e(0.25) == doctest::Approx(0.8));
  Expression mp = Expression::parse("x + x^(3/2)");
  CHECK(mp(0.25) == doctest::Approx(0.375));
  CHECK_FALSE(Expression::parse("exp(1)").depends_on_x());
}

TEST_CASE("malformed expressions are parse errors") {
  for (const char* bad : {"", "2+", "(1", "foo(2)", "1 2", "log()", "x)"}) {
    CAPTURE(bad);
    try {
      (void)Expression::parse(bad);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      CHECK(std::string(e.module()) == "cli");
    }
  }
  CHECK_THROWS_AS(evaluate_number("2*x"), Error);
}
