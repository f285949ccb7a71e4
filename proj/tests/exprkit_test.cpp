#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "varmin/expr.hpp"

using namespace varmin::exprkit;

namespace {

const std::set<std::string> kAB = {"a", "b"};

// Grammar-directed random expression builder.  `smooth` excludes abs/sign
// (kinked) so finite-difference checks stay meaningful.
Expr random_expr(std::mt19937& rng, int depth, bool smooth) {
  std::uniform_real_distribution<double> uc(-2.0, 2.0);
  std::uniform_int_distribution<int> leaf(0, 5);
  if (depth <= 0) {
    switch (leaf(rng)) {
      case 0: return Expr(uc(rng));
      case 1: return Expr::variable(Var::X);
      case 2: return Expr::variable(Var::Y);
      case 3: return Expr::variable(Var::Yp);
      case 4: return Expr::parameter("a");
      default: return Expr::parameter("b");
    }
  }
  std::uniform_int_distribution<int> pick(0, 9);
  auto sub = [&] { return random_expr(rng, depth - 1, smooth); };
  switch (pick(rng)) {
    case 0: return sub() + sub();
    case 1: return sub() - sub();
    case 2: return sub() * sub();
    case 3: return sub() / sub();
    case 4: return -sub();
    case 5: {
      std::uniform_int_distribution<int> ex(-2, 3);
      return pow(sub(), Expr(static_cast<double>(ex(rng))));
    }
    case 6: return pow(sub(), Expr(0.5));
    default: {
      static const std::vector<std::string> fs_smooth = {
          "sin", "cos", "tan", "sec", "exp", "log", "sqrt",
          "sinh", "cosh", "tanh", "asinh", "atan"};
      static const std::vector<std::string> fs_all = {
          "sin", "cos", "tan", "sec", "exp", "log", "sqrt",
          "sinh", "cosh", "tanh", "asinh", "atan", "abs", "sign"};
      const auto& fs = smooth ? fs_smooth : fs_all;
      std::uniform_int_distribution<std::size_t> fi(0, fs.size() - 1);
      return Expr::call(fs[fi(rng)], sub());
    }
  }
}

struct Point {
  double x, y, yp;
  ParamBindings params;
};

Point random_point(std::mt19937& rng) {
  std::uniform_real_distribution<double> uv(-1.5, 1.5);
  std::uniform_real_distribution<double> up(0.5, 2.0);
  return {uv(rng), uv(rng), uv(rng), {{"a", up(rng)}, {"b", up(rng)}}};
}

}  // namespace

TEST_CASE("parse: shapes forced by the grammar") {
  Expr e = parse("yp^2/2 - y");
  // '-' at the root, '/' below it, '^' at the bottom (right-associative)
  REQUIRE(e.kind() == Expr::Kind::Sub);
  REQUIRE(e.child(0).kind() == Expr::Kind::Div);
  REQUIRE(e.child(0).child(0).kind() == Expr::Kind::Pow);
  CHECK(e.child(0).child(0).child(0).var() == Var::Yp);
  CHECK(e.child(0).child(0).child(1).is_constant(2.0));
  CHECK(e.child(0).child(1).is_constant(2.0));
  CHECK(e.child(1).var() == Var::Y);

  // right associativity of ^
  Expr p = parse("x^2^3");
  REQUIRE(p.kind() == Expr::Kind::Pow);
  CHECK(p.child(0).var() == Var::X);
  REQUIRE(p.child(1).kind() == Expr::Kind::Pow);
  CHECK(p.child(1).child(0).is_constant(2.0));
  CHECK(p.child(1).child(1).is_constant(3.0));

  // unary minus binds looser than ^
  Expr m = parse("-x^2");
  REQUIRE(m.kind() == Expr::Kind::Negate);
  CHECK(m.child(0).kind() == Expr::Kind::Pow);
}

TEST_CASE("parse: parameters and calls") {
  Expr e = parse("0.5*exp(beta*x)*(yp^2 - omega0^2*y^2)", {"beta", "omega0"});
  REQUIRE(e.kind() == Expr::Kind::Mul);
  // left-assoc product: (0.5*exp(..)) * (...)
  REQUIRE(e.child(0).kind() == Expr::Kind::Mul);
  CHECK(e.child(0).child(0).is_constant(0.5));
  REQUIRE(e.child(0).child(1).kind() == Expr::Kind::Call);
  CHECK(e.child(0).child(1).name() == "exp");
  CHECK(e.child(0).child(1).child(0).child(0).name() == "beta");
  CHECK(eval(e, 0.0, 1.0, 2.0, {{"beta", 0.3}, {"omega0", 2.0}}) ==
        doctest::Approx(0.5 * (4.0 - 4.0 * 1.0)).epsilon(1e-15));
}

TEST_CASE("parse: errors carry byte offsets") {
  try {
    parse("sin(x");
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.offset() == 5);
  }

  CHECK_THROWS_AS(parse("x + foo"), ParseError);
  try {
    parse("x + foo");
  } catch (const ParseError& err) {
    CHECK(err.offset() == 4);  // start of the unknown identifier
  }
  CHECK_THROWS_AS(parse("x $ y"), ParseError);
  CHECK_THROWS_AS(parse("foo(x)"), ParseError);   // unknown function
  CHECK_THROWS_AS(parse("beta*x"), ParseError);   // parameter not declared
  CHECK_THROWS_AS(parse("(x+1"), ParseError);
  CHECK_THROWS_AS(parse("x+"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("x 3"), ParseError);      // trailing input
}

TEST_CASE("eval: direct arithmetic") {
  CHECK(eval(parse("x^2*(yp^2/2 - y)"), 2.0, 1.0, 0.0) == -4.0);
  CHECK(eval(parse("exp(x/2)"), 0.0, 0.0, 0.0) == 1.0);
  // value of the polytrope closed-form solution at x=1
  CHECK(eval(parse("sqrt(3)/sqrt(3+x^2)"), 1.0, 0.0, 0.0) ==
        doctest::Approx(0.8660254037844386).epsilon(1e-12));
}

TEST_CASE("eval: domain violations name the subexpression") {
  CHECK_THROWS_AS(eval(parse("1/x"), 0.0, 0.0, 0.0), EvalError);
  CHECK_THROWS_AS(eval(parse("log(x)"), -1.0, 0.0, 0.0), EvalError);
  CHECK_THROWS_AS(eval(parse("log(x)"), 0.0, 0.0, 0.0), EvalError);
  CHECK_THROWS_AS(eval(parse("sqrt(y)"), 0.0, -2.0, 0.0), EvalError);
  CHECK_THROWS_AS(eval(parse("x^0.5"), -1.0, 0.0, 0.0), EvalError);
  CHECK_THROWS_AS(eval(parse("x^(-1)"), 0.0, 0.0, 0.0), EvalError);
  CHECK_THROWS_AS(eval(parse("exp(x)"), 1000.0, 0.0, 0.0), EvalError);  // overflow
  CHECK_THROWS_AS(eval(Expr::parameter("mu"), 0.0, 0.0, 0.0), EvalError);
  try {
    eval(parse("1 + 1/(x-1)"), 1.0, 0.0, 0.0);
    FAIL("expected EvalError");
  } catch (const EvalError& err) {
    CHECK(std::string(err.what()).find("1/(x-1)") != std::string::npos);
  }
  // negative base with integer exponent is fine
  CHECK(eval(parse("(0-2)^3"), 0.0, 0.0, 0.0) == -8.0);
}

TEST_CASE("diff: power rule shapes") {
  Expr L = parse("x^2*(yp^2/2 - y^(n+1)/(n+1))", {"n"});
  Expr dyp = diff(L, Var::Yp);
  CHECK(struct_eq(dyp, parse("x^2*yp")));

  Expr dy = diff(L, Var::Y);
  CHECK(render(dy) == "-(x^2*y^n)");
  // numerically identical to -x^2*y^n
  Expr ref = parse("-x^2*y^n", {"n"});
  for (double x : {0.5, 1.0, 2.0})
    for (double y : {0.3, 1.0, 1.7}) {
      ParamBindings p = {{"n", 5.0}};
      CHECK(eval(dy, x, y, 0.0, p) == doctest::Approx(eval(ref, x, y, 0.0, p)).epsilon(1e-13));
    }
}

TEST_CASE("diff: second yp-derivative of the relativistic-style integrand") {
  Expr L = parse("-exp(gamma*x)*sqrt(1-yp^2)", {"gamma"});
  Expr d2 = diff(diff(L, Var::Yp), Var::Yp);
  Expr ref = parse("exp(gamma*x)/(1-yp^2)^(3/2)", {"gamma"});
  ParamBindings p = {{"gamma", 1.3}};
  for (double x : {0.0, 0.5, 1.0})
    for (double yp : {-0.9, -0.3, 0.0, 0.4, 0.8})
      CHECK(eval(d2, x, 0.0, yp, p) == doctest::Approx(eval(ref, x, 0.0, yp, p)).epsilon(1e-12));
}

TEST_CASE("diff: parameters and the abs kink") {
  Expr e = parse("a*x^2 + b", kAB);
  CHECK(struct_eq(diff(e, "a"), parse("x^2")));
  CHECK(struct_eq(diff(e, "b"), Expr(1.0)));
  CHECK(struct_eq(diff(e, Var::Y), Expr(0.0)));

  Expr da = diff(parse("abs(x)"), Var::X);
  CHECK(eval(da, 2.0, 0.0, 0.0) == 1.0);
  CHECK(eval(da, -3.0, 0.0, 0.0) == -1.0);
  CHECK(eval(da, 0.0, 0.0, 0.0) == 0.0);  // sign(0) = 0 by convention
}

TEST_CASE("simplify: identities and folding") {
  CHECK(render(simplify(parse("0*sin(x)+y"))) == "y");
  CHECK(render(simplify(parse("x^1"))) == "x");
  CHECK(render(simplify(parse("2*3"))) == "6");
  CHECK(render(simplify(parse("x^0"))) == "1");
  CHECK(render(simplify(parse("x*1+0/(1+x)"))) == "x");
  CHECK(render(simplify(parse("(2*yp)/2"))) == "yp");
  // domain edges are left symbolic rather than folded into errors
  CHECK(simplify(parse("1/0")).kind() == Expr::Kind::Div);
  CHECK_THROWS_AS(eval(simplify(parse("1/0")), 0.0, 0.0, 0.0), EvalError);
}

TEST_CASE("property: diff matches central differences") {
  std::mt19937 rng(20240817);
  int done = 0, attempts = 0;
  while (done < 1000 && attempts < 60000) {
    ++attempts;
    Expr e = random_expr(rng, 4, /*smooth=*/true);
    Point pt = random_point(rng);

    std::uniform_int_distribution<int> which(0, 3);
    int w = which(rng);
    double v = w == 0 ? pt.x : (w == 1 ? pt.y : (w == 2 ? pt.yp : pt.params["a"]));
    double h = 1e-6 * std::max(1.0, std::fabs(v));

    auto eval_at = [&](double shift) {
      double x = pt.x, y = pt.y, yp = pt.yp;
      ParamBindings ps = pt.params;
      if (w == 0) x += shift;
      else if (w == 1) y += shift;
      else if (w == 2) yp += shift;
      else ps["a"] += shift;
      return eval(e, x, y, yp, ps);
    };

    double fm, f0, fp, fm2, fp2, exact;
    try {
      f0 = eval_at(0.0);
      fm = eval_at(-h);
      fp = eval_at(h);
      fm2 = eval_at(-2.0 * h);
      fp2 = eval_at(2.0 * h);
      Expr de = w == 0 ? diff(e, Var::X)
              : w == 1 ? diff(e, Var::Y)
              : w == 2 ? diff(e, Var::Yp)
                       : diff(e, "a");
      exact = eval(de, pt.x, pt.y, pt.yp, pt.params);
    } catch (const EvalError&) {
      continue;  // off-domain sample; try another
    }
    if (std::fabs(f0) > 1e3 || std::fabs(fm) > 1e3 || std::fabs(fp) > 1e3) continue;
    if (std::fabs(exact) > 1e6) continue;

    double fd = (fp - fm) / (2.0 * h);
    double fd2 = (fp2 - fm2) / (4.0 * h);
    double tol = 1e-5 * std::max(1.0, std::fabs(exact));
    // only judge points where the difference quotient itself has converged
    // (near poles it has not; a wrong derivative would still make fd and fd2
    // agree with each other and disagree with `exact`)
    if (std::fabs(fd - fd2) > tol / 4.0) continue;
    CHECK(std::fabs(fd - exact) <= tol);
    ++done;
  }
  CHECK(done == 1000);
}

TEST_CASE("property: simplify preserves value") {
  std::mt19937 rng(991231);
  int exprs = 0;
  while (exprs < 60) {
    Expr e = random_expr(rng, 4, /*smooth=*/false);
    Expr s = simplify(e);
    CHECK(struct_eq(simplify(s), s));  // idempotent
    int points = 0, tried = 0;
    while (points < 100 && tried < 2000) {
      ++tried;
      Point pt = random_point(rng);
      double a, b;
      try {
        a = eval(e, pt.x, pt.y, pt.yp, pt.params);
        b = eval(s, pt.x, pt.y, pt.yp, pt.params);
      } catch (const EvalError&) {
        continue;
      }
      CHECK(std::fabs(a - b) <= 1e-13 * std::max(1.0, std::max(std::fabs(a), std::fabs(b))));
      ++points;
    }
    if (points > 0) ++exprs;  // only count expressions with a usable domain
  }
}

TEST_CASE("property: parse after render is the identity") {
  std::mt19937 rng(774422);
  for (int i = 0; i < 400; ++i) {
    Expr e = random_expr(rng, 4, /*smooth=*/false);
    CHECK(struct_eq(parse(render(e), kAB), e));
    Expr s = simplify(e);
    CHECK(struct_eq(parse(render(s), kAB), s));
  }
  for (const char* src : {
           "yp^2/2 - y",
           "x^2*(yp^2/2 - y)",
           "sqrt(3)/sqrt(3+x^2)",
           "-x^2",
           "x^2^3",
           "x^-2",
           "1e3 + 2.5e-4*x",
           "sin(x)/x",
       }) {
    Expr e = parse(src);
    CHECK(struct_eq(parse(render(e)), e));
  }
  // negative constants round-trip (folded at parse time, refolded on render)
  Expr c = parse("-4");
  CHECK(c.is_constant(-4.0));
  CHECK(struct_eq(parse(render(c)), c));
  CHECK(render_number(0.1) == "0.1");
  CHECK(std::strtod(render_number(1.0 / 3.0).c_str(), nullptr) == 1.0 / 3.0);
}
