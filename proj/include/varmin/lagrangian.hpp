#pragma once

#include <memory>
#include <string>

#include "varmin/expr.hpp"
#include "varmin/ode.hpp"

namespace varmin::variational {

// Raised for ill-posed variational data: degenerate coefficients, paths
// queried outside their domain, directions that fail the endpoint conditions.
class VariationalError : public Error {
public:
  using Error::Error;
};

// An integrand L(x, y, y') together with parameter bindings and its cached
// first and second partial derivatives.  Index convention for partials:
// slot 1 = x, slot 2 = y, slot 3 = y', so d23() is the mixed y,y' partial.
class Lagrangian {
public:
  explicit Lagrangian(exprkit::Expr L, exprkit::ParamBindings params = {});

  const exprkit::Expr& expr() const { return L_; }
  const exprkit::ParamBindings& params() const { return params_; }

  const exprkit::Expr& d1() const { return d1_; }
  const exprkit::Expr& d2() const { return d2_; }
  const exprkit::Expr& d3() const { return d3_; }
  const exprkit::Expr& d13() const { return d13_; }
  const exprkit::Expr& d22() const { return d22_; }
  const exprkit::Expr& d23() const { return d23_; }
  const exprkit::Expr& d33() const { return d33_; }

  // Evaluates any expression in (x, y, yp) under this Lagrangian's bindings.
  double eval(const exprkit::Expr& e, double x, double y, double yp) const;

private:
  exprkit::Expr L_;
  exprkit::ParamBindings params_;
  exprkit::Expr d1_, d2_, d3_, d13_, d22_, d23_, d33_;
};

// A candidate path y(x) on [a, b].  Analytic paths carry a closed-form
// expression and differentiate symbolically; numeric paths wrap an ODE
// solution whose second derivative is recovered algebraically from the
// stationarity equation (solved for y''), so it never differentiates the
// interpolant.
class Path {
public:
  static Path analytic(const exprkit::Expr& y, double a, double b,
                       exprkit::ParamBindings params = {});
  // Wraps a two-component solution (y, y') produced by solve_el_ivp.
  static Path from_solution(odeint::OdeSolution sol, const Lagrangian& L);

  double a() const;
  double b() const;
  double y(double x) const;
  double yp(double x) const;
  double ypp(double x) const;

  bool is_analytic() const;
  // Closed form of an analytic path; throws for numeric paths.
  const exprkit::Expr& y_expr() const;
  // Underlying solution of a numeric path; throws for analytic paths.
  const odeint::OdeSolution& solution() const;
  // True when the underlying integration stopped before its requested
  // endpoint (blow-up); the domain is then the truncated one.
  bool truncated() const;

private:
  struct Impl;
  explicit Path(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

// A variation direction v(x) on [a, b] vanishing at both endpoints
// (|v(a)|, |v(b)| <= 1e-10 is enforced at construction).
class TestDirection {
public:
  TestDirection(const exprkit::Expr& v, double a, double b,
                exprkit::ParamBindings params = {});

  double a() const { return a_; }
  double b() const { return b_; }
  double v(double x) const;
  double vp(double x) const;
  const exprkit::Expr& expr() const { return v_; }

private:
  exprkit::Expr v_, vp_;
  exprkit::ParamBindings params_;
  double a_, b_;
};

}  // namespace varmin::variational
