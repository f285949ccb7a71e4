#include "varmin/isoperimetric.hpp"

#include <cmath>
#include <string>

namespace varmin::isoperimetric {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw IsoperimetricError(msg); }

std::string fmt(double v) { return exprkit::render_number(v); }

double integral(const std::function<double(double)>& f, double lo, double hi,
                int nodes) {
  return odeint::quadrature(f, lo, hi, nodes).value;
}

}  // namespace

void validate(const MomentProblem& prob) {
  if (!(prob.sigma > 0.0)) fail("moment problem needs sigma > 0");
  if (!(prob.half_width_sigmas >= 8.0))
    fail("truncation half-width below 8 sigma lets tail error exceed the "
         "constraint tolerances");
  if (prob.nodes < 50) fail("moment integrals need at least 50 quadrature nodes");
}

double solved_density(const MultiplierSolution& sol, double x) {
  return std::exp(-1.0 + sol.lambda1 + sol.lambda2 * x * x);
}

double determinant_test(const exprkit::Expr& h1, const exprkit::Expr& h2,
                        double lo, double hi,
                        const exprkit::ParamBindings& params) {
  if (!(lo < hi)) fail("determinant test needs lo < hi");
  auto moment = [&](const exprkit::Expr& h, int k) {
    return integral(
        [&](double x) {
          double v = exprkit::eval(h, x, 0.0, 0.0, params);
          return k == 0 ? v : x * x * v;
        },
        lo, hi, 400);
  };
  double a = moment(h1, 0), b = moment(h2, 0);
  double c = moment(h1, 2), d = moment(h2, 2);
  return a * d - b * c;
}

MultiplierSolution solve_multipliers(const MomentProblem& prob) {
  validate(prob);
  double W = prob.half_width_sigmas * prob.sigma;
  double s2 = prob.sigma * prob.sigma;

  // Moments I_k = integral x^k e^(-1 + l1 + l2 x^2) on [-W, W].
  auto moments = [&](double l1, double l2, double& I0, double& I2, double& I4) {
    auto base = [&](double x) { return std::exp(-1.0 + l1 + l2 * x * x); };
    I0 = integral(base, -W, W, prob.nodes);
    I2 = integral([&](double x) { return x * x * base(x); }, -W, W, prob.nodes);
    I4 = integral([&](double x) { return x * x * x * x * base(x); }, -W, W,
                  prob.nodes);
  };

  double l1 = 0.0, l2 = -1.0;
  for (int it = 1; it <= 50; ++it) {
    double I0, I2, I4;
    moments(l1, l2, I0, I2, I4);
    double F1 = I0 - 1.0;
    double F2 = I2 - s2;
    if (std::abs(F1) <= 1e-12 && std::abs(F2) <= 1e-12 * s2) {
      MultiplierSolution sol;
      sol.lambda1 = l1;
      sol.lambda2 = l2;
      sol.residual_mass = F1;
      sol.residual_moment = F2;
      sol.iterations = it;
      return sol;
    }
    // Newton step with the analytic Jacobian [[I0, I2], [I2, I4]].
    double det = I0 * I4 - I2 * I2;
    if (det == 0.0) fail("singular Jacobian in the multiplier iteration");
    double d1 = -(I4 * F1 - I2 * F2) / det;
    double d2 = -(-I2 * F1 + I0 * F2) / det;
    // Damp toward the convergent regime: the moment integrals diverge (on
    // the full line) once lambda2 reaches 0.
    double t = 1.0;
    while (l2 + t * d2 >= -1e-8 && t > 1e-12) t *= 0.5;
    if (l2 + t * d2 >= -1e-8)
      fail("multiplier iteration driven into the divergent regime lambda2 >= 0");
    l1 += t * d1;
    l2 += t * d2;
  }
  fail("multiplier iteration did not converge in 50 steps (sigma = " +
       fmt(prob.sigma) + ")");
}

double entropy(const std::function<double(double)>& rho, double lo, double hi,
               int nodes) {
  if (!(lo < hi)) fail("entropy needs lo < hi");
  double value = integral(
      [&](double x) {
        double r = rho(x);
        if (!(r > 0.0))
          fail("entropy integrand needs a positive density; got " + fmt(r) +
               " at x = " + fmt(x));
        return -r * std::log(r);
      },
      lo, hi, nodes);
  return value;
}

double entropy(const exprkit::Expr& rho, double lo, double hi,
               const exprkit::ParamBindings& params, int nodes) {
  return entropy(
      [&](double x) { return exprkit::eval(rho, x, 0.0, 0.0, params); }, lo, hi,
      nodes);
}

}  // namespace varmin::isoperimetric
