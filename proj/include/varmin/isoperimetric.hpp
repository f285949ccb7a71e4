#pragma once

#include <functional>

#include "varmin/expr.hpp"
#include "varmin/ode.hpp"

namespace varmin::isoperimetric {

// Raised for invalid moment problems, divergent multiplier regimes, and
// non-positive density samples.
class IsoperimetricError : public Error {
public:
  using Error::Error;
};

// Maximum-entropy problem with unit mass and a prescribed second moment
// sigma^2, posed on the truncated line [-W*sigma, W*sigma].
struct MomentProblem {
  double sigma = 1.0;
  // Truncation half-width in sigma units; at 8 or more the Gaussian-type
  // tails contribute below 1e-14, far under every target tolerance.
  double half_width_sigmas = 12.0;
  // Composite Gauss-Legendre node count for all moment integrals.
  int nodes = 400;
};

// Throws unless sigma > 0, half_width_sigmas >= 8 and nodes is sensible.
void validate(const MomentProblem& prob);

struct MultiplierSolution {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  // Constraint residuals at the returned multipliers: mass integral minus 1
  // and second-moment integral minus sigma^2.
  double residual_mass = 0.0;
  double residual_moment = 0.0;
  int iterations = 0;
};

// The stationary density e^(-1 + lambda1 + lambda2 x^2) of the entropy
// functional under the two moment constraints.
double solved_density(const MultiplierSolution& sol, double x);

// Determinant of [[integral h1, integral h2], [integral x^2 h1,
// integral x^2 h2]] over the domain.  A nonzero value certifies that the
// constraint variations are independent, which is what lets multipliers be
// solved for; expressions are functions of x alone.
double determinant_test(const exprkit::Expr& h1, const exprkit::Expr& h2,
                        double lo, double hi,
                        const exprkit::ParamBindings& params = {});

// Newton iteration on the two constraint residuals with the analytic
// Jacobian [[I0, I2], [I2, I4]] (Ik = k-th moment of the current density).
// Starts from (0, -1); steps are damped to keep lambda2 < 0, where the
// integrals converge.  Converges to residuals |mass - 1| <= 1e-12 and
// |moment - sigma^2| <= 1e-12*sigma^2 or throws after 50 iterations.
MultiplierSolution solve_multipliers(const MomentProblem& prob);

// -integral rho log rho over [lo, hi]; throws on a non-positive sample.
double entropy(const std::function<double(double)>& rho, double lo, double hi,
               int nodes = 400);
double entropy(const exprkit::Expr& rho, double lo, double hi,
               const exprkit::ParamBindings& params = {}, int nodes = 400);

}  // namespace varmin::isoperimetric
