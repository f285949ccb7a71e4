#pragma once

#include <functional>
#include <vector>

#include "varmin/lagrangian.hpp"

namespace varmin::variational {

// Pointwise stationarity defect D2L - d/dx(D3L) along the path, with the
// total derivative expanded as D13L + D23L*y' + D33L*y''.
double el_residual(const Lagrangian& L, const Path& p, double x);

// Largest |el_residual| over a uniform grid on the path's domain.
double max_el_residual(const Lagrangian& L, const Path& p, int grid_points = 1001);

// Scale-aware acceptance threshold for a claimed stationary path:
// 1e-8 * (1 + max |D2L| over the same grid).
double critical_tolerance(const Lagrangian& L, const Path& p, int grid_points = 1001);

// Throws VariationalError when the path fails the stationarity gate above.
void require_critical(const Lagrangian& L, const Path& p, int grid_points = 1001);

// Integrates the stationarity equation solved for y'',
//   y'' = (D2L - D13L - D23L*y') / D33L,
// from (y_a, yp_a) at a.  When D33L vanishes at the starting point (a
// degenerate left endpoint, e.g. a coefficient with a zero there), the start
// is shifted to a + eps with the same initial data; eps defaults to
// 1e-6*max(1, b-a) and can be overridden (pass eps > 0).  A vanishing D33L
// away from the start aborts with the location; blow-up truncates the domain
// and flags the path.
Path solve_el_ivp(const Lagrangian& L, double a, double b, double y_a,
                  double yp_a, double singular_epsilon = -1.0);

// Integral of L along the path (relative accuracy 1e-9).
double action(const Lagrangian& L, const Path& p);

// Gateaux derivative of the action at p in direction v:
//   integral of v*D2L + v'*D3L.
double first_variation(const Lagrangian& L, const Path& p, const TestDirection& v);

// Quadratic form
//   integral of P v'^2 + Q v^2
// with P, Q the accessory-equation coefficients along p.  No 1/2 prefactor:
// the sign is what classification consumes, and the finite-difference tests
// are stated against this normalization.
double second_variation(const Lagrangian& L, const Path& p, const TestDirection& v);

// Same quadratic form for a direction given by callables (value and
// derivative).  `breakpoints` lists interior points where the direction is
// only piecewise smooth; the quadrature is split there.
double second_variation(const Lagrangian& L, const Path& p,
                        const std::function<double(double)>& v,
                        const std::function<double(double)>& vp,
                        const std::vector<double>& breakpoints = {});

enum class Convexity { Convex, Concave, Inconclusive };

struct RegionBox {
  double x_lo, x_hi;
  double y_lo, y_hi;
  double yp_lo, yp_hi;
};

// Defaults chosen so that sign-definiteness failures on windows wider than
// ~1/20 of the box edge cannot slip between samples.
struct GridCounts {
  int nx = 41;
  int ny = 41;
  int nyp = 41;
};

// Samples the Hessian of L in (y, y') over the box and certifies joint
// convexity (positive semidefinite everywhere), concavity, or gives up.
// The tolerance is 1e-10*(1 + largest sampled |entry|) so integrands sitting
// exactly on the semidefinite boundary still certify.
Convexity convexity_certificate(const Lagrangian& L, const RegionBox& box,
                                const GridCounts& grid = {});

const char* to_string(Convexity c);

struct FriedrichsResult {
  double lhs;   // integral of v^2
  double rhs;   // (b-a)^2/2 times the integral of v'^2
  bool holds;   // lhs <= rhs + 1e-12
};

// Endpoint-vanishing directions obey the one-dimensional Friedrichs bound
// used by the coercivity argument; this evaluates both sides.
FriedrichsResult friedrichs_check(const TestDirection& v);

}  // namespace varmin::variational
