#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "varmin/variational.hpp"
#include "varmin/ode.hpp"

namespace varmin::jacobi {

class JacobiError : public Error {
public:
  using Error::Error;
};

// Coefficient data of the accessory equation -(P f')' + Q f = 0 along a
// path, plus the coefficient r of the zero-preserving normal form
// v'' + r v = 0 (v = f*sqrt(P)).  Immutable once built.
struct JacobiSystem {
  double a = 0.0;
  double b = 0.0;
  // P vanishes (or cannot be evaluated) at the left endpoint; conjugate
  // points are then located through the normal form started just inside.
  bool singular_left = false;
  // Step used by the finite-difference P', P'' inside r.
  double fd_step = 0.0;
  std::function<double(double)> P;
  std::function<double(double)> Q;
  std::function<double(double)> r;
};

// Builds P = D33L and Q = D22L - d/dx(D23L) along the path, the total
// derivative expanded through third partials with the path's y''.  The
// caller is responsible for having checked stationarity of p when the
// result feeds classification.
JacobiSystem build_jacobi(const variational::Lagrangian& L, const variational::Path& p);

// Integrates the first-order self-adjoint form f' = w/P, w' = Q f from
// f(a) = 0, w(a) = P(a) (i.e. f'(a) = 1; conjugate points do not depend on
// this normalization) and attaches non-terminal zero-crossing events on f.
// State component 0 is f, component 1 is w.  For singular systems the start
// is offset to a + 1e-6 and the solution rescaled to w = 1 there, keeping
// both components at numerically safe scales (zeros are unchanged).
// Aborts with the location if P <= 0 is met.
odeint::OdeSolution jacobi_field(const JacobiSystem& J,
                              const odeint::IntegrateOptions& opts = {});

// The normal-form coefficient r = q - p^2/4 - p'/2 with p = P'/P and
// q = -Q/P; P' and P'' come from 4th-order central differences with the
// step recorded in J.fd_step.  (Same function as J.r.)
std::function<double(double)> normal_form(const JacobiSystem& J);

struct LegendreBlock {
  double min_P = 0.0;
  double max_P = 0.0;
  int sign = 0;  // +1 uniformly positive, -1 uniformly negative, 0 mixed
};

// Samples P on a grid (excluding a margin at a degenerate left endpoint,
// where the coefficient vanishes by construction) and reports its range and
// uniform sign with margin min|P| > 1e-12 * max|P|.
LegendreBlock legendre_check(const JacobiSystem& J, int samples = 2001);

struct ConjugateReport {
  LegendreBlock legendre;
  // First zero in (a, b] of the relevant solution, if any.
  std::optional<double> first;
  // All detected zeros in (a, b], in increasing order, and per-zero
  // simplicity flags (|slope| > 1e-9 * max |solution|).
  std::vector<double> zeros;
  std::vector<bool> simple;
  // True when the search covered all of (a, b] without early termination.
  bool ceiling_reached = false;
  // Which device produced the answer: "direct integration" or
  // "normal form (degenerate endpoint)".
  std::string certificate;
};

// Locates the first conjugate point after a.  Regular left endpoint: first
// zero of the accessory solution f with f(a)=0, f'(a)=1.  Degenerate left
// endpoint (P(a)=0, e.g. a coefficient vanishing at the origin): integrates
// the normal form v'' + r v = 0 from a + eps with v = eps, v' = 1 -- the
// v = f*sqrt(P) transform of the solution vanishing at the degenerate point
// -- and reports zeros of v.  A uniformly negative P is handled by the
// mirrored system (-P, -Q), which leaves r and the zero set unchanged.
ConjugateReport first_conjugate_point(const JacobiSystem& J);

// Consistency diagnostic for the Riccati substitution g = -P f'/f = -w/f:
// returns g' + Q - g^2/P with g' from extrapolated 5-point central
// differences of -w/f sampled on the solution (base step 1e-3*(b-a), two
// stencils combined to sixth order).  Throws when x is within 1e-6*max|f|
// of a zero of f or the stencil leaves the solution's domain.  Accuracy is
// limited by the dense-output smoothness; integrate the field with tight
// tolerances (e.g. rtol 1e-12, atol below the solution scale) when
// residuals near 1e-6 matter.
double riccati_residual(const JacobiSystem& J, const odeint::OdeSolution& f, double x);

enum class NoZerosVerdict { CertifiedNoConjugatePoints, NotApplicable };

// Samples r on 2001 points; max r <= -1e-12 certifies that no nontrivial
// accessory solution has two zeros on [a, b], hence no conjugate point.
NoZerosVerdict no_zeros_certificate(const JacobiSystem& J);

struct ComparisonBounds {
  bool applicable = false;  // requires min r > 0 on the interval
  double gap_lo = 0.0;      // pi / sqrt(max r)
  double gap_hi = 0.0;      // pi / sqrt(min r)
};

// Oscillation-comparison bracket: when 0 < m^2 <= r <= M^2 on [lo, hi],
// consecutive zeros of any nontrivial solution are separated by a gap in
// [pi/M, pi/m].
ComparisonBounds comparison_bounds(const JacobiSystem& J, double lo, double hi);

enum class InterlaceVerdict { Alternating, Violated, NotApplicable };

// Integrates two independent accessory solutions (f=0, f'=1 and f=1, f'=0;
// normal-form equivalents when the left endpoint is degenerate) and verifies
// that their zeros strictly alternate.  Requires at least two zeros of each
// in range, else NotApplicable.
InterlaceVerdict interlace_check(const JacobiSystem& J);

struct FamilyCheck {
  std::vector<double> xs;
  std::vector<double> dy_dalpha;
  std::vector<double> dy_dbeta;
  double max_residual_alpha = 0.0;
  double max_residual_beta = 0.0;
};

// Given a two-parameter solution family y(x; alpha, beta) (an expression in
// x with parameters "alpha" and "beta"), samples the parameter derivatives
// at (alpha0, beta0) by central differences (parameter step
// 1e-5*max(1, |alpha0|) etc.) and reports the worst accessory-equation
// residual |-(P phi')' + Q phi| of each derivative over [lo, hi], the x
// derivatives taken by 4th-order finite differences.  Parameter derivatives
// of a critical family solve the accessory equation, so small residuals
// certify the family against the system J.
FamilyCheck jacobi_from_family(const exprkit::Expr& family, double alpha0,
                               double beta0, const JacobiSystem& J, double lo,
                               double hi, int samples = 61);

enum class Verdict {
  LocalMinimum,
  LocalMaximum,
  MinimalityFailsBeyond,
  GlobalMinimumByConvexity,
  GlobalMaximumByConvexity,
  Indeterminate,
};

const char* to_string(Verdict v);

struct ClassifyOptions {
  // Attempt the convexity short-circuit before any second-order analysis.
  bool try_convexity = true;
  // Box for the convexity certificate; when unset, a box spanning the
  // path's range (padded by one unit and 50%) is used.
  std::optional<variational::RegionBox> convexity_box;
  // Grid for the stationarity gate.
  int residual_grid = 1001;
};

struct ClassificationReport {
  Verdict verdict = Verdict::Indeterminate;
  // Present for MinimalityFailsBeyond: the first conjugate point.
  std::optional<double> conjugate;
  // Interval on which the certified property holds.
  double valid_a = 0.0;
  double valid_b = 0.0;
  // Human-readable certificate chain, in the order the checks ran.
  std::vector<std::string> reasons;
  std::optional<variational::Convexity> convexity;
  std::optional<ConjugateReport> conjugate_report;
  // Constructive coercivity constant sigma/(1 + (b-a)^2/2) with
  // sigma = min P / 2, reported when a local minimum is certified with a
  // positive Legendre margin.  The choice of sigma is a convention.
  std::optional<double> coercivity_bound;
};

// Full pipeline: stationarity gate, optional convexity short-circuit,
// Legendre sign check, no-zeros certificate, direct conjugate-point search.
// A conjugate point within 1e-9 of b yields Indeterminate ("boundary
// conjugate point"): the sufficiency argument needs absence on all of [a,b].
ClassificationReport classify(const variational::Lagrangian& L,
                              const variational::Path& p,
                              const ClassifyOptions& opts = {});

}  // namespace varmin::jacobi
