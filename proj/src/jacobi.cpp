#include "varmin/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "varmin/variational.hpp"

namespace varmin::jacobi {

namespace ek = exprkit;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) { return ek::render_number(v); }

[[noreturn]] void fail(const std::string& what) { throw JacobiError(what); }

// Sampling start: a degenerate left endpoint is excluded by a small margin,
// since the leading coefficient vanishes there by construction.
double interior_lo(const JacobiSystem& J) {
  return J.a + (J.singular_left ? 1e-3 * (J.b - J.a) : 0.0);
}

// The left endpoints in scope degenerate at the origin; when the system's
// domain already starts a hair inside (an offset numeric path), the
// underlying degenerate point is still x = 0.  Otherwise take the endpoint
// itself.
double singular_origin(const JacobiSystem& J) {
  return std::abs(J.a) <= 1e-3 * (J.b - J.a) ? 0.0 : J.a;
}

struct AccessoryRun {
  odeint::OdeSolution sol;
  std::vector<double> zeros;
  std::vector<bool> simple;
  double scale = 0.0;  // max |component 0| over the nodes
};

AccessoryRun finish_run(odeint::OdeSolution sol) {
  AccessoryRun run{std::move(sol), {}, {}, 0.0};
  for (const odeint::State& s : run.sol.states())
    run.scale = std::max(run.scale, std::abs(s[0]));
  for (const odeint::EventHit& hit : run.sol.events()) {
    run.zeros.push_back(hit.x);
    double slope = run.sol.derivative(hit.x)[0];
    run.simple.push_back(std::abs(slope) > 1e-9 * run.scale);
  }
  return run;
}

// Integrates the self-adjoint pair f' = w/P, w' = Q f with zero-crossing
// events on f.  A uniformly negative P is folded through (-P, -Q), which
// leaves f and its zeros unchanged.
AccessoryRun run_self_adjoint(const JacobiSystem& J, double x0, double f0,
                              double fp0, const odeint::IntegrateOptions& opts) {
  double P0 = J.P(x0);
  if (P0 == 0.0)
    fail("accessory coefficient P vanishes at the start x = " + fmt(x0));
  double sgn = P0 < 0.0 ? -1.0 : 1.0;
  auto P = J.P;
  auto Q = J.Q;
  odeint::Field field = [P, Q, sgn](double x, const odeint::State& s) {
    double Pe = sgn * P(x);
    if (!(Pe > 0.0))
      fail("accessory coefficient P loses its sign at x = " + fmt(x) +
           "; integration aborted");
    odeint::State out(2);
    out[0] = s[1] / Pe;
    out[1] = sgn * Q(x) * s[0];
    return out;
  };
  odeint::State s0(2);
  s0[0] = f0;
  s0[1] = sgn * P0 * fp0;
  odeint::EventSpec zero{[](double, const odeint::State& s) { return s[0]; },
                      odeint::EventSpec::Direction::Any, false};
  return finish_run(odeint::integrate(field, x0, s0, J.b, opts, {zero}));
}

// Integrates the normal form v'' + r v = 0 with zero-crossing events on v.
AccessoryRun run_normal_form(const JacobiSystem& J, double x0, double v0,
                             double vp0, const odeint::IntegrateOptions& opts) {
  auto r = J.r;
  odeint::Field field = [r](double x, const odeint::State& s) {
    odeint::State out(2);
    out[0] = s[1];
    out[1] = -r(x) * s[0];
    return out;
  };
  odeint::State s0(2);
  s0[0] = v0;
  s0[1] = vp0;
  odeint::EventSpec zero{[](double, const odeint::State& s) { return s[0]; },
                      odeint::EventSpec::Direction::Any, false};
  return finish_run(odeint::integrate(field, x0, s0, J.b, opts, {zero}));
}

}  // namespace

// ---------------------------------------------------------------------------
// System assembly

JacobiSystem build_jacobi(const variational::Lagrangian& L,
                          const variational::Path& p) {
  JacobiSystem J;
  J.a = p.a();
  J.b = p.b();
  J.fd_step = 1e-4 * (J.b - J.a);

  variational::Lagrangian Lc = L;
  variational::Path pc = p;
  J.P = [Lc, pc](double x) { return Lc.eval(Lc.d33(), x, pc.y(x), pc.yp(x)); };

  ek::Expr d23x = ek::diff(L.d23(), ek::Var::X);
  ek::Expr d23y = ek::diff(L.d23(), ek::Var::Y);
  ek::Expr d23yp = ek::diff(L.d23(), ek::Var::Yp);
  // y'' enters Q only through the yp-derivative of D23L; skipping it when
  // that vanishes identically keeps Q usable arbitrarily close to a
  // degenerate endpoint of a numeric path.
  bool needs_ypp = !d23yp.is_constant(0.0);
  J.Q = [Lc, pc, d23x, d23y, d23yp, needs_ypp](double x) {
    double y = pc.y(x), yp = pc.yp(x);
    double ddx = Lc.eval(d23x, x, y, yp) + Lc.eval(d23y, x, y, yp) * yp;
    if (needs_ypp) ddx += Lc.eval(d23yp, x, y, yp) * pc.ypp(x);
    return Lc.eval(Lc.d22(), x, y, yp) - ddx;
  };

  bool singular = false;
  try {
    double Pa = J.P(J.a);
    double Pmid = J.P(0.5 * (J.a + J.b));
    singular = std::abs(Pa) <= 1e-6 * std::max(1.0, std::abs(Pmid));
  } catch (const ek::EvalError&) {
    singular = true;
  } catch (const variational::VariationalError&) {
    singular = true;
  }
  J.singular_left = singular;

  // Normal-form coefficient r = q - p^2/4 - p'/2 with p = P'/P, q = -Q/P.
  // Substituting p' = P''/P - p^2 gives r = q + p^2/4 - P''/(2P), which
  // cancels the two large terms pairwise near a degenerate endpoint.
  auto P = J.P;
  auto Q = J.Q;
  double h = J.fd_step;
  J.r = [P, Q, h](double x) {
    double pm2 = P(x - 2 * h), pm1 = P(x - h), p0 = P(x), pp1 = P(x + h),
           pp2 = P(x + 2 * h);
    if (p0 == 0.0)
      fail("normal form undefined where P vanishes (x = " + fmt(x) + ")");
    double d1 = (pm2 - 8.0 * pm1 + 8.0 * pp1 - pp2) / (12.0 * h);
    double d2 = (-pm2 + 16.0 * pm1 - 30.0 * p0 + 16.0 * pp1 - pp2) / (12.0 * h * h);
    double p = d1 / p0;
    double q = -Q(x) / p0;
    double r = q + 0.25 * p * p - 0.5 * d2 / p0;
    if (!std::isfinite(r))
      fail("normal-form coefficient is not finite at x = " + fmt(x));
    return r;
  };
  return J;
}

odeint::OdeSolution jacobi_field(const JacobiSystem& J,
                              const odeint::IntegrateOptions& opts) {
  double x0 = J.a + (J.singular_left ? 1e-6 : 0.0);
  // Degenerate endpoint: P(x0) is ~1e-12, so the f'(x0)=1 normalization
  // would put the w component at a scale where absolute error floors
  // swamp it.  Zeros are normalization-invariant, so rescale to w(x0)=1.
  double fp0 = J.singular_left ? 1.0 / std::abs(J.P(x0)) : 1.0;
  return run_self_adjoint(J, x0, 0.0, fp0, opts).sol;
}

std::function<double(double)> normal_form(const JacobiSystem& J) { return J.r; }

// ---------------------------------------------------------------------------
// Legendre check

LegendreBlock legendre_check(const JacobiSystem& J, int samples) {
  if (samples < 2) fail("Legendre check needs at least two samples");
  double lo = interior_lo(J);
  LegendreBlock block;
  block.min_P = std::numeric_limits<double>::infinity();
  block.max_P = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    double x = lo + (J.b - lo) * i / (samples - 1);
    double v = J.P(x);
    block.min_P = std::min(block.min_P, v);
    block.max_P = std::max(block.max_P, v);
  }
  double scale = std::max(std::abs(block.min_P), std::abs(block.max_P));
  if (block.min_P > 1e-12 * scale)
    block.sign = 1;
  else if (block.max_P < -1e-12 * scale)
    block.sign = -1;
  else
    block.sign = 0;
  return block;
}

// ---------------------------------------------------------------------------
// Conjugate points

ConjugateReport first_conjugate_point(const JacobiSystem& J) {
  ConjugateReport rep;
  rep.legendre = legendre_check(J);
  if (rep.legendre.sign == 0)
    fail("Legendre sign check failed: P takes both signs on [" + fmt(J.a) +
         ", " + fmt(J.b) + "]");
  AccessoryRun run = [&] {
    if (J.singular_left) {
      double origin = singular_origin(J);
      double x0 = std::max(J.a, origin + 1e-6);
      // v = f*sqrt(P) of the solution bounded at the degenerate point:
      // v vanishes there and grows linearly, so v(x0) = x0 - origin, v' = 1.
      return run_normal_form(J, x0, x0 - origin, 1.0, {});
    }
    return run_self_adjoint(J, J.a, 0.0, 1.0, {});
  }();
  rep.zeros = run.zeros;
  rep.simple = run.simple;
  if (!rep.zeros.empty()) rep.first = rep.zeros.front();
  rep.ceiling_reached = run.sol.status() == odeint::SolveStatus::Completed;
  rep.certificate = J.singular_left ? "normal form (degenerate endpoint)"
                                    : "direct integration";
  return rep;
}

double riccati_residual(const JacobiSystem& J, const odeint::OdeSolution& f,
                        double x) {
  double lo = std::min(f.front_x(), f.back_x());
  double hi = std::max(f.front_x(), f.back_x());
  double h = 1e-3 * (J.b - J.a);
  if (x - 4 * h < lo || x + 4 * h > hi)
    fail("Riccati stencil leaves the solution domain at x = " + fmt(x));
  double scale = 0.0;
  for (const odeint::State& s : f.states()) scale = std::max(scale, std::abs(s[0]));
  auto g = [&](double t) {
    double fv = f.value(t, 0);
    if (std::abs(fv) <= 1e-6 * scale)
      fail("Riccati substitution undefined near a zero of the solution (x = " +
           fmt(t) + ")");
    return -f.value(t, 1) / fv;
  };
  // 5-point stencil at two steps, extrapolated: removes the h^4 truncation
  // term, which otherwise dominates when |Q| is large (polytropic weights).
  auto stencil = [&](double s) {
    return (g(x - 2 * s) - 8.0 * g(x - s) + 8.0 * g(x + s) - g(x + 2 * s)) /
           (12.0 * s);
  };
  double gprime = (16.0 * stencil(h) - stencil(2.0 * h)) / 15.0;
  double Pv = J.P(x);
  double sgn = Pv < 0.0 ? -1.0 : 1.0;  // mirrored system for negative P
  double gx = g(x);
  return gprime + sgn * J.Q(x) - gx * gx / (sgn * Pv);
}

// ---------------------------------------------------------------------------
// Oscillation certificates

NoZerosVerdict no_zeros_certificate(const JacobiSystem& J) {
  const int n = 2001;
  double lo = interior_lo(J);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double x = lo + (J.b - lo) * i / (n - 1);
    worst = std::max(worst, J.r(x));
  }
  return worst <= -1e-12 ? NoZerosVerdict::CertifiedNoConjugatePoints
                         : NoZerosVerdict::NotApplicable;
}

ComparisonBounds comparison_bounds(const JacobiSystem& J, double lo, double hi) {
  if (!(lo < hi))
    fail("comparison interval requires lo < hi, got [" + fmt(lo) + ", " + fmt(hi) + "]");
  const int n = 2001;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double x = lo + (hi - lo) * i / (n - 1);
    double v = J.r(x);
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  ComparisonBounds out;
  if (!(mn > 0.0)) return out;  // sign change or non-positive r: no bracket
  out.applicable = true;
  out.gap_lo = kPi / std::sqrt(mx);
  out.gap_hi = kPi / std::sqrt(mn);
  return out;
}

InterlaceVerdict interlace_check(const JacobiSystem& J) {
  AccessoryRun s1, s2;
  if (J.singular_left) {
    double origin = singular_origin(J);
    double x0 = std::max(J.a, origin + 1e-6);
    s1 = run_normal_form(J, x0, x0 - origin, 1.0, {});
    s2 = run_normal_form(J, x0, 1.0, 0.0, {});
  } else {
    s1 = run_self_adjoint(J, J.a, 0.0, 1.0, {});
    s2 = run_self_adjoint(J, J.a, 1.0, 0.0, {});
  }
  if (s1.zeros.size() < 2 || s2.zeros.size() < 2)
    return InterlaceVerdict::NotApplicable;
  struct Tagged {
    double x;
    int who;
  };
  std::vector<Tagged> merged;
  for (double z : s1.zeros) merged.push_back({z, 1});
  for (double z : s2.zeros) merged.push_back({z, 2});
  std::sort(merged.begin(), merged.end(),
            [](const Tagged& a, const Tagged& b) { return a.x < b.x; });
  for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
    if (merged[i].who == merged[i + 1].who) return InterlaceVerdict::Violated;
    if (!(merged[i + 1].x - merged[i].x > 0.0)) return InterlaceVerdict::Violated;
  }
  return InterlaceVerdict::Alternating;
}

// ---------------------------------------------------------------------------
// Solution-family consistency

FamilyCheck jacobi_from_family(const ek::Expr& family, double alpha0,
                               double beta0, const JacobiSystem& J, double lo,
                               double hi, int samples) {
  if (!(lo < hi)) fail("family check interval requires lo < hi");
  if (samples < 2) fail("family check needs at least two samples");
  double ha = 1e-5 * std::max(1.0, std::abs(alpha0));
  double hb = 1e-5 * std::max(1.0, std::abs(beta0));
  auto y_at = [&](double x, double al, double be) {
    ek::ParamBindings prm{{"alpha", al}, {"beta", be}};
    return ek::eval(family, x, 0.0, 0.0, prm);
  };
  auto phi_alpha = [&](double x) {
    return (y_at(x, alpha0 + ha, beta0) - y_at(x, alpha0 - ha, beta0)) / (2.0 * ha);
  };
  auto phi_beta = [&](double x) {
    return (y_at(x, alpha0, beta0 + hb) - y_at(x, alpha0, beta0 - hb)) / (2.0 * hb);
  };
  // Self-adjoint residual -(P phi')' + Q phi = -(P' phi' + P phi'') + Q phi
  // with phi', phi'' and P' from 4th-order central stencils.
  double hx = 5e-3 * (hi - lo);
  auto residual_at = [&](const std::function<double(double)>& phi, double x) {
    double fm2 = phi(x - 2 * hx), fm1 = phi(x - hx), f0 = phi(x),
           fp1 = phi(x + hx), fp2 = phi(x + 2 * hx);
    double d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * hx);
    double d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * hx * hx);
    double pm2 = J.P(x - 2 * hx), pm1 = J.P(x - hx), pp1 = J.P(x + hx),
           pp2 = J.P(x + 2 * hx);
    double Pd = (pm2 - 8.0 * pm1 + 8.0 * pp1 - pp2) / (12.0 * hx);
    return -(Pd * d1 + J.P(x) * d2) + J.Q(x) * f0;
  };
  FamilyCheck out;
  for (int i = 0; i < samples; ++i) {
    double x = lo + (hi - lo) * i / (samples - 1);
    out.xs.push_back(x);
    out.dy_dalpha.push_back(phi_alpha(x));
    out.dy_dbeta.push_back(phi_beta(x));
    out.max_residual_alpha =
        std::max(out.max_residual_alpha, std::abs(residual_at(phi_alpha, x)));
    out.max_residual_beta =
        std::max(out.max_residual_beta, std::abs(residual_at(phi_beta, x)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification pipeline

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::LocalMinimum: return "LOCAL_MINIMUM";
    case Verdict::LocalMaximum: return "LOCAL_MAXIMUM";
    case Verdict::MinimalityFailsBeyond: return "MINIMALITY_FAILS_BEYOND";
    case Verdict::GlobalMinimumByConvexity: return "GLOBAL_MINIMUM_BY_CONVEXITY";
    case Verdict::GlobalMaximumByConvexity: return "GLOBAL_MAXIMUM_BY_CONVEXITY";
    case Verdict::Indeterminate: return "INDETERMINATE";
  }
  return "INDETERMINATE";
}

namespace {

variational::RegionBox default_box(const variational::Path& p) {
  const int n = 256;
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  double pmin = ymin, pmax = -ymin;
  for (int i = 0; i <= n; ++i) {
    double x = p.a() + (p.b() - p.a()) * i / n;
    double y = p.y(x), yp = p.yp(x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
    pmin = std::min(pmin, yp);
    pmax = std::max(pmax, yp);
  }
  double ypad = 1.0 + 0.5 * (ymax - ymin);
  double ppad = 1.0 + 0.5 * (pmax - pmin);
  return {p.a(), p.b(), ymin - ypad, ymax + ypad, pmin - ppad, pmax + ppad};
}

void attach_coercivity(ClassificationReport& rep, const LegendreBlock& leg,
                       double span) {
  if (leg.sign != 1) return;
  double sigma = 0.5 * leg.min_P;
  rep.coercivity_bound = sigma / (1.0 + 0.5 * span * span);
  rep.reasons.push_back("coercivity bound " + fmt(*rep.coercivity_bound) +
                        " from sigma = min P / 2 (a convention, not canonical)");
}

}  // namespace

ClassificationReport classify(const variational::Lagrangian& L,
                              const variational::Path& p,
                              const ClassifyOptions& opts) {
  ClassificationReport rep;
  rep.valid_a = p.a();
  rep.valid_b = p.b();

  double res = variational::max_el_residual(L, p, opts.residual_grid);
  double tol = variational::critical_tolerance(L, p, opts.residual_grid);
  if (!(res <= tol)) {
    throw variational::VariationalError(
        "classification requires a stationary path: max Euler-Lagrange "
        "residual " +
        fmt(res) + " exceeds tolerance " + fmt(tol));
  }
  rep.reasons.push_back("stationarity gate passed: max residual " + fmt(res) +
                        " within " + fmt(tol));

  if (opts.try_convexity) {
    variational::RegionBox box =
        opts.convexity_box ? *opts.convexity_box : default_box(p);
    // Scale the sampling grid with the box so the step stays at or below
    // one unit per axis (capped for pathological ranges): a steep path can
    // blow the padded box up to hundreds of units, and a fixed count would
    // let narrow sign-definiteness failures slip between samples.
    auto axis_count = [](double edge) {
      return std::max(41, std::min(201, static_cast<int>(std::ceil(edge)) + 1));
    };
    variational::GridCounts grid{axis_count(box.x_hi - box.x_lo),
                                 axis_count(box.y_hi - box.y_lo),
                                 axis_count(box.yp_hi - box.yp_lo)};
    variational::Convexity conv =
        variational::convexity_certificate(L, box, grid);
    rep.convexity = conv;
    if (conv == variational::Convexity::Convex) {
      rep.verdict = Verdict::GlobalMinimumByConvexity;
      rep.reasons.push_back(
          "integrand jointly convex in (y, y') over the sampled box: the "
          "stationary path minimizes the action among all same-endpoint paths");
      return rep;
    }
    if (conv == variational::Convexity::Concave) {
      rep.verdict = Verdict::GlobalMaximumByConvexity;
      rep.reasons.push_back(
          "integrand jointly concave in (y, y') over the sampled box: the "
          "stationary path maximizes the action among all same-endpoint paths");
      return rep;
    }
    rep.reasons.push_back("convexity certificate inconclusive over the sampled box");
  }

  JacobiSystem J = build_jacobi(L, p);
  LegendreBlock leg = legendre_check(J);
  if (leg.sign == 0) {
    rep.verdict = Verdict::Indeterminate;
    rep.reasons.push_back("Legendre check failed: P ranges [" + fmt(leg.min_P) +
                          ", " + fmt(leg.max_P) + "] without a uniform sign");
    return rep;
  }
  bool maximum_branch = leg.sign < 0;
  rep.reasons.push_back(std::string("Legendre coefficient uniformly ") +
                        (maximum_branch ? "negative" : "positive") + ": P in [" +
                        fmt(leg.min_P) + ", " + fmt(leg.max_P) + "]");

  if (no_zeros_certificate(J) == NoZerosVerdict::CertifiedNoConjugatePoints) {
    ConjugateReport cr;
    cr.legendre = leg;
    cr.ceiling_reached = true;
    cr.certificate = "no-zeros certificate";
    rep.conjugate_report = cr;
    rep.verdict = maximum_branch ? Verdict::LocalMaximum : Verdict::LocalMinimum;
    rep.reasons.push_back(
        "normal-form coefficient r stays below -1e-12: no accessory solution "
        "vanishes twice, so no conjugate point exists in (a, b]");
    attach_coercivity(rep, leg, p.b() - p.a());
    return rep;
  }
  rep.reasons.push_back("no-zeros certificate not applicable (r reaches positive values)");

  ConjugateReport cr = first_conjugate_point(J);
  rep.conjugate_report = cr;
  if (!cr.first) {
    if (!cr.ceiling_reached) {
      rep.verdict = Verdict::Indeterminate;
      rep.reasons.push_back(
          "accessory integration stopped before b; the searched range shows no "
          "conjugate point but the interval was not covered");
      return rep;
    }
    rep.verdict = maximum_branch ? Verdict::LocalMaximum : Verdict::LocalMinimum;
    rep.reasons.push_back("direct integration found no conjugate point in (a, b]");
    attach_coercivity(rep, leg, p.b() - p.a());
    return rep;
  }

  double c = *cr.first;
  rep.conjugate = c;
  if (std::abs(c - p.b()) <= 1e-9) {
    rep.verdict = Verdict::Indeterminate;
    rep.reasons.push_back(
        "boundary conjugate point: the first conjugate point coincides with b "
        "and the sufficiency argument needs strict absence on [a, b]");
    return rep;
  }
  rep.verdict = Verdict::MinimalityFailsBeyond;
  rep.valid_b = c;
  rep.reasons.push_back(
      std::string(maximum_branch ? "maximum branch (P < 0): maximality"
                                 : "minimality") +
      " holds on [" + fmt(p.a()) + ", " + fmt(c) + ") and fails on intervals "
      "extending beyond the conjugate point " + fmt(c));
  return rep;
}

}  // namespace varmin::jacobi
