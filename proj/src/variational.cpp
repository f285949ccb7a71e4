#include "varmin/variational.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "varmin/jacobi.hpp"

namespace varmin::variational {

namespace ek = exprkit;

namespace {

std::string fmt(double v) { return ek::render_number(v); }

[[noreturn]] void fail(const std::string& what) { throw VariationalError(what); }

// Doubles the node count until the quadrature's own error estimate meets the
// relative target; the final count resolves every integrand in scope.
double adaptive_integral(const std::function<double(double)>& f, double a,
                         double b, double rel = 1e-9) {
  odeint::QuadResult q{0.0, 0.0};
  for (int n : {256, 512, 1024, 2048, 4096, 8192}) {
    q = odeint::quadrature(f, a, b, n);
    if (q.error_estimate <= rel * (1.0 + std::abs(q.value))) break;
  }
  return q.value;
}

std::pair<double, double> common_span(double pa, double pb, double va, double vb,
                                      const char* what) {
  double lo = std::max(pa, va);
  double hi = std::min(pb, vb);
  if (!(lo < hi))
    fail(std::string(what) + ": direction domain [" + fmt(va) + ", " + fmt(vb) +
         "] does not overlap the path domain [" + fmt(pa) + ", " + fmt(pb) + "]");
  return {lo, hi};
}

}  // namespace

// ---------------------------------------------------------------------------
// Lagrangian

Lagrangian::Lagrangian(ek::Expr L, ek::ParamBindings params)
    : L_(ek::simplify(std::move(L))), params_(std::move(params)) {
  d1_ = ek::diff(L_, ek::Var::X);
  d2_ = ek::diff(L_, ek::Var::Y);
  d3_ = ek::diff(L_, ek::Var::Yp);
  d13_ = ek::diff(d3_, ek::Var::X);
  d22_ = ek::diff(d2_, ek::Var::Y);
  d23_ = ek::diff(d3_, ek::Var::Y);
  d33_ = ek::diff(d3_, ek::Var::Yp);
}

double Lagrangian::eval(const ek::Expr& e, double x, double y, double yp) const {
  return ek::eval(e, x, y, yp, params_);
}

// ---------------------------------------------------------------------------
// Path

struct Path::Impl {
  bool analytic = false;
  double a = 0.0, b = 0.0;
  ek::ParamBindings params;
  // analytic form
  ek::Expr y, yp, ypp;
  // numeric form
  std::optional<odeint::OdeSolution> sol;
  ek::Expr n_d2, n_d13, n_d23, n_d33;  // for the algebraic y''
  bool truncated = false;
};

Path Path::analytic(const ek::Expr& y, double a, double b, ek::ParamBindings params) {
  if (!(a < b))
    fail("path domain requires a < b, got [" + fmt(a) + ", " + fmt(b) + "]");
  auto impl = std::make_shared<Impl>();
  impl->analytic = true;
  impl->a = a;
  impl->b = b;
  impl->y = ek::simplify(y);
  impl->yp = ek::diff(impl->y, ek::Var::X);
  impl->ypp = ek::diff(impl->yp, ek::Var::X);
  impl->params = std::move(params);
  return Path(std::move(impl));
}

Path Path::from_solution(odeint::OdeSolution sol, const Lagrangian& L) {
  if (sol.nodes().size() < 2 || sol.states().front().size() != 2)
    fail("a numeric path needs a two-component (y, y') solution with at least two nodes");
  auto impl = std::make_shared<Impl>();
  impl->analytic = false;
  impl->a = std::min(sol.front_x(), sol.back_x());
  impl->b = std::max(sol.front_x(), sol.back_x());
  impl->truncated = sol.status() == odeint::SolveStatus::BlowUp ||
                    sol.status() == odeint::SolveStatus::StepFailure;
  impl->params = L.params();
  impl->n_d2 = L.d2();
  impl->n_d13 = L.d13();
  impl->n_d23 = L.d23();
  impl->n_d33 = L.d33();
  impl->sol = std::move(sol);
  return Path(std::move(impl));
}

double Path::a() const { return impl_->a; }
double Path::b() const { return impl_->b; }

double Path::y(double x) const {
  if (impl_->analytic) return ek::eval(impl_->y, x, 0.0, 0.0, impl_->params);
  return impl_->sol->value(x, 0);
}

double Path::yp(double x) const {
  if (impl_->analytic) return ek::eval(impl_->yp, x, 0.0, 0.0, impl_->params);
  return impl_->sol->value(x, 1);
}

double Path::ypp(double x) const {
  if (impl_->analytic) return ek::eval(impl_->ypp, x, 0.0, 0.0, impl_->params);
  double yv = y(x), ypv = yp(x);
  double d33 = ek::eval(impl_->n_d33, x, yv, ypv, impl_->params);
  if (std::abs(d33) <= 1e-12)
    fail("cannot recover y'' along the numeric path: |D33L| <= 1e-12 at x = " + fmt(x));
  double num = ek::eval(impl_->n_d2, x, yv, ypv, impl_->params) -
               ek::eval(impl_->n_d13, x, yv, ypv, impl_->params) -
               ek::eval(impl_->n_d23, x, yv, ypv, impl_->params) * ypv;
  return num / d33;
}

bool Path::is_analytic() const { return impl_->analytic; }

const ek::Expr& Path::y_expr() const {
  if (!impl_->analytic) fail("numeric paths have no closed form");
  return impl_->y;
}

const odeint::OdeSolution& Path::solution() const {
  if (impl_->analytic) fail("analytic paths have no underlying solution");
  return *impl_->sol;
}

bool Path::truncated() const { return impl_->truncated; }

// ---------------------------------------------------------------------------
// TestDirection

TestDirection::TestDirection(const ek::Expr& v, double a, double b,
                             ek::ParamBindings params)
    : v_(ek::simplify(v)),
      vp_(ek::diff(v_, ek::Var::X)),
      params_(std::move(params)),
      a_(a),
      b_(b) {
  if (!(a < b))
    fail("direction domain requires a < b, got [" + fmt(a) + ", " + fmt(b) + "]");
  double va = this->v(a), vb = this->v(b);
  if (!(std::abs(va) <= 1e-10 && std::abs(vb) <= 1e-10))
    fail("directions must vanish at both endpoints: v(" + fmt(a) + ") = " + fmt(va) +
         ", v(" + fmt(b) + ") = " + fmt(vb));
}

double TestDirection::v(double x) const {
  return ek::eval(v_, x, 0.0, 0.0, params_);
}

double TestDirection::vp(double x) const {
  return ek::eval(vp_, x, 0.0, 0.0, params_);
}

// ---------------------------------------------------------------------------
// Stationarity

double el_residual(const Lagrangian& L, const Path& p, double x) {
  double y = p.y(x), yp = p.yp(x), ypp = p.ypp(x);
  double total = L.eval(L.d13(), x, y, yp) + L.eval(L.d23(), x, y, yp) * yp +
                 L.eval(L.d33(), x, y, yp) * ypp;
  return L.eval(L.d2(), x, y, yp) - total;
}

double max_el_residual(const Lagrangian& L, const Path& p, int grid_points) {
  if (grid_points < 2) fail("residual grid needs at least two points");
  double worst = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    double x = p.a() + (p.b() - p.a()) * i / (grid_points - 1);
    worst = std::max(worst, std::abs(el_residual(L, p, x)));
  }
  return worst;
}

double critical_tolerance(const Lagrangian& L, const Path& p, int grid_points) {
  if (grid_points < 2) fail("residual grid needs at least two points");
  double scale = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    double x = p.a() + (p.b() - p.a()) * i / (grid_points - 1);
    scale = std::max(scale, std::abs(L.eval(L.d2(), x, p.y(x), p.yp(x))));
  }
  return 1e-8 * (1.0 + scale);
}

void require_critical(const Lagrangian& L, const Path& p, int grid_points) {
  double res = max_el_residual(L, p, grid_points);
  double tol = critical_tolerance(L, p, grid_points);
  if (!(res <= tol))
    fail("path is not stationary: max residual " + fmt(res) +
         " exceeds the acceptance threshold " + fmt(tol));
}

// ---------------------------------------------------------------------------
// Stationarity IVP

Path solve_el_ivp(const Lagrangian& L, double a, double b, double y_a,
                  double yp_a, double singular_epsilon) {
  if (!(a < b)) fail("solve_el_ivp requires a < b, got [" + fmt(a) + ", " + fmt(b) + "]");
  double start = a;
  bool degenerate_start = false;
  try {
    degenerate_start = std::abs(L.eval(L.d33(), a, y_a, yp_a)) <= 1e-12;
  } catch (const ek::EvalError&) {
    degenerate_start = true;
  }
  if (degenerate_start) {
    double eps = singular_epsilon > 0.0 ? singular_epsilon : 1e-6 * std::max(1.0, b - a);
    start = a + eps;
    if (!(start < b)) fail("degenerate-endpoint offset leaves an empty interval");
  }
  odeint::Field field = [&L](double x, const odeint::State& s) {
    double y = s[0], yp = s[1];
    double d33 = L.eval(L.d33(), x, y, yp);
    if (std::abs(d33) <= 1e-12)
      fail("stationarity equation not solvable for y'': |D33L| <= 1e-12 at x = " + fmt(x));
    double num = L.eval(L.d2(), x, y, yp) - L.eval(L.d13(), x, y, yp) -
                 L.eval(L.d23(), x, y, yp) * yp;
    odeint::State out(2);
    out[0] = yp;
    out[1] = num / d33;
    return out;
  };
  odeint::State s0(2);
  s0[0] = y_a;
  s0[1] = yp_a;
  auto sol = odeint::integrate(field, start, s0, b);
  if (sol.status() == odeint::SolveStatus::StepFailure)
    fail("integration of the stationarity equation stalled near x = " + fmt(sol.back_x()));
  return Path::from_solution(std::move(sol), L);
}

// ---------------------------------------------------------------------------
// Action and its variations

double action(const Lagrangian& L, const Path& p) {
  auto f = [&](double x) { return L.eval(L.expr(), x, p.y(x), p.yp(x)); };
  return adaptive_integral(f, p.a(), p.b());
}

double first_variation(const Lagrangian& L, const Path& p, const TestDirection& v) {
  auto [lo, hi] = common_span(p.a(), p.b(), v.a(), v.b(), "first_variation");
  auto f = [&](double x) {
    double y = p.y(x), yp = p.yp(x);
    return v.v(x) * L.eval(L.d2(), x, y, yp) + v.vp(x) * L.eval(L.d3(), x, y, yp);
  };
  return adaptive_integral(f, lo, hi);
}

namespace {

double quadratic_form(const jacobi::JacobiSystem& J,
                      const std::function<double(double)>& v,
                      const std::function<double(double)>& vp, double lo,
                      double hi, const std::vector<double>& breakpoints) {
  auto f = [&](double x) {
    double vv = v(x), vpv = vp(x);
    return J.P(x) * vpv * vpv + J.Q(x) * vv * vv;
  };
  std::vector<double> cuts{lo};
  for (double c : breakpoints)
    if (c > lo && c < hi) cuts.push_back(c);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) total += adaptive_integral(f, cuts[i], cuts[i + 1]);
  return total;
}

}  // namespace

double second_variation(const Lagrangian& L, const Path& p, const TestDirection& v) {
  auto [lo, hi] = common_span(p.a(), p.b(), v.a(), v.b(), "second_variation");
  auto J = jacobi::build_jacobi(L, p);
  return quadratic_form(
      J, [&](double x) { return v.v(x); }, [&](double x) { return v.vp(x); },
      lo, hi, {});
}

double second_variation(const Lagrangian& L, const Path& p,
                        const std::function<double(double)>& v,
                        const std::function<double(double)>& vp,
                        const std::vector<double>& breakpoints) {
  auto J = jacobi::build_jacobi(L, p);
  return quadratic_form(J, v, vp, p.a(), p.b(), breakpoints);
}

// ---------------------------------------------------------------------------
// Convexity certificate

Convexity convexity_certificate(const Lagrangian& L, const RegionBox& box,
                                const GridCounts& grid) {
  if (!(box.x_lo <= box.x_hi) || !(box.y_lo <= box.y_hi) ||
      !(box.yp_lo <= box.yp_hi))
    fail("convexity region box has inverted bounds");
  if (grid.nx < 1 || grid.ny < 1 || grid.nyp < 1)
    fail("convexity grid counts must be positive");
  auto coord = [](double lo, double hi, int i, int n) {
    if (n == 1) return 0.5 * (lo + hi);
    return lo + (hi - lo) * i / (n - 1);
  };
  struct Sample {
    double a22, a23, a33;
  };
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(grid.nx) * grid.ny * grid.nyp);
  double largest = 0.0;
  for (int i = 0; i < grid.nx; ++i) {
    double x = coord(box.x_lo, box.x_hi, i, grid.nx);
    for (int j = 0; j < grid.ny; ++j) {
      double y = coord(box.y_lo, box.y_hi, j, grid.ny);
      for (int k = 0; k < grid.nyp; ++k) {
        double yp = coord(box.yp_lo, box.yp_hi, k, grid.nyp);
        Sample s{};
        try {
          s.a22 = L.eval(L.d22(), x, y, yp);
          s.a23 = L.eval(L.d23(), x, y, yp);
          s.a33 = L.eval(L.d33(), x, y, yp);
        } catch (const ek::EvalError&) {
          // The integrand's second derivatives are not defined somewhere in
          // the box, so no definiteness claim can be certified over it.
          return Convexity::Inconclusive;
        }
        largest = std::max({largest, std::abs(s.a22), std::abs(s.a23), std::abs(s.a33)});
        samples.push_back(s);
      }
    }
  }
  double tol = 1e-10 * (1.0 + largest);
  bool convex = true, concave = true;
  for (const Sample& s : samples) {
    double det = s.a22 * s.a33 - s.a23 * s.a23;
    if (!(s.a22 >= -tol && s.a33 >= -tol && det >= -tol)) convex = false;
    if (!(s.a22 <= tol && s.a33 <= tol && det >= -tol)) concave = false;
    if (!convex && !concave) return Convexity::Inconclusive;
  }
  if (convex) return Convexity::Convex;
  if (concave) return Convexity::Concave;
  return Convexity::Inconclusive;
}

const char* to_string(Convexity c) {
  switch (c) {
    case Convexity::Convex: return "CONVEX";
    case Convexity::Concave: return "CONCAVE";
    case Convexity::Inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

// ---------------------------------------------------------------------------
// Friedrichs bound

FriedrichsResult friedrichs_check(const TestDirection& v) {
  double a = v.a(), b = v.b();
  auto sq = [&](double x) {
    double vv = v.v(x);
    return vv * vv;
  };
  auto dsq = [&](double x) {
    double vpv = v.vp(x);
    return vpv * vpv;
  };
  FriedrichsResult out{};
  out.lhs = adaptive_integral(sq, a, b, 1e-12);
  out.rhs = 0.5 * (b - a) * (b - a) * adaptive_integral(dsq, a, b, 1e-12);
  out.holds = out.lhs <= out.rhs + 1e-12;
  return out;
}

}  // namespace varmin::variational
