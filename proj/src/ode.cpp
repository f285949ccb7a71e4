#include "varmin/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace varmin::odeint {

using exprkit::EvalError;

// ---------------------------------------------------------------------------
// dense output

std::size_t OdeSolution::segment_of(double x) const {
  // index i such that x lies in [xs_[i], xs_[i+1]] (integration order)
  if (xs_.size() < 2) return 0;
  if (forward_) {
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - xs_.begin());
    if (i == 0) return 0;
    if (i >= xs_.size()) return xs_.size() - 2;
    return i - 1;
  }
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x,
                             [](double a, double b) { return a > b; });
  std::size_t i = static_cast<std::size_t>(it - xs_.begin());
  if (i == 0) return 0;
  if (i >= xs_.size()) return xs_.size() - 2;
  return i - 1;
}

State OdeSolution::value(double x) const {
  if (xs_.size() < 2) return ys_.front();
  std::size_t i = segment_of(x);
  double h = xs_[i + 1] - xs_[i];
  double t = (x - xs_[i]) / h;
  double t2 = t * t, t3 = t2 * t;
  double h00 = 2 * t3 - 3 * t2 + 1;
  double h10 = t3 - 2 * t2 + t;
  double h01 = -2 * t3 + 3 * t2;
  double h11 = t3 - t2;
  return h00 * ys_[i] + (h10 * h) * fs_[i] + h01 * ys_[i + 1] + (h11 * h) * fs_[i + 1];
}

State OdeSolution::derivative(double x) const {
  if (xs_.size() < 2) return fs_.front();
  std::size_t i = segment_of(x);
  double h = xs_[i + 1] - xs_[i];
  double t = (x - xs_[i]) / h;
  double t2 = t * t;
  double d00 = (6 * t2 - 6 * t) / h;
  double d10 = 3 * t2 - 4 * t + 1;
  double d01 = (-6 * t2 + 6 * t) / h;
  double d11 = 3 * t2 - 2 * t;
  return d00 * ys_[i] + d10 * fs_[i] + d01 * ys_[i + 1] + d11 * fs_[i + 1];
}

// ---------------------------------------------------------------------------
// integration

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                 e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                 e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

bool finite(const State& v) { return v.allFinite(); }

struct StepResult {
  State y1;      // 5th-order advance
  State f1;      // field at (x+h, y1)  (FSAL stage)
  double err;    // scaled error norm
  bool ok;       // field evaluable and all stages finite
};

StepResult try_step(const Field& f, double x, const State& y, const State& k1,
                    double h, double rtol, double atol) {
  StepResult r;
  r.ok = false;
  r.err = std::numeric_limits<double>::infinity();
  try {
    State k2 = f(x + c2 * h, y + h * (a21 * k1));
    State k3 = f(x + c3 * h, y + h * (a31 * k1 + a32 * k2));
    State k4 = f(x + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    State k5 = f(x + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    State k6 = f(x + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    State y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    State k7 = f(x + h, y1);
    if (!finite(k2) || !finite(k3) || !finite(k4) || !finite(k5) ||
        !finite(k6) || !finite(k7) || !finite(y1))
      return r;
    State e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double sc = atol + rtol * std::max(std::fabs(y[i]), std::fabs(y1[i]));
      double q = e[i] / sc;
      s += q * q;
    }
    r.err = std::sqrt(s / static_cast<double>(y.size()));
    r.y1 = std::move(y1);
    r.f1 = std::move(k7);
    r.ok = true;
  } catch (const EvalError&) {
    // field left its domain during a trial stage: treat as a failed step
  }
  return r;
}

double initial_step(const Field& f, double x0, const State& y0, const State& f0,
                    double dir, double span, double rtol, double atol) {
  auto scaled_rms = [&](const State& v, const State& rel) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      double sc = atol + rtol * std::fabs(rel[i]);
      double q = v[i] / sc;
      s += q * q;
    }
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  double d0 = scaled_rms(y0, y0);
  double d1 = scaled_rms(f0, y0);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  double h1 = h0;
  try {
    State y1 = y0 + (dir * h0) * f0;
    State f1 = f(x0 + dir * h0, y1);
    if (finite(f1)) {
      double d2 = scaled_rms(f1 - f0, y0) / h0;
      double dm = std::max(d1, d2);
      h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    }
  } catch (const EvalError&) {
    h1 = h0 * 1e-2;
  }
  return std::min({100.0 * h0, h1, span});
}

struct Candidate {
  int event_index;
  double x;
  bool terminal;
};

}  // namespace

OdeSolution integrate(const Field& f, double x0, const State& s0, double x1,
                      const IntegrateOptions& opts,
                      const std::vector<EventSpec>& events) {
  if (x0 == x1) throw Error("integrate: x0 and x1 coincide");
  if (opts.rtol <= 0.0 || opts.atol <= 0.0) throw Error("integrate: tolerances must be positive");

  OdeSolution sol;
  double dir = x1 > x0 ? 1.0 : -1.0;
  sol.forward_ = dir > 0;
  double span = std::fabs(x1 - x0);
  double hmax = opts.max_step > 0.0 ? std::min(opts.max_step, span) : span;

  State y = s0;
  State k1 = f(x0, y);  // a failure here is the caller's problem: propagate
  if (!finite(k1)) throw Error("integrate: field not finite at the initial point");
  double x = x0;

  sol.xs_.push_back(x);
  sol.ys_.push_back(y);
  sol.fs_.push_back(k1);
  sol.status_ = SolveStatus::Completed;

  const bool fixed = opts.fixed_step > 0.0;
  double h = fixed ? std::min(opts.fixed_step, span)
                   : initial_step(f, x0, y, k1, dir, hmax, opts.rtol, opts.atol);
  if (opts.initial_step > 0.0 && !fixed) h = std::min(opts.initial_step, hmax);

  // refinement tolerance for event abscissae
  auto event_tol = [&](double xa, double xb) {
    return 1e-12 * std::max(1.0, std::max(std::fabs(xa), std::fabs(xb)));
  };
  double last_hit_x = x0 - dir;  // sentinel: no hit yet
  bool have_hit = false;

  long steps = 0;
  while (dir * (x1 - x) > 0.0) {
    if (++steps > opts.max_steps) {
      sol.status_ = SolveStatus::StepFailure;
      break;
    }
    if (dir * (x + dir * h - x1) > 0.0) h = std::fabs(x1 - x);  // snap to the end

    StepResult st = try_step(f, x, y, k1, dir * h, opts.rtol, opts.atol);
    bool accept = st.ok && (fixed || st.err <= 1.0);
    if (!accept) {
      if (fixed) {  // no smaller step to fall back to
        sol.status_ = SolveStatus::StepFailure;
        break;
      }
      double shrink = st.ok ? std::max(0.2, 0.9 * std::pow(st.err, -0.2)) : 0.25;
      h *= std::min(shrink, 1.0);
      if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(x))) {
        sol.status_ = SolveStatus::StepFailure;
        break;
      }
      continue;
    }

    double xl = x, xr = x + dir * h;
    x = xr;
    y = st.y1;
    k1 = st.f1;
    sol.xs_.push_back(x);
    sol.ys_.push_back(y);
    sol.fs_.push_back(k1);

    // event scan on the freshly appended segment
    if (!events.empty()) {
      int m = std::max(2, opts.event_samples);
      std::vector<Candidate> hits;
      double tol = event_tol(xl, xr);
      for (std::size_t ei = 0; ei < events.size(); ++ei) {
        const EventSpec& ev = events[ei];
        double prev_t = xl;
        double prev_g = ev.fn(prev_t, sol.value(prev_t));
        for (int j = 1; j <= m; ++j) {
          double t = xl + (xr - xl) * (static_cast<double>(j) / m);
          double g = ev.fn(t, sol.value(t));
          auto dir_ok = [&](bool up) {
            return ev.direction == EventSpec::Direction::Any ||
                   (up ? ev.direction == EventSpec::Direction::Rising
                       : ev.direction == EventSpec::Direction::Falling);
          };
          if (prev_g == 0.0) {
            // zero exactly on a sample point
            bool initial = std::fabs(prev_t - x0) <= 50.0 * tol;
            bool dup = have_hit && std::fabs(prev_t - last_hit_x) <= 50.0 * tol;
            if (!initial && !dup && dir_ok(g > 0.0))
              hits.push_back({static_cast<int>(ei), prev_t, ev.terminal});
          } else if (prev_g * g < 0.0 && dir_ok(g > 0.0)) {
            double lo = std::min(prev_t, t), hi = std::max(prev_t, t);
            auto gg = [&](double xx) { return ev.fn(xx, sol.value(xx)); };
            double root = refine_root(gg, lo, hi, tol);
            bool dup = have_hit && std::fabs(root - last_hit_x) <= 50.0 * tol;
            if (!dup) hits.push_back({static_cast<int>(ei), root, ev.terminal});
          }
          prev_t = t;
          prev_g = g;
        }
      }
      std::sort(hits.begin(), hits.end(), [&](const Candidate& a, const Candidate& b) {
        return dir * (a.x - b.x) < 0.0;
      });
      bool stop = false;
      for (const Candidate& c : hits) {
        sol.events_.push_back({c.event_index, c.x, sol.value(c.x)});
        last_hit_x = c.x;
        have_hit = true;
        if (c.terminal) {
          // truncate the trajectory at the event
          State ys = sol.value(c.x);
          State fs = sol.derivative(c.x);
          while (!sol.xs_.empty() && dir * (sol.xs_.back() - c.x) > 0.0) {
            sol.xs_.pop_back();
            sol.ys_.pop_back();
            sol.fs_.pop_back();
          }
          if (!sol.xs_.empty() && sol.xs_.back() == c.x) {
            sol.ys_.back() = ys;
            sol.fs_.back() = fs;
          } else {
            sol.xs_.push_back(c.x);
            sol.ys_.push_back(ys);
            sol.fs_.push_back(fs);
          }
          sol.status_ = SolveStatus::EventStopped;
          stop = true;
          break;
        }
      }
      if (stop) return sol;
    }

    if (y.cwiseAbs().maxCoeff() > opts.blowup_threshold) {
      sol.status_ = SolveStatus::BlowUp;
      break;
    }

    if (!fixed) {
      double fac = st.err <= 0.0 ? 5.0 : 0.9 * std::pow(st.err, -0.2);
      h = std::min(hmax, h * std::clamp(fac, 0.2, 5.0));
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------
// root refinement (Brent)

double refine_root(const std::function<double(double)>& g, double lo,
                   double hi, double tol) {
  double a = lo, b = hi;
  double fa = g(a), fb = g(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw Error("refine_root: invalid bracket, no sign change on [" +
                exprkit::render_number(lo) + ", " + exprkit::render_number(hi) + "]");
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < 200; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a; fc = fa; d = b - a; e = d;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * tol;
    double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0) return b;
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      // secant / inverse quadratic interpolation
      double p, q;
      double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        double qq = fa / fc, r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
        e = d; d = p / q;
      } else {
        d = xm; e = d;  // interpolation rejected: bisect
      }
    } else {
      d = xm; e = d;
    }
    a = b; fa = fb;
    b += std::fabs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = g(b);
  }
  return b;
}

// ---------------------------------------------------------------------------
// quadrature

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw Error("gauss_legendre: need at least one node");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev estimate, then Newton on the Legendre polynomial
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double dz = p1 / pp;
      z -= dz;
      if (std::fabs(dz) < 1e-15) break;
    }
    nodes[i] = -z;
    nodes[n - 1 - i] = z;
    weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

namespace {

double composite_gl(const std::function<double(double)>& f, double a, double b, int n) {
  // consistent family: one ≤32-point panel, else ceil(n/32) panels of 32, so
  // halving/doubling n stays within the same convergence regime
  int per_panel = n <= 32 ? n : 32;
  int panels = n <= 32 ? 1 : (n + 31) / 32;
  std::vector<double> xs, ws;
  gauss_legendre(per_panel, xs, ws);
  double total = 0.0;
  double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * width;
    double mid = lo + 0.5 * width, half = 0.5 * width;
    double acc = 0.0;
    for (int i = 0; i < per_panel; ++i) {
      double xx = mid + half * xs[i];
      double v = f(xx);
      if (!std::isfinite(v))
        throw Error("quadrature: non-finite integrand sample at x = " +
                    exprkit::render_number(xx));
      acc += ws[i] * v;
    }
    total += acc * half;
  }
  return total;
}

}  // namespace

QuadResult quadrature(const std::function<double(double)>& f, double a,
                      double b, int n) {
  if (!(a < b)) throw Error("quadrature: requires a < b");
  if (n < 2) throw Error("quadrature: need at least two nodes");
  double full = composite_gl(f, a, b, n);
  double half = composite_gl(f, a, b, std::max(2, n / 2));
  // roundoff floor scales with the number of summed samples
  double est = std::fabs(full - half) +
               std::max(4, n) * std::numeric_limits<double>::epsilon() * (1.0 + std::fabs(full));
  return {full, est};
}

}  // namespace varmin::odeint
