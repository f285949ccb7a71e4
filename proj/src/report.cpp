#include "varmin/report.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <numbers>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "varmin/isoperimetric.hpp"
#include "varmin/jacobi.hpp"
#include "varmin/lagrangian.hpp"
#include "varmin/ode.hpp"
#include "varmin/variational.hpp"

namespace varmin::cli {

namespace {

using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::set<std::string> param_names(const exprkit::ParamBindings& params) {
  std::set<std::string> names;
  for (const auto& [k, v] : params) names.insert(k);
  return names;
}

ordered_json params_json(const exprkit::ParamBindings& params) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : params) j[k] = v;
  return j;
}

const char* interlace_name(jacobi::InterlaceVerdict v) {
  switch (v) {
    case jacobi::InterlaceVerdict::Alternating:
      return "alternating";
    case jacobi::InterlaceVerdict::Violated:
      return "violated";
    case jacobi::InterlaceVerdict::NotApplicable:
      return "not applicable";
  }
  return "?";
}

variational::Path build_path(const ProblemFile& pf,
                             const variational::Lagrangian& L) {
  if (pf.mode == PathMode::SolveIvp) {
    variational::Path p = variational::solve_el_ivp(
        L, pf.a, pf.b, pf.y_a, pf.yp_a, pf.analysis.singular_epsilon);
    if (p.truncated())
      throw variational::VariationalError(
          "the stationarity solve left the integrable region at x = " +
          exprkit::render_number(p.b()) + " (before b = " +
          exprkit::render_number(pf.b) + ")");
    return p;
  }
  exprkit::Expr e =
      exprkit::parse(pf.path_expression, param_names(pf.params));
  return variational::Path::analytic(e, pf.a, pf.b, pf.params);
}

ordered_json path_json(const ProblemFile& pf, const variational::Path& p) {
  ordered_json j = ordered_json::object();
  if (pf.mode == PathMode::SolveIvp) {
    j["mode"] = "solve_ivp";
    j["y_a"] = pf.y_a;
    j["yp_a"] = pf.yp_a;
  } else {
    j["mode"] = "analytic";
    j["expression"] = pf.path_expression;
  }
  j["y_at_b"] = p.y(p.b());
  return j;
}

ordered_json legendre_json(const jacobi::JacobiSystem& J) {
  jacobi::LegendreBlock lb = jacobi::legendre_check(J);
  ordered_json j = ordered_json::object();
  j["min_P"] = lb.min_P;
  j["max_P"] = lb.max_P;
  j["sign"] = lb.sign;
  j["uniform"] = lb.sign != 0;
  if (J.singular_left) j["degenerate_left_endpoint"] = true;
  return j;
}

ordered_json conjugate_json(const jacobi::ConjugateReport& rep,
                            double location_tolerance) {
  ordered_json j = ordered_json::object();
  if (rep.first)
    j["first"] = *rep.first;
  else
    j["first"] = nullptr;
  j["zeros"] = rep.zeros;
  j["simple"] = rep.simple;
  j["search_exhausted"] = rep.ceiling_reached;
  j["certificate"] = rep.certificate;
  j["location_tolerance"] = location_tolerance;
  return j;
}

ordered_json sturm_json(const jacobi::JacobiSystem& J) {
  ordered_json j = ordered_json::object();
  j["no_zeros_certificate"] =
      jacobi::no_zeros_certificate(J) ==
              jacobi::NoZerosVerdict::CertifiedNoConjugatePoints
          ? "certified: no conjugate points"
          : "not applicable";
  double lo = J.a + (J.singular_left ? 1e-3 * (J.b - J.a) : 0.0);
  jacobi::ComparisonBounds cb = jacobi::comparison_bounds(J, lo, J.b);
  ordered_json c = ordered_json::object();
  c["applicable"] = cb.applicable;
  if (cb.applicable) {
    c["gap_lower_bound"] = cb.gap_lo;
    c["gap_upper_bound"] = cb.gap_hi;
    jacobi::ConjugateReport rep = jacobi::first_conjugate_point(J);
    if (rep.zeros.size() >= 2) {
      double gmin = cb.gap_hi + 1.0, gmax = 0.0;
      for (std::size_t i = 0; i + 1 < rep.zeros.size(); ++i) {
        double g = rep.zeros[i + 1] - rep.zeros[i];
        gmin = std::min(gmin, g);
        gmax = std::max(gmax, g);
      }
      c["observed_gap_min"] = gmin;
      c["observed_gap_max"] = gmax;
      c["observed_within_bounds"] =
          gmin >= cb.gap_lo - 1e-6 && gmax <= cb.gap_hi + 1e-6;
    }
  }
  j["comparison"] = c;
  j["interlacing"] = interlace_name(jacobi::interlace_check(J));
  return j;
}

ordered_json riccati_json(const jacobi::JacobiSystem& J) {
  odeint::IntegrateOptions opts;
  opts.rtol = 1e-12;
  opts.atol = 1e-18;
  odeint::OdeSolution f = jacobi::jacobi_field(J, opts);
  std::vector<double> zeros;
  for (const odeint::EventHit& ev : f.events()) zeros.push_back(ev.x);
  double span = J.b - J.a;
  ordered_json pts = ordered_json::array();
  double maxabs = 0.0;
  for (double frac : {0.2, 0.35, 0.5, 0.65, 0.8}) {
    double x = J.a + frac * span;
    bool near_zero = false;
    for (double z : zeros)
      if (std::abs(x - z) < 0.08 * span) near_zero = true;
    if (near_zero) continue;
    try {
      double res = jacobi::riccati_residual(J, f, x);
      ordered_json pt = ordered_json::object();
      pt["x"] = x;
      pt["residual"] = res;
      pts.push_back(pt);
      maxabs = std::max(maxabs, std::abs(res));
    } catch (const Error&) {
      // Sample sits too close to a node of the field; skip it.
    }
  }
  ordered_json j = ordered_json::object();
  j["samples"] = pts;
  j["max_abs_residual"] = maxabs;
  return j;
}

ordered_json second_variation_json(const variational::Lagrangian& L,
                                   const variational::Path& p, int n) {
  double a = p.a(), span = p.b() - p.a();
  ordered_json vals = ordered_json::array();
  bool all_positive = true;
  for (int k = 1; k <= n; ++k) {
    double w = k * std::numbers::pi / span;
    auto v = [=](double x) { return std::sin(w * (x - a)); };
    auto vp = [=](double x) { return w * std::cos(w * (x - a)); };
    double q = variational::second_variation(L, p, v, vp);
    vals.push_back(q);
    if (!(q > 0.0)) all_positive = false;
  }
  ordered_json j = ordered_json::object();
  j["directions"] = "sin(k*pi*(x-a)/(b-a)), k = 1.." + std::to_string(n);
  j["values"] = vals;
  j["all_positive"] = all_positive;
  return j;
}

ordered_json classification_json(const jacobi::ClassificationReport& cls) {
  ordered_json j = ordered_json::object();
  j["verdict"] = jacobi::to_string(cls.verdict);
  if (cls.conjugate) j["conjugate_point"] = *cls.conjugate;
  j["valid_interval"] = {cls.valid_a, cls.valid_b};
  if (cls.convexity) j["convexity"] = variational::to_string(*cls.convexity);
  if (cls.coercivity_bound) j["coercivity_bound"] = *cls.coercivity_bound;
  j["reasons"] = cls.reasons;
  return j;
}

void run_variational(const ProblemFile& pf, int jobs, ordered_json& R,
                     ordered_json& timings, RunResult& out) {
  ordered_json tol = ordered_json::object();
  tol["critical_residual"] = "1e-8 * (1 + max |D2 L|)";
  tol["conjugate_location"] = pf.analysis.conjugate_tolerance;
  tol["legendre_margin"] = "min |P| > 1e-12 * max |P|";
  if (pf.analysis.singular_epsilon > 0.0)
    tol["singular_epsilon"] = pf.analysis.singular_epsilon;
  else
    tol["singular_epsilon"] = "default (1e-6 * max(1, b - a))";
  R["tolerances"] = tol;

  auto t0 = Clock::now();
  variational::Lagrangian L(
      exprkit::parse(pf.lagrangian, param_names(pf.params)), pf.params);
  variational::Path p = build_path(pf, L);
  timings["path"] = ms_since(t0);
  R["problem"]["path"] = path_json(pf, p);

  // The classification runs first: it owns the stationarity gate, and a
  // non-stationary path must abort the whole report.
  t0 = Clock::now();
  jacobi::ClassifyOptions copts;
  copts.try_convexity = pf.analysis.convexity;
  jacobi::ClassificationReport cls = jacobi::classify(L, p, copts);
  timings["classification"] = ms_since(t0);

  jacobi::JacobiSystem J = jacobi::build_jacobi(L, p);

  struct Block {
    const char* key;
    std::function<ordered_json()> fn;
  };
  std::vector<Block> blocks;
  if (pf.analysis.legendre)
    blocks.push_back({"legendre", [&J] { return legendre_json(J); }});
  if (pf.analysis.conjugate)
    blocks.push_back({"conjugate", [&J, &cls, &pf] {
                        jacobi::ConjugateReport rep =
                            cls.conjugate_report
                                ? *cls.conjugate_report
                                : jacobi::first_conjugate_point(J);
                        return conjugate_json(
                            rep, pf.analysis.conjugate_tolerance);
                      }});
  if (pf.analysis.sturm)
    blocks.push_back({"sturm", [&J] { return sturm_json(J); }});
  if (pf.analysis.second_variation_directions > 0)
    blocks.push_back({"second_variation", [&L, &p, &pf] {
                        return second_variation_json(
                            L, p, pf.analysis.second_variation_directions);
                      }});
  if (pf.analysis.riccati)
    blocks.push_back({"riccati", [&J] { return riccati_json(J); }});

  std::vector<ordered_json> results(blocks.size());
  std::vector<double> block_ms(blocks.size(), 0.0);
  auto eval_block = [&](std::size_t i) {
    auto tb = Clock::now();
    try {
      results[i] = blocks[i].fn();
    } catch (const Error& e) {
      results[i] = ordered_json{{"error", e.what()}};
    }
    block_ms[i] = ms_since(tb);
  };
  if (jobs > 1 && blocks.size() > 1) {
    std::vector<std::future<void>> futures;
    futures.reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i)
      futures.push_back(std::async(std::launch::async, eval_block, i));
    for (auto& f : futures) f.get();
  } else {
    for (std::size_t i = 0; i < blocks.size(); ++i) eval_block(i);
  }

  bool block_failed = false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    R[blocks[i].key] = results[i];
    timings[blocks[i].key] = block_ms[i];
    if (results[i].contains("error")) block_failed = true;
  }

  R["classification"] = classification_json(cls);
  if (block_failed)
    out.exit_code = 1;
  else
    out.exit_code =
        cls.verdict == jacobi::Verdict::Indeterminate ? 2 : 0;
}

void run_constrained(const ProblemFile& pf, ordered_json& R,
                     ordered_json& timings, RunResult& out) {
  ordered_json cons = ordered_json::object();
  cons["mass"] = 1.0;
  cons["second_moment"] = pf.sigma * pf.sigma;
  cons["sigma"] = pf.sigma;
  R["problem"]["constraints"] = cons;

  ordered_json tol = ordered_json::object();
  tol["residual_mass"] = 1e-12;
  tol["residual_second_moment"] = "1e-12 * sigma^2";
  R["tolerances"] = tol;

  isoperimetric::MomentProblem prob;
  prob.sigma = pf.sigma;
  isoperimetric::validate(prob);
  double W = prob.half_width_sigmas * prob.sigma;

  auto t0 = Clock::now();
  std::set<std::string> pn = {"s2"};
  exprkit::Expr h1 = exprkit::parse("exp(-x^2/(2*s2))", pn);
  exprkit::Expr h2 = exprkit::parse("x^2*exp(-x^2/(2*s2))", pn);
  exprkit::ParamBindings pb{{"s2", pf.sigma * pf.sigma}};
  double det = isoperimetric::determinant_test(h1, h2, -W, W, pb);
  timings["determinant"] = ms_since(t0);
  ordered_json dj = ordered_json::object();
  dj["pair"] = {"exp(-x^2/(2*sigma^2))", "x^2*exp(-x^2/(2*sigma^2))"};
  dj["value"] = det;
  dj["nonzero"] = std::abs(det) > 1e-10;
  R["determinant"] = dj;

  t0 = Clock::now();
  isoperimetric::MultiplierSolution sol =
      isoperimetric::solve_multipliers(prob);
  timings["multipliers"] = ms_since(t0);
  ordered_json mj = ordered_json::object();
  mj["lambda1"] = sol.lambda1;
  mj["lambda2"] = sol.lambda2;
  mj["iterations"] = sol.iterations;
  mj["residual_mass"] = sol.residual_mass;
  mj["residual_second_moment"] = sol.residual_moment;
  R["multipliers"] = mj;

  t0 = Clock::now();
  auto rho = [&sol](double x) { return isoperimetric::solved_density(sol, x); };
  double H = isoperimetric::entropy(rho, -W, W, prob.nodes);
  timings["entropy"] = ms_since(t0);
  ordered_json de = ordered_json::object();
  de["expression"] = "exp(-1 + lambda1 + lambda2*x^2)";
  de["at_zero"] = rho(0.0);
  de["entropy"] = H;
  R["density"] = de;

  // The integrand's concavity in the density upgrades stationarity to a
  // global maximum among admissible densities.
  t0 = Clock::now();
  variational::Lagrangian L(
      exprkit::parse(pf.lagrangian, param_names(pf.params)), pf.params);
  variational::RegionBox box{pf.a,  pf.b,          0.01 * rho(0.0),
                             1.2 * rho(0.0), -1.0, 1.0};
  variational::Convexity cx = variational::convexity_certificate(L, box);
  timings["classification"] = ms_since(t0);

  bool ok = cx == variational::Convexity::Concave && std::abs(det) > 1e-10;
  ordered_json cj = ordered_json::object();
  cj["verdict"] = ok ? "GLOBAL_MAXIMUM_BY_CONVEXITY" : "INDETERMINATE";
  cj["convexity"] = variational::to_string(cx);
  ordered_json reasons = ordered_json::array();
  if (std::abs(det) > 1e-10)
    reasons.push_back(
        "constraint variations are independent (nonzero determinant)");
  reasons.push_back("multipliers solved; both constraint residuals below "
                    "tolerance");
  if (cx == variational::Convexity::Concave)
    reasons.push_back(
        "integrand is concave in the density: the stationary density is "
        "the global maximizer under the constraints");
  cj["reasons"] = reasons;
  R["classification"] = cj;
  out.exit_code = ok ? 0 : 2;
}

}  // namespace

RunResult run_analysis(const ProblemFile& pf, int jobs, bool with_timings) {
  RunResult out;
  ordered_json& R = out.report;
  ordered_json timings = ordered_json::object();

  ordered_json tj = ordered_json::object();
  tj["name"] = tool_name();
  tj["version"] = tool_version();
  tj["report_schema"] = 1;
  R["tool"] = tj;

  ordered_json prob = ordered_json::object();
  prob["name"] = pf.name;
  prob["file"] = pf.source;
  prob["lagrangian"] = pf.lagrangian;
  prob["variable"] = pf.variable;
  prob["domain"] = {pf.a, pf.b};
  prob["parameters"] = params_json(pf.params);
  R["problem"] = prob;

  try {
    if (pf.constrained)
      run_constrained(pf, R, timings, out);
    else
      run_variational(pf, jobs, R, timings, out);
  } catch (const Error& e) {
    R["error"] = e.what();
    out.exit_code = 1;
  }
  if (with_timings) R["timings_ms"] = timings;
  return out;
}

ProfileKind parse_profile_kind(const std::string& what) {
  if (what == "P") return ProfileKind::P;
  if (what == "Q") return ProfileKind::Q;
  if (what == "r") return ProfileKind::R;
  if (what == "field") return ProfileKind::Field;
  throw Error("unknown profile quantity '" + what +
              "' (expected P, Q, r, or field)");
}

void emit_profile(const ProblemFile& pf, ProfileKind what, int samples,
                  std::ostream& out) {
  if (pf.constrained)
    throw Error("profiles are defined for variational problems, not "
                "constrained density problems");
  if (samples < 2) throw Error("profile needs at least 2 samples");

  variational::Lagrangian L(
      exprkit::parse(pf.lagrangian, param_names(pf.params)), pf.params);
  variational::Path p = build_path(pf, L);
  jacobi::JacobiSystem J = jacobi::build_jacobi(L, p);

  auto emit = [&](double x, double v) {
    out << exprkit::render_number(x) << ", " << exprkit::render_number(v)
        << "\n";
  };

  if (what == ProfileKind::Field) {
    odeint::OdeSolution f = jacobi::jacobi_field(J);
    double lo = f.front_x(), hi = f.back_x();
    for (int i = 0; i < samples; ++i) {
      double x = lo + (hi - lo) * i / (samples - 1);
      emit(x, f.value(x, 0));
    }
    return;
  }

  std::function<double(double)> g;
  double lo = J.a, hi = J.b;
  switch (what) {
    case ProfileKind::P: g = J.P; break;
    case ProfileKind::Q: g = J.Q; break;
    default:
      g = J.r;
      // The normal-form coefficient divides by P; start just inside a
      // degenerate endpoint, clear of the finite-difference stencil.
      if (J.singular_left)
        lo = J.a + std::max(1e-3 * (J.b - J.a), 8.0 * J.fd_step);
      break;
  }
  for (int i = 0; i < samples; ++i) {
    double x = lo + (hi - lo) * i / (samples - 1);
    emit(x, g(x));
  }
}

const char* tool_name() { return "varmin"; }
const char* tool_version() { return "0.1.0"; }

}  // namespace varmin::cli
