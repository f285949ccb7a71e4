#include "varmin/expr.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <utility>

namespace varmin::exprkit {

struct Expr::Node {
  Kind kind;
  double value = 0.0;        // Constant
  Var var = Var::X;          // Variable
  std::string name;          // Parameter / Call
  std::vector<Expr> kids;
};

Expr::Expr() : Expr(0.0) {}

Expr::Expr(double value) {
  Node n;
  n.kind = Kind::Constant;
  n.value = value;
  node_ = std::make_shared<const Node>(std::move(n));
}

Expr Expr::constant(double value) { return Expr(value); }

Expr Expr::variable(Var v) {
  Node n;
  n.kind = Kind::Variable;
  n.var = v;
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::parameter(std::string name) {
  Node n;
  n.kind = Kind::Parameter;
  n.name = std::move(name);
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::call(std::string function, Expr argument) {
  Node n;
  n.kind = Kind::Call;
  n.name = std::move(function);
  n.kids.push_back(std::move(argument));
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
Var Expr::var() const { return node_->var; }
const std::string& Expr::name() const { return node_->name; }
std::size_t Expr::child_count() const { return node_->kids.size(); }
const Expr& Expr::child(std::size_t i) const { return node_->kids[i]; }

bool Expr::is_constant(double v) const {
  return node_->kind == Kind::Constant && node_->value == v;
}

Expr make_binary(Expr::Kind k, Expr a, Expr b) {
  Expr::Node n;
  n.kind = k;
  n.kids.push_back(std::move(a));
  n.kids.push_back(std::move(b));
  return Expr(std::make_shared<const Expr::Node>(std::move(n)));
}

Expr operator+(Expr a, Expr b) { return make_binary(Expr::Kind::Add, std::move(a), std::move(b)); }
Expr operator-(Expr a, Expr b) { return make_binary(Expr::Kind::Sub, std::move(a), std::move(b)); }
Expr operator*(Expr a, Expr b) { return make_binary(Expr::Kind::Mul, std::move(a), std::move(b)); }
Expr operator/(Expr a, Expr b) { return make_binary(Expr::Kind::Div, std::move(a), std::move(b)); }
Expr pow(Expr base, Expr exponent) {
  return make_binary(Expr::Kind::Pow, std::move(base), std::move(exponent));
}

Expr operator-(Expr e) {
  Expr::Node n;
  n.kind = Expr::Kind::Negate;
  n.kids.push_back(std::move(e));
  return Expr(std::make_shared<const Expr::Node>(std::move(n)));
}

bool struct_eq(const Expr& a, const Expr& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Expr::Kind::Constant:
      return a.value() == b.value();
    case Expr::Kind::Variable:
      return a.var() == b.var();
    case Expr::Kind::Parameter:
      return a.name() == b.name();
    case Expr::Kind::Call:
      if (a.name() != b.name()) return false;
      break;
    default:
      break;
  }
  if (a.child_count() != b.child_count()) return false;
  for (std::size_t i = 0; i < a.child_count(); ++i)
    if (!struct_eq(a.child(i), b.child(i))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

[[noreturn]] void eval_fail(const std::string& what, const Expr& e) {
  throw EvalError(what + " in \"" + render(e) + "\"");
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

double eval_call(const Expr& e, double arg) {
  const std::string& f = e.name();
  if (f == "sin") return std::sin(arg);
  if (f == "cos") return std::cos(arg);
  if (f == "tan") {
    double c = std::cos(arg);
    if (c == 0.0) eval_fail("tangent pole", e);
    return std::sin(arg) / c;
  }
  if (f == "sec") {
    double c = std::cos(arg);
    if (c == 0.0) eval_fail("secant pole", e);
    return 1.0 / c;
  }
  if (f == "exp") return std::exp(arg);
  if (f == "log") {
    if (arg <= 0.0) eval_fail("log of a non-positive value", e);
    return std::log(arg);
  }
  if (f == "sqrt") {
    if (arg < 0.0) eval_fail("sqrt of a negative value", e);
    return std::sqrt(arg);
  }
  if (f == "sinh") return std::sinh(arg);
  if (f == "cosh") return std::cosh(arg);
  if (f == "tanh") return std::tanh(arg);
  if (f == "asinh") return std::asinh(arg);
  if (f == "atan") return std::atan(arg);
  if (f == "abs") return std::fabs(arg);
  if (f == "sign") return arg > 0.0 ? 1.0 : (arg < 0.0 ? -1.0 : 0.0);
  eval_fail("unknown function \"" + f + "\"", e);
}

double eval_rec(const Expr& e, double x, double y, double yp,
                const ParamBindings& params) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return e.value();
    case Expr::Kind::Variable:
      switch (e.var()) {
        case Var::X: return x;
        case Var::Y: return y;
        case Var::Yp: return yp;
      }
      break;
    case Expr::Kind::Parameter: {
      auto it = params.find(e.name());
      if (it == params.end()) eval_fail("unbound parameter \"" + e.name() + "\"", e);
      return it->second;
    }
    case Expr::Kind::Negate:
      return -eval_rec(e.child(0), x, y, yp, params);
    case Expr::Kind::Add:
      return eval_rec(e.child(0), x, y, yp, params) + eval_rec(e.child(1), x, y, yp, params);
    case Expr::Kind::Sub:
      return eval_rec(e.child(0), x, y, yp, params) - eval_rec(e.child(1), x, y, yp, params);
    case Expr::Kind::Mul:
      return eval_rec(e.child(0), x, y, yp, params) * eval_rec(e.child(1), x, y, yp, params);
    case Expr::Kind::Div: {
      double num = eval_rec(e.child(0), x, y, yp, params);
      double den = eval_rec(e.child(1), x, y, yp, params);
      if (den == 0.0) eval_fail("division by zero", e);
      return num / den;
    }
    case Expr::Kind::Pow: {
      double base = eval_rec(e.child(0), x, y, yp, params);
      double exponent = eval_rec(e.child(1), x, y, yp, params);
      if (base == 0.0 && exponent < 0.0) eval_fail("zero raised to a negative power", e);
      if (base < 0.0 && !is_integer(exponent))
        eval_fail("fractional power of a negative base", e);
      return std::pow(base, exponent);
    }
    case Expr::Kind::Call:
      return eval_call(e, eval_rec(e.child(0), x, y, yp, params));
  }
  eval_fail("malformed expression", e);
}

}  // namespace

double eval(const Expr& e, double x, double y, double yp,
            const ParamBindings& params) {
  double v = eval_rec(e, x, y, yp, params);
  if (!std::isfinite(v)) eval_fail("non-finite result", e);
  return v;
}

bool is_known_function(const std::string& name) {
  static const std::set<std::string> known = {
      "sin", "cos", "tan", "sec", "exp", "log", "sqrt",
      "sinh", "cosh", "tanh", "asinh", "atan", "abs", "sign"};
  return known.count(name) > 0;
}

// ---------------------------------------------------------------------------
// simplification
//
// Smart constructors s_*: given already-simplified operands, apply local
// rewrite rules until none fires.  Every rewrite builds its pieces through
// other smart constructors, so any subtree of a returned expression is itself
// a fixed point — that makes simplify idempotent.  Termination: each rule
// strictly reduces node count, constant count, or moves a Negate toward the
// root (and nothing moves one back down).

namespace {

bool is_const(const Expr& e) { return e.kind() == Expr::Kind::Constant; }

// Fold an all-constant node when it evaluates cleanly to a finite value.
bool try_fold(const Expr& e, Expr& out) {
  for (std::size_t i = 0; i < e.child_count(); ++i)
    if (!is_const(e.child(i))) return false;
  try {
    out = Expr(eval(e, 0.0, 0.0, 0.0));
    return true;
  } catch (const EvalError&) {
    return false;  // domain edge, e.g. (-2)^0.5 or 1/0: keep symbolic
  }
}

Expr s_neg(Expr u);
Expr s_add(Expr a, Expr b);
Expr s_sub(Expr a, Expr b);
Expr s_mul(Expr a, Expr b);
Expr s_div(Expr a, Expr b);
Expr s_pow(Expr a, Expr b);

Expr s_neg(Expr u) {
  if (is_const(u)) return Expr(-u.value());
  if (u.kind() == Expr::Kind::Negate) return u.child(0);
  return -std::move(u);
}

Expr s_add(Expr a, Expr b) {
  Expr folded;
  if (is_const(a) && is_const(b) && try_fold(a + b, folded)) return folded;
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (b.kind() == Expr::Kind::Negate) return s_sub(std::move(a), b.child(0));
  // (u + c1) + c2 and (c1 + u) + c2 gather their constants
  if (is_const(b) && a.kind() == Expr::Kind::Add) {
    if (is_const(a.child(1))) {
      double c = a.child(1).value() + b.value();
      if (std::isfinite(c)) return s_add(a.child(0), Expr(c));
    }
    if (is_const(a.child(0))) {
      double c = a.child(0).value() + b.value();
      if (std::isfinite(c)) return s_add(Expr(c), a.child(1));
    }
  }
  return std::move(a) + std::move(b);
}

Expr s_sub(Expr a, Expr b) {
  Expr folded;
  if (is_const(a) && is_const(b) && try_fold(a - b, folded)) return folded;
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return s_neg(std::move(b));
  if (struct_eq(a, b)) return Expr(0.0);
  if (b.kind() == Expr::Kind::Negate) return s_add(std::move(a), b.child(0));
  // (u + c1) - c2 and (c1 + u) - c2 gather their constants
  if (is_const(b) && a.kind() == Expr::Kind::Add) {
    if (is_const(a.child(1))) {
      double c = a.child(1).value() - b.value();
      if (std::isfinite(c)) return s_add(a.child(0), Expr(c));
    }
    if (is_const(a.child(0))) {
      double c = a.child(0).value() - b.value();
      if (std::isfinite(c)) return s_add(Expr(c), a.child(1));
    }
  }
  return std::move(a) - std::move(b);
}

Expr s_mul(Expr a, Expr b) {
  Expr folded;
  if (is_const(a) && is_const(b) && try_fold(a * b, folded)) return folded;
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return s_neg(std::move(b));
  if (b.is_constant(-1.0)) return s_neg(std::move(a));
  if (a.kind() == Expr::Kind::Negate) return s_neg(s_mul(a.child(0), std::move(b)));
  if (b.kind() == Expr::Kind::Negate) return s_neg(s_mul(std::move(a), b.child(0)));
  // gather constants toward the front: c1*(c2*u), c1*(u*c2), (c2*u)*c1, (u*c2)*c1
  if (is_const(a) && b.kind() == Expr::Kind::Mul) {
    if (is_const(b.child(0))) {
      double c = a.value() * b.child(0).value();
      if (std::isfinite(c)) return s_mul(Expr(c), b.child(1));
    }
    if (is_const(b.child(1))) {
      double c = a.value() * b.child(1).value();
      if (std::isfinite(c)) return s_mul(Expr(c), b.child(0));
    }
  }
  if (is_const(b) && a.kind() == Expr::Kind::Mul) {
    if (is_const(a.child(0))) {
      double c = b.value() * a.child(0).value();
      if (std::isfinite(c)) return s_mul(Expr(c), a.child(1));
    }
    if (is_const(a.child(1))) {
      double c = b.value() * a.child(1).value();
      if (std::isfinite(c)) return s_mul(Expr(c), a.child(0));
    }
  }
  return std::move(a) * std::move(b);
}

Expr s_div(Expr a, Expr b) {
  Expr folded;
  if (is_const(a) && is_const(b)) {
    if (try_fold(a / b, folded)) return folded;
    return std::move(a) / std::move(b);  // 1/0 etc.: leave for eval to report
  }
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(0.0)) return Expr(0.0);
  if (struct_eq(a, b)) return Expr(1.0);
  if (a.kind() == Expr::Kind::Negate) return s_neg(s_div(a.child(0), std::move(b)));
  if (b.kind() == Expr::Kind::Negate) return s_neg(s_div(std::move(a), b.child(0)));
  // (c1 * u) / c2  ->  (c1/c2) * u
  if (is_const(b) && b.value() != 0.0 && a.kind() == Expr::Kind::Mul) {
    if (is_const(a.child(0))) {
      double c = a.child(0).value() / b.value();
      if (std::isfinite(c)) return s_mul(Expr(c), a.child(1));
    }
    if (is_const(a.child(1))) {
      double c = a.child(1).value() / b.value();
      if (std::isfinite(c)) return s_mul(Expr(c), a.child(0));
    }
  }
  // (u * v) / u and (u * v) / v cancel the shared factor
  if (a.kind() == Expr::Kind::Mul) {
    if (struct_eq(a.child(0), b)) return a.child(1);
    if (struct_eq(a.child(1), b)) return a.child(0);
  }
  return std::move(a) / std::move(b);
}

Expr s_pow(Expr a, Expr b) {
  Expr folded;
  if (is_const(a) && is_const(b)) {
    if (try_fold(pow(a, b), folded)) return folded;
    return pow(std::move(a), std::move(b));
  }
  if (b.is_constant(1.0)) return a;
  if (b.is_constant(0.0)) return Expr(1.0);  // e^0 = 1 convention
  if (a.is_constant(1.0)) return Expr(1.0);
  return pow(std::move(a), std::move(b));
}

Expr s_call(const std::string& f, Expr u) {
  Expr node = Expr::call(f, std::move(u));
  Expr folded;
  if (try_fold(node, folded)) return folded;
  return node;
}

Expr simplify_rec(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
    case Expr::Kind::Variable:
    case Expr::Kind::Parameter:
      return e;
    case Expr::Kind::Negate:
      return s_neg(simplify_rec(e.child(0)));
    case Expr::Kind::Add:
      return s_add(simplify_rec(e.child(0)), simplify_rec(e.child(1)));
    case Expr::Kind::Sub:
      return s_sub(simplify_rec(e.child(0)), simplify_rec(e.child(1)));
    case Expr::Kind::Mul:
      return s_mul(simplify_rec(e.child(0)), simplify_rec(e.child(1)));
    case Expr::Kind::Div:
      return s_div(simplify_rec(e.child(0)), simplify_rec(e.child(1)));
    case Expr::Kind::Pow:
      return s_pow(simplify_rec(e.child(0)), simplify_rec(e.child(1)));
    case Expr::Kind::Call:
      return s_call(e.name(), simplify_rec(e.child(0)));
  }
  return e;
}

}  // namespace

Expr simplify(const Expr& e) { return simplify_rec(e); }

// ---------------------------------------------------------------------------
// differentiation

namespace {

bool is_zero(const Expr& e) { return e.is_constant(0.0); }

Expr d_call(const Expr& e, const Expr& darg) {
  const Expr& u = e.child(0);
  const std::string& f = e.name();
  Expr inner;
  if (f == "sin") inner = Expr::call("cos", u);
  else if (f == "cos") inner = -Expr::call("sin", u);
  else if (f == "tan") inner = Expr(1.0) + Expr::call("tan", u) * Expr::call("tan", u);
  else if (f == "sec") inner = Expr::call("sec", u) * Expr::call("tan", u);
  else if (f == "exp") inner = e;
  else if (f == "log") inner = Expr(1.0) / u;
  else if (f == "sqrt") inner = Expr(1.0) / (Expr(2.0) * e);
  else if (f == "sinh") inner = Expr::call("cosh", u);
  else if (f == "cosh") inner = Expr::call("sinh", u);
  else if (f == "tanh") inner = Expr(1.0) - Expr::call("tanh", u) * Expr::call("tanh", u);
  else if (f == "asinh") inner = Expr(1.0) / Expr::call("sqrt", Expr(1.0) + u * u);
  else if (f == "atan") inner = Expr(1.0) / (Expr(1.0) + u * u);
  else if (f == "abs") inner = Expr::call("sign", u);  // non-smooth; sign(0)=0
  else if (f == "sign") inner = Expr(0.0);             // flat away from the kink
  else throw EvalError("cannot differentiate unknown function \"" + f + "\"");
  return inner * darg;
}

// Derivative against an abstract "is this leaf the differentiation target"
// predicate, shared by the variable and parameter overloads.
template <typename Hit>
Expr d_rec(const Expr& e, const Hit& hit) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return Expr(0.0);
    case Expr::Kind::Variable:
    case Expr::Kind::Parameter:
      return hit(e) ? Expr(1.0) : Expr(0.0);
    case Expr::Kind::Negate:
      return -d_rec(e.child(0), hit);
    case Expr::Kind::Add:
      return d_rec(e.child(0), hit) + d_rec(e.child(1), hit);
    case Expr::Kind::Sub:
      return d_rec(e.child(0), hit) - d_rec(e.child(1), hit);
    case Expr::Kind::Mul: {
      const Expr &u = e.child(0), &v = e.child(1);
      return d_rec(u, hit) * v + u * d_rec(v, hit);
    }
    case Expr::Kind::Div: {
      const Expr &u = e.child(0), &v = e.child(1);
      Expr du = d_rec(u, hit), dv = d_rec(v, hit);
      if (is_zero(simplify(dv))) return du / v;
      return (du * v - u * dv) / (v * v);
    }
    case Expr::Kind::Pow: {
      const Expr &u = e.child(0), &v = e.child(1);
      Expr du = d_rec(u, hit), dv = d_rec(v, hit);
      bool dv0 = is_zero(simplify(dv));
      bool du0 = is_zero(simplify(du));
      if (dv0 && du0) return Expr(0.0);
      if (dv0) return v * pow(u, simplify(v - Expr(1.0))) * du;  // power rule
      if (du0) return e * Expr::call("log", u) * dv;             // exponential rule
      return e * (dv * Expr::call("log", u) + v * du / u);
    }
    case Expr::Kind::Call:
      return d_call(e, d_rec(e.child(0), hit));
  }
  throw EvalError("malformed expression");
}

}  // namespace

Expr diff(const Expr& e, Var v) {
  auto hit = [v](const Expr& leaf) {
    return leaf.kind() == Expr::Kind::Variable && leaf.var() == v;
  };
  return simplify(d_rec(e, hit));
}

Expr diff(const Expr& e, const std::string& parameter) {
  auto hit = [&parameter](const Expr& leaf) {
    return leaf.kind() == Expr::Kind::Parameter && leaf.name() == parameter;
  };
  return simplify(d_rec(e, hit));
}

// ---------------------------------------------------------------------------
// rendering

std::string render_number(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

// Effective precedence for parenthesization: 0 add/sub, 1 mul/div,
// 2 unary minus (and negative constants, which print a leading '-'),
// 3 pow, 4 atoms.
int effective_prec(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub: return 0;
    case Expr::Kind::Mul:
    case Expr::Kind::Div: return 1;
    case Expr::Kind::Negate: return 2;
    case Expr::Kind::Pow: return 3;
    case Expr::Kind::Constant:
      return e.value() < 0.0 ? 2 : 4;
    default: return 4;
  }
}

// min_prec: the weakest precedence this position accepts without parens.
// The values below mirror the parse grammar: '+'/'-' right operands are
// terms (min 1), '*'/'/' right operands are factors (min 2), '^' operands
// are atoms on the left (min 4) and factors on the right (min 2), unary
// minus takes a factor that must not itself start with '-' (min 3).
void render_rec(const Expr& e, std::string& out, int min_prec) {
  bool parens = effective_prec(e) < min_prec;
  if (parens) out += '(';
  switch (e.kind()) {
    case Expr::Kind::Constant:
      out += render_number(e.value());
      break;
    case Expr::Kind::Variable:
      out += e.var() == Var::X ? "x" : (e.var() == Var::Y ? "y" : "yp");
      break;
    case Expr::Kind::Parameter:
      out += e.name();
      break;
    case Expr::Kind::Negate: {
      out += '-';
      const Expr& u = e.child(0);
      // a bare literal right after '-' would re-lex as one negative
      // constant; parenthesize so the Negate node survives a round trip
      if (u.kind() == Expr::Kind::Constant && u.value() >= 0.0) {
        out += '(';
        render_rec(u, out, 0);
        out += ')';
      } else {
        render_rec(u, out, 3);
      }
      break;
    }
    case Expr::Kind::Add:
      render_rec(e.child(0), out, 0);
      out += '+';
      render_rec(e.child(1), out, 1);
      break;
    case Expr::Kind::Sub:
      render_rec(e.child(0), out, 0);
      out += '-';
      render_rec(e.child(1), out, 1);
      break;
    case Expr::Kind::Mul:
      render_rec(e.child(0), out, 1);
      out += '*';
      render_rec(e.child(1), out, 2);
      break;
    case Expr::Kind::Div:
      render_rec(e.child(0), out, 1);
      out += '/';
      render_rec(e.child(1), out, 2);
      break;
    case Expr::Kind::Pow:
      render_rec(e.child(0), out, 4);
      out += '^';
      render_rec(e.child(1), out, 2);
      break;
    case Expr::Kind::Call:
      out += e.name();
      out += '(';
      render_rec(e.child(0), out, 0);
      out += ')';
      break;
  }
  if (parens) out += ')';
}

}  // namespace

std::string render(const Expr& e) {
  std::string out;
  render_rec(e, out, 0);
  return out;
}

}  // namespace varmin::exprkit
