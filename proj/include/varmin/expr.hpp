#pragma once

// Immutable symbolic expressions in one independent variable x, a dependent
// variable y, its derivative yp, and named scalar parameters.  Supports
// parsing, evaluation, structural differentiation, and conservative
// simplification.  Trees are shared via shared_ptr; Expr is a cheap handle.

#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace varmin {

/// Base class for every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace exprkit {

/// The three built-in variables.
enum class Var { X, Y, Yp };

/// Named parameter values supplied at evaluation time.
using ParamBindings = std::map<std::string, double>;

/// Syntax error; `offset` is the byte position in the source string.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Domain violation or unbound parameter during evaluation.  The message
/// names the offending subexpression.
class EvalError : public Error {
 public:
  using Error::Error;
};

class Expr {
 public:
  enum class Kind {
    Constant,
    Variable,
    Parameter,
    Negate,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Call
  };

  /// Default-constructed Expr is the constant 0.
  Expr();
  Expr(double value);  // NOLINT: implicit by design, enables 2.0 * e

  static Expr constant(double value);
  static Expr variable(Var v);
  static Expr parameter(std::string name);
  static Expr call(std::string function, Expr argument);

  Kind kind() const;
  /// Constant value; only valid when kind() == Constant.
  double value() const;
  /// Variable identity; only valid when kind() == Variable.
  Var var() const;
  /// Parameter or function name; only valid for Parameter/Call.
  const std::string& name() const;
  std::size_t child_count() const;
  const Expr& child(std::size_t i) const;

  /// True iff this node is exactly Constant(v).
  bool is_constant(double v) const;

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;

  friend Expr make_binary(Expr::Kind k, Expr a, Expr b);
  friend Expr operator-(Expr e);
};

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr e);
Expr pow(Expr base, Expr exponent);

/// Structural equality (same tree shape; constants compared by ==).
bool struct_eq(const Expr& a, const Expr& b);

/// Parse source text.  Identifiers resolve to x/y/yp, then to a declared
/// parameter name; anything else is an error.  `^` is right-associative;
/// unary minus binds looser than `^`.  A minus sign directly in front of a
/// bare numeric literal folds into a negative constant so rendered
/// expressions round-trip.
Expr parse(std::string_view source, const std::set<std::string>& parameters = {});

/// Render to text that parse() maps back to a structurally equal tree.
std::string render(const Expr& e);

/// Evaluate at (x, y, yp) with the given parameter values.  Throws EvalError
/// on unbound parameters, division by zero, log of a non-positive value,
/// sqrt of a negative value, fractional powers of negative bases, or a
/// non-finite result.
double eval(const Expr& e, double x, double y, double yp,
            const ParamBindings& params = {});

/// Partial derivative with respect to a built-in variable (x, y, yp are
/// treated as mutually independent symbols).  Result is simplified.
Expr diff(const Expr& e, Var v);
/// Partial derivative with respect to a named parameter.  Result is simplified.
Expr diff(const Expr& e, const std::string& parameter);

/// Conservative, idempotent cleanup: constant folding and identity/zero
/// rules.  Never reorders operands or changes domain behavior beyond
/// removing exact-identity subtrees.
Expr simplify(const Expr& e);

/// Shortest decimal rendering of v that strtod maps back to exactly v.
std::string render_number(double v);

/// True iff `name` is one of the supported call functions.
bool is_known_function(const std::string& name);

}  // namespace exprkit
}  // namespace varmin
