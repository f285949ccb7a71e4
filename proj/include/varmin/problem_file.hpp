#pragma once

// INI-style problem descriptions consumed by the command-line front end.
// A file declares the integrand, the domain, how the candidate path is
// produced (initial-value solve or a closed-form expression), which checks
// to run, and—for constrained density problems—the fixed second moment.
//
//   [problem]
//   lagrangian = "0.5*exp(beta*x)*(yp^2 - omega0^2*y^2)"
//   a = 0
//   b = 5
//
//   [params]
//   beta = 0.5
//   omega0 = 1
//
//   [path]
//   mode = solve_ivp
//   y_a = 0
//   yp_a = 1
//
// Values may be double-quoted (required only when they would otherwise be
// ambiguous); `#` and `;` start comments outside quotes.  Parsing is strict:
// unknown sections or keys, duplicates, and malformed values are errors that
// carry "<file>:<line>:" context, and no analysis runs on a malformed file.

#include <optional>
#include <string>

#include "varmin/expr.hpp"

namespace varmin::cli {

/// Malformed problem file; the message carries "<file>:<line>:" context.
class ProblemFileError : public Error {
 public:
  using Error::Error;
};

/// How the candidate path is obtained.
enum class PathMode { SolveIvp, Analytic };

/// Check toggles and numeric overrides from the [analysis] section.  All
/// checks default to on; overrides default to the library's own choices.
struct AnalysisToggles {
  bool legendre = true;
  bool conjugate = true;
  bool sturm = true;
  bool convexity = true;
  bool riccati = true;
  /// Number of leading sine-basis directions to evaluate the second
  /// variation on (0 disables the block).
  int second_variation_directions = 0;
  /// Start offset used when the acceleration coefficient vanishes at the
  /// left endpoint; <= 0 selects the default.
  double singular_epsilon = -1.0;
  /// Guaranteed accuracy of reported conjugate-point locations.
  double conjugate_tolerance = 1e-6;
};

struct ProblemFile {
  std::string name;        ///< file stem; used in reports and listings
  std::string source;      ///< path as given on the command line
  std::string lagrangian;  ///< integrand text, parsed against `params`
  double a = 0.0;
  double b = 0.0;
  std::string variable = "x";  ///< display name of the independent variable
  exprkit::ParamBindings params;

  /// Unset only for constrained problems, which determine their own
  /// stationary density.
  std::optional<PathMode> mode;
  double y_a = 0.0;             ///< solve_ivp initial value
  double yp_a = 0.0;            ///< solve_ivp initial slope
  std::string path_expression;  ///< analytic-mode path (x and params only)

  AnalysisToggles analysis;

  /// [constraints] present: unit mass and fixed second moment sigma^2.
  bool constrained = false;
  double sigma = 1.0;
};

/// Read and validate a problem file on disk.
ProblemFile load_problem_file(const std::string& path);

/// Parse problem text; `display_name` stands in for the file name in
/// error messages.
ProblemFile parse_problem_text(const std::string& text,
                               const std::string& display_name);

}  // namespace varmin::cli
