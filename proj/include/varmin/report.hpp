#pragma once

// Orchestrates the full analysis described by a problem file and assembles
// a deterministic JSON report: input echo, Legendre block, conjugate-point
// block, oscillation certificates, classification, and per-check timings.
// Field order is fixed; rendered reports for the same inputs are
// byte-identical except for the "timings_ms" object.

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "varmin/problem_file.hpp"

namespace varmin::cli {

struct RunResult {
  nlohmann::ordered_json report;
  /// 0: a verdict was produced.  2: the verdict is INDETERMINATE.
  /// 1: a pipeline error was embedded in the report.
  int exit_code = 0;
};

/// Run every enabled check and assemble the report.  `jobs` > 1 evaluates
/// the independent certificate blocks concurrently (the classification
/// itself always runs first); the assembled report does not depend on the
/// schedule.  Errors thrown by a check are embedded under that block and
/// the run reports exit code 1.
RunResult run_analysis(const ProblemFile& pf, int jobs = 1,
                       bool with_timings = true);

/// Derived quantity to sample in `emit_profile`.
enum class ProfileKind { P, Q, R, Field };

/// Maps "P" / "Q" / "r" / "field" to a kind; throws Error otherwise.
ProfileKind parse_profile_kind(const std::string& what);

/// Write `samples` rows of "x, value" for the chosen quantity along the
/// problem's candidate path.  For a degenerate left endpoint the normal-form
/// coefficient r is sampled from just inside the domain, where it is
/// defined; the emitted x column reports the actual sample locations.
void emit_profile(const ProblemFile& pf, ProfileKind what, int samples,
                  std::ostream& out);

const char* tool_name();
const char* tool_version();

}  // namespace varmin::cli
