#pragma once

// Adaptive Dormand-Prince 5(4) integration with cubic Hermite dense output
// and zero-crossing event detection, plus bracketed root refinement and
// composite Gauss-Legendre quadrature.  States are Eigen vectors; the module
// knows nothing about symbolic expressions.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "varmin/expr.hpp"  // varmin::Error

namespace varmin::odeint {

using State = Eigen::VectorXd;
using Field = std::function<State(double, const State&)>;

struct EventSpec {
  std::function<double(double, const State&)> fn;
  enum class Direction { Any, Rising, Falling };
  Direction direction = Direction::Any;
  bool terminal = false;
};

struct EventHit {
  int event_index;  // position in the EventSpec list
  double x;
  State state;
};

enum class SolveStatus { Completed, EventStopped, BlowUp, StepFailure };

struct IntegrateOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double initial_step = 0.0;   // 0: choose automatically
  double max_step = 0.0;       // 0: |x1 - x0|
  double fixed_step = 0.0;     // >0: constant step size, no error control
  long max_steps = 1000000;
  double blowup_threshold = 1e12;
  int event_samples = 8;       // dense-output subdivisions scanned per step
};

/// Accepted trajectory with per-step cubic Hermite interpolation.  Immutable
/// after construction; safe to copy and to read from multiple threads.
class OdeSolution {
 public:
  SolveStatus status() const { return status_; }
  const std::vector<double>& nodes() const { return xs_; }
  const std::vector<State>& states() const { return ys_; }
  const std::vector<EventHit>& events() const { return events_; }

  double front_x() const { return xs_.front(); }
  /// Final reached x; for blow-up / step-failure this is the last good node.
  double back_x() const { return xs_.back(); }

  /// Interpolated state / state derivative.  x slightly outside the covered
  /// range extrapolates on the nearest segment.
  State value(double x) const;
  State derivative(double x) const;
  double value(double x, int component) const { return value(x)[component]; }

 private:
  friend OdeSolution integrate(const Field&, double, const State&, double,
                               const IntegrateOptions&,
                               const std::vector<EventSpec>&);
  std::size_t segment_of(double x) const;

  std::vector<double> xs_;
  std::vector<State> ys_;
  std::vector<State> fs_;  // state derivatives at the nodes
  std::vector<EventHit> events_;
  SolveStatus status_ = SolveStatus::Completed;
  bool forward_ = true;
};

/// Integrate s' = f(x, s) from (x0, s0) toward x1 (either direction).
/// EvalError thrown by the field during a trial step rejects the step; a
/// step that can no longer shrink reports StepFailure with the last good x.
OdeSolution integrate(const Field& f, double x0, const State& s0, double x1,
                      const IntegrateOptions& opts = {},
                      const std::vector<EventSpec>& events = {});

/// Brent-style safeguarded bisection/interpolation root refinement.
/// Requires g(lo) and g(hi) of opposite sign (or an exact zero at an end).
double refine_root(const std::function<double(double)>& g, double lo,
                   double hi, double tol);

struct QuadResult {
  double value;
  double error_estimate;  // |value - half-resolution value| + roundoff floor
};

/// Composite Gauss-Legendre quadrature with at least n nodes on [a, b].
QuadResult quadrature(const std::function<double(double)>& f, double a,
                      double b, int n);

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace varmin::odeint
