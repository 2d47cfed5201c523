#pragma once

#include <stdexcept>
#include <string>

namespace filtkit {

// Cholesky pivot fell below the scale-invariant acceptance threshold.
struct NotSPD : std::runtime_error {
  explicit NotSPD(double pivot, const std::string& context = "matrix is not positive definite")
      : std::runtime_error(context + " (min pivot " + std::to_string(pivot) + ")"),
        min_pivot(pivot) {}
  double min_pivot;
};

// Linear system has no usable solution (singular operator, or a stationary
// covariance that cannot be PSD because the drift is not Hurwitz).
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoConvergence : std::runtime_error {
  NoConvergence(int iters, double res, const std::string& context)
      : std::runtime_error(context + " (" + std::to_string(iters) + " iterations, residual " +
                           std::to_string(res) + ")"),
        iterations(iters),
        residual(res) {}
  int iterations;
  double residual;
};

// Step size / horizon combination does not describe an integer grid.
struct InvalidStep : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A scheduled measurement instant does not coincide with a simulation grid point.
struct ScheduleOffGrid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trajectory and measurement record do not share a grid.
struct GridMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Moment-generating-function exponent too large to represent.
struct Overflow : std::overflow_error {
  using std::overflow_error::overflow_error;
};

struct TooFewSamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Covariance propagation left the PSD cone beyond the clipping band.
struct DivergedCovariance : std::runtime_error {
  DivergedCovariance(double min_eig, double trace, double t)
      : std::runtime_error("covariance diverged at t=" + std::to_string(t) + " (min eigenvalue " +
                           std::to_string(min_eig) + ", trace " + std::to_string(trace) + ")"),
        min_eigenvalue(min_eig),
        trace(trace),
        time(t) {}
  double min_eigenvalue;
  double trace;
  double time;
};

}  // namespace filtkit
