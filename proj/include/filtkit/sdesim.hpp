#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "filtkit/models.hpp"
#include "filtkit/noise.hpp"

namespace filtkit {

// States on the uniform grid t_k = t0 + k dt, k = 0..N, column k of `states`.
struct SamplePath {
  std::vector<double> times;
  Matrix states;  // n x (N+1)
  double dt = 0.0;
};

struct MeasurementRecord {
  enum class Kind { Discrete, Continuous };
  Kind kind = Kind::Discrete;
  std::vector<double> times;  // instants (discrete) or increment start times (continuous)
  Matrix values;              // m x times.size(); y_k or dz_k
  double dt = 0.0;            // grid step for continuous increments
};

namespace sdesim {

// Stream indices carving independent substreams out of one seed.
inline constexpr std::uint64_t kStateStream = 0;
inline constexpr std::uint64_t kDiscreteMeasStream = 1;
inline constexpr std::uint64_t kContinuousMeasStream = 2;

// Euler-Maruyama from t=0 to T. Throws InvalidStep unless dt > 0 and T/dt is
// within 0.5 of an integer; the step count is the rounded quotient.
SamplePath simulate_ito(const LinearStateModel& model, const Vector& x0, double dt, double T,
                        std::uint64_t seed);

// Bilinear coefficients read as Ito drift and diffusion.
SamplePath simulate_ito(const BilinearStateModel& model, const Vector& x0, double dt, double T,
                        std::uint64_t seed);

// Stratonovich-Heun: diffusion predictor x_p = x + a dt + S(x,t) dW, corrector
// averages S(x,t) and S(x_p, t+dt); the drift is not averaged. Identical
// noise draws to simulate_ito for the same (seed, dims).
SamplePath simulate_stratonovich(const BilinearStateModel& model, const Vector& x0, double dt,
                                 double T, std::uint64_t seed);

// Sample y_k = C x(t_k) + v_k at the scheduled instants, which must lie on the
// path grid within 1e-9 (else ScheduleOffGrid). Measurement noise comes from a
// stream independent of the state noise.
MeasurementRecord gen_discrete_measurements(const SamplePath& path,
                                            const DiscreteMeasurementModel& model,
                                            std::uint64_t seed);

// Increments dz_k = C x(t_k) dt + sqrt(dt) L z_k with L L^T = phi_eta, one per
// grid step of the path.
MeasurementRecord gen_continuous_measurements(const SamplePath& path,
                                              const ContinuousMeasurementModel& model,
                                              std::uint64_t seed);

// CSV emission; `comments` become leading "# key=value" lines. Numbers are
// shortest round-trip decimal.
void write_csv(std::ostream& os, const SamplePath& path,
               const std::vector<std::string>& comments = {});
void write_csv(std::ostream& os, const MeasurementRecord& record,
               const std::vector<std::string>& comments = {});

// Grid helpers shared by the filters and the CLI.
std::size_t step_count(double dt, double T);          // InvalidStep on bad combos
std::size_t grid_index(const SamplePath& path, double t);  // ScheduleOffGrid when absent

std::string format_double(double v);

}  // namespace sdesim
}  // namespace filtkit
