#pragma once

#include "filtkit/models.hpp"
#include "filtkit/sdesim.hpp"
#include "filtkit/trajectory.hpp"

namespace filtkit::kf_bilinear {

// The covariance flow ships in two algebraic variants: AsPrinted carries the
// state-feedback diffusion term sum_phi B_phi^2 once on P; MomentExact
// carries it twice, matching the closed-moment calculus for the same model.
enum class CovarianceForm { AsPrinted, MomentExact };

struct BilinearFilterConfig {
  double dt = 1e-3;
  CovarianceForm covariance_form = CovarianceForm::AsPrinted;
};

// One Euler step of the bilinear filter. The mean drift is
// A0 + A m + ito_drift_correction(m) plus the gain times dz - C m dt; the
// covariance flow adds the noise-feedback couplings m (G B)^T + (G B) m^T and
// (sum B^2) m m^T to the Riccati terms. The propagated covariance is clipped
// to PSD when the smallest eigenvalue sits in (-1e-9 * trace, 0) and
// DivergedCovariance is thrown below that band.
GaussianBelief step(const GaussianBelief& b, const BilinearStateModel& model,
                    const ContinuousMeasurementModel& meas, const Vector& dz,
                    const BilinearFilterConfig& cfg);

FilterTrajectory run(const BilinearStateModel& model, const ContinuousMeasurementModel& meas,
                     const MeasurementRecord& record, const GaussianBelief& b0,
                     const BilinearFilterConfig& cfg);

// With A0 = 0 and B = 0 the step must reproduce the linear increment-driven
// filter exactly; runs both over the record and returns the largest absolute
// mean/covariance deviation. Throws std::invalid_argument when A0 or B is
// nonzero anywhere on the record grid.
double kalman_specialization_check(const BilinearStateModel& model,
                                   const ContinuousMeasurementModel& meas,
                                   const MeasurementRecord& record, const GaussianBelief& b0,
                                   const BilinearFilterConfig& cfg);

}  // namespace filtkit::kf_bilinear
