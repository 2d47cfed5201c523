#pragma once

#include "filtkit/models.hpp"
#include "filtkit/sdesim.hpp"
#include "filtkit/trajectory.hpp"

namespace filtkit::kf_cc {

// Filter driven by a continuous observation increment stream.
struct CcFilterConfig {
  double dt = 1e-3;            // increment grid step; must match the record
  bool use_vec_form = false;   // step through the vectorized maps
  bool rk4_covariance = false; // integrate the covariance flow with RK4 instead of Euler
};

// K = P C^T phi_eta^-1 at the belief time.
Matrix gain(const GaussianBelief& b, const ContinuousMeasurementModel& meas);

// One Euler step: mean += (A m) dt + K (dz - C m dt); covariance by the
// Riccati flow A P + P A^T + G G^T - P C^T phi^-1 C P (Euler by default),
// symmetrized afterwards. Coefficients are evaluated at the step start.
GaussianBelief step(const GaussianBelief& b, const LinearStateModel& model,
                    const ContinuousMeasurementModel& meas, const Vector& dz,
                    const CcFilterConfig& cfg);

// Same maps through the vectorized (Kronecker) expressions; the covariance
// bracket multiplies dt as a whole.
GaussianBelief step_vec(const GaussianBelief& b, const LinearStateModel& model,
                        const ContinuousMeasurementModel& meas, const Vector& dz,
                        const CcFilterConfig& cfg);

// Stationary Riccati solution of A P + P A^T + G G^T = P C^T phi^-1 C P by
// Newton-Kleinman iteration (Lyapunov solve per iterate). The initial gain
// is zero when A is already Hurwitz, otherwise beta P0 C^T phi^-1 with P0
// from a shifted Lyapunov equation and beta swept over {1, 2, 4, 8}.
// Throws NoConvergence when the residual does not reach 1e-9.
Matrix stationary_cov(const LinearStateModel& model, const ContinuousMeasurementModel& meas);

// Sweep the increment record; each entry is an Updated step carrying the
// innovation dz - C m dt. Throws GridMismatch when cfg.dt and the record
// grid differ.
FilterTrajectory run(const LinearStateModel& model, const ContinuousMeasurementModel& meas,
                     const MeasurementRecord& record, const GaussianBelief& b0,
                     const CcFilterConfig& cfg);

}  // namespace filtkit::kf_cc
