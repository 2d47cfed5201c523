#pragma once

#include <limits>
#include <optional>

#include "filtkit/models.hpp"
#include "filtkit/sdesim.hpp"
#include "filtkit/trajectory.hpp"

namespace filtkit::kf_cd {

// Filter for continuous linear dynamics observed at discrete instants.
struct CdFilterConfig {
  // RK4 substep for the moment ODEs; default min(1e-3 * span, 1e-2).
  std::optional<double> ode_substep;
  bool use_vec_form = false;   // run() propagates via the vectorized maps
  bool joseph_update = true;   // covariance update in Joseph form
};

// Integrate dm = A m dt, dP = A P + P A^T + G G^T dt from b.t to t1 (RK4,
// covariance symmetrized each step). Requires t1 >= b.t.
GaussianBelief predict(const GaussianBelief& b, const LinearStateModel& model, double t1,
                       const CdFilterConfig& cfg = {});

// Measurement update at t_k (must equal b.t within grid tolerance):
// K = P C^T (C P C^T + R)^-1, mean += K (y - C m); Joseph or plain K C P form.
GaussianBelief update(const GaussianBelief& b, const DiscreteMeasurementModel& model,
                      const Vector& y, double t_k, const CdFilterConfig& cfg = {});

// Same maps computed through the vectorized (Kronecker) propagation and
// update expressions; agreement with the matrix forms is an invariant.
GaussianBelief predict_vec(const GaussianBelief& b, const LinearStateModel& model, double t1,
                           const CdFilterConfig& cfg = {});
GaussianBelief update_vec(const GaussianBelief& b, const DiscreteMeasurementModel& model,
                          const Vector& y, double t_k, const CdFilterConfig& cfg = {});

// Stationary prediction covariance: Lyapunov solve of A P + P A^T + G G^T = 0
// for constant coefficients. Throws SingularSystem when no PSD solution exists.
Matrix stationary_predict_cov(const LinearStateModel& model);

// Fixed point of the update map applied to P_minus, through the vectorized
// update expression. C and R are evaluated at the first scheduled instant
// (t = 0 when the schedule is empty); meaningful for constant coefficients.
Matrix stationary_update_cov(const Matrix& P_minus, const DiscreteMeasurementModel& model);

// Predict/update sweep across the record. The trajectory holds the initial
// belief, then a predicted and an updated entry per instant (innovation and
// its covariance on the updated one). If t_end exceeds the last instant, a
// final predicted entry is appended.
FilterTrajectory run(const LinearStateModel& model, const DiscreteMeasurementModel& meas,
                     const MeasurementRecord& record, const GaussianBelief& b0,
                     const CdFilterConfig& cfg = {},
                     double t_end = std::numeric_limits<double>::quiet_NaN());

}  // namespace filtkit::kf_cd
