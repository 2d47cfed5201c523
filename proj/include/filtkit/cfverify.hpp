#pragma once

#include <complex>
#include <iosfwd>
#include <utility>
#include <vector>

#include "filtkit/models.hpp"
#include "filtkit/sdesim.hpp"
#include "filtkit/trajectory.hpp"

namespace filtkit::cfverify {

using ComplexValue = std::complex<double>;

// exp(s^T m + 0.5 s^T P s); throws Overflow when the exponent exceeds 700.
double gaussian_mgf(const GaussianBelief& b, const Vector& s);

// exp(i w^T m - 0.5 w^T P w).
ComplexValue gaussian_cf(const GaussianBelief& b, const Vector& w);

struct EmpiricalCf {
  ComplexValue value;
  double se_re = 0.0;  // componentwise standard errors of the sample mean
  double se_im = 0.0;
};

// Sample mean of exp(i w^T x) over the given states; TooFewSamples below 2.
EmpiricalCf empirical_cf(const std::vector<Vector>& samples, const Vector& w);

// Measurement-free transform evolution: the time derivative of the
// conditional MGF computed from the moment ODEs (first), and the generator
// form psi * (s^T A (m + P s) + 0.5 s^T G G^T s) (second).
std::pair<double, double> theorem1_routes(const LinearStateModel& model, const GaussianBelief& b,
                                          const Vector& s);

// Absolute difference of the two routes, normalized by the MGF.
double theorem1_residual(const LinearStateModel& model, const GaussianBelief& b, const Vector& s);

// Gain row psi(s) (P s)^T C^T phi^-1 of the transform-domain innovation term.
Matrix theorem2_gain_cf(const GaussianBelief& b, const ContinuousMeasurementModel& meas,
                        const Vector& s);

// Mean absolute one-step defect of the transform SDE along a filter
// trajectory: psi_{k+1} - psi_k against drift * dt + gain * (dz_k - C m_k dt).
// Throws GridMismatch unless the trajectory holds exactly one more step than
// the record has increments.
double theorem2_cf_sde_residual(const LinearStateModel& model,
                                const ContinuousMeasurementModel& meas,
                                const FilterTrajectory& traj, const MeasurementRecord& record,
                                const Vector& s);

// Gaussian third-moment reduction <x_i x_j e> / <e> at s = 0 direction gamma:
// lhs from the Isserlis expansion, rhs from P_{i gamma} m_j + P_{j gamma} m_i
// (means subtracted). Both sides returned for comparison.
std::pair<double, double> third_moment_identity(const GaussianBelief& b, int i, int j, int gamma);

struct VerifyRecord {
  std::string probe;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// One key=value line per record.
void write_report(std::ostream& os, const std::vector<VerifyRecord>& records);

// {-1, -0.5, 0.5, 1}^n probe grid for n <= 3; axis-aligned +-1, +-0.5 probes
// beyond that.
std::vector<Vector> default_probe_grid(Index n);

}  // namespace filtkit::cfverify
