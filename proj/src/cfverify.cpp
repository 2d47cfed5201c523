#include "filtkit/cfverify.hpp"

#include <cmath>
#include <ostream>

namespace filtkit::cfverify {

namespace {

using numkit::solve_spd;

// Exponent rate of the transform flow in generator form:
// s^T A (m + P s) + 0.5 ||G^T s||^2.
double generator_rate(const Matrix& A, const Matrix& G, const GaussianBelief& b, const Vector& s) {
  return s.dot(A * (b.mean + b.cov * s)) + 0.5 * (G.transpose() * s).squaredNorm();
}

}  // namespace

double gaussian_mgf(const GaussianBelief& b, const Vector& s) {
  const double e = s.dot(b.mean) + 0.5 * s.dot(b.cov * s);
  if (e > 700.0) throw Overflow("transform exponent " + std::to_string(e) + " exceeds 700");
  return std::exp(e);
}

ComplexValue gaussian_cf(const GaussianBelief& b, const Vector& w) {
  const double phase = w.dot(b.mean);
  const double decay = std::exp(-0.5 * w.dot(b.cov * w));
  return {decay * std::cos(phase), decay * std::sin(phase)};
}

EmpiricalCf empirical_cf(const std::vector<Vector>& samples, const Vector& w) {
  const std::size_t N = samples.size();
  if (N < 2) throw TooFewSamples("empirical transform needs at least 2 samples");
  double sum_re = 0.0, sum_im = 0.0;
  for (const auto& x : samples) {
    const double phase = w.dot(x);
    sum_re += std::cos(phase);
    sum_im += std::sin(phase);
  }
  const double mean_re = sum_re / static_cast<double>(N);
  const double mean_im = sum_im / static_cast<double>(N);
  double var_re = 0.0, var_im = 0.0;
  for (const auto& x : samples) {
    const double phase = w.dot(x);
    var_re += (std::cos(phase) - mean_re) * (std::cos(phase) - mean_re);
    var_im += (std::sin(phase) - mean_im) * (std::sin(phase) - mean_im);
  }
  const double denom = static_cast<double>(N - 1) * static_cast<double>(N);
  return {{mean_re, mean_im}, std::sqrt(var_re / denom), std::sqrt(var_im / denom)};
}

std::pair<double, double> theorem1_routes(const LinearStateModel& model, const GaussianBelief& b,
                                          const Vector& s) {
  const Matrix A = model.A(b.t);
  const Matrix G = model.G(b.t);
  const double psi = gaussian_mgf(b, s);
  // Route 1: chain rule through the moment ODEs.
  const Vector dm = A * b.mean;
  const Matrix dP = A * b.cov + b.cov * A.transpose() + G * G.transpose();
  const double lhs = psi * (s.dot(dm) + 0.5 * s.dot(dP * s));
  // Route 2: generator form.
  const double rhs = psi * generator_rate(A, G, b, s);
  return {lhs, rhs};
}

double theorem1_residual(const LinearStateModel& model, const GaussianBelief& b, const Vector& s) {
  const auto [lhs, rhs] = theorem1_routes(model, b, s);
  return std::abs(lhs - rhs) / gaussian_mgf(b, s);
}

Matrix theorem2_gain_cf(const GaussianBelief& b, const ContinuousMeasurementModel& meas,
                        const Vector& s) {
  const Matrix C = meas.C(b.t);
  const double psi = gaussian_mgf(b, s);
  const Vector Ps = b.cov * s;
  return psi * solve_spd(meas.phi_eta, Matrix(C * Ps)).transpose();  // 1 x m
}

double theorem2_cf_sde_residual(const LinearStateModel& model,
                                const ContinuousMeasurementModel& meas,
                                const FilterTrajectory& traj, const MeasurementRecord& record,
                                const Vector& s) {
  if (record.kind != MeasurementRecord::Kind::Continuous)
    throw GridMismatch("transform SDE check needs a continuous record");
  const std::size_t K = record.times.size();
  if (traj.steps.size() != K + 1)
    throw GridMismatch("trajectory and record lengths disagree");
  const double dt = record.dt;
  double acc = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const GaussianBelief& b = traj.steps[k].belief;
    if (std::abs(b.t - record.times[k]) > 1e-9 * std::max(1.0, std::abs(record.times[k])))
      throw GridMismatch("trajectory and record grids disagree");
    const Vector dz = record.values.col(static_cast<Index>(k));
    const Vector nu = dz - meas.C(b.t) * b.mean * dt;
    const double psi0 = gaussian_mgf(b, s);
    const double psi1 = gaussian_mgf(traj.steps[k + 1].belief, s);
    const double drift = psi0 * generator_rate(model.A(b.t), model.G(b.t), b, s) * dt;
    const double gain = (theorem2_gain_cf(b, meas, s) * nu).value();
    acc += std::abs(psi1 - psi0 - drift - gain);
  }
  return K == 0 ? 0.0 : acc / static_cast<double>(K);
}

std::pair<double, double> third_moment_identity(const GaussianBelief& b, int i, int j, int gamma) {
  // Component labels are 1-based, matching the m1/P11 column naming.
  const Index ii = i - 1, jj = j - 1, gg = gamma - 1;
  const Vector& m = b.mean;
  const Matrix& P = b.cov;
  const double third = m(ii) * m(jj) * m(gg) + m(ii) * P(jj, gg) + m(jj) * P(ii, gg) +
                       m(gg) * P(ii, jj);  // Isserlis expansion of <x_i x_j x_gamma>
  const double lhs = third - m(gg) * (P(ii, jj) + m(ii) * m(jj));
  const double rhs = P(ii, gg) * m(jj) + P(jj, gg) * m(ii);
  return {lhs, rhs};
}

void write_report(std::ostream& os, const std::vector<VerifyRecord>& records) {
  for (const auto& r : records) {
    os << "probe=" << r.probe << " lhs=" << sdesim::format_double(r.lhs)
       << " rhs=" << sdesim::format_double(r.rhs)
       << " residual=" << sdesim::format_double(r.residual)
       << " tolerance=" << sdesim::format_double(r.tolerance)
       << " pass=" << (r.pass ? "true" : "false") << "\n";
  }
}

std::vector<Vector> default_probe_grid(Index n) {
  const double levels[] = {-1.0, -0.5, 0.5, 1.0};
  std::vector<Vector> probes;
  if (n <= 3) {
    std::size_t total = 1;
    for (Index i = 0; i < n; ++i) total *= 4;
    for (std::size_t code = 0; code < total; ++code) {
      Vector p(n);
      std::size_t c = code;
      for (Index i = 0; i < n; ++i) {
        p(i) = levels[c % 4];
        c /= 4;
      }
      probes.push_back(p);
    }
  } else {
    for (Index axis = 0; axis < n; ++axis)
      for (const double level : levels) {
        Vector p = Vector::Zero(n);
        p(axis) = level;
        probes.push_back(p);
      }
  }
  return probes;
}

}  // namespace filtkit::cfverify
