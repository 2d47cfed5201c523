#include "filtkit/kf_cd.hpp"

#include <cmath>
#include <stdexcept>

namespace filtkit::kf_cd {

namespace {

using numkit::kron;
using numkit::solve_spd;
using numkit::symmetrize;
using numkit::unvec;
using numkit::vec;

double effective_substep(const CdFilterConfig& cfg, double span) {
  const double h = cfg.ode_substep ? *cfg.ode_substep : std::min(1e-3 * span, 1e-2);
  if (!(h > 0.0)) throw std::invalid_argument("ode_substep must be positive");
  return h;
}

// One RK4 step of the joint moment ODE on [tau, tau + h].
template <typename Deriv>
void rk4_step(double tau, double h, Vector& m, Matrix& P, const Deriv& deriv) {
  auto [km1, kP1] = deriv(tau, m, P);
  auto [km2, kP2] = deriv(tau + 0.5 * h, Vector(m + 0.5 * h * km1), Matrix(P + 0.5 * h * kP1));
  auto [km3, kP3] = deriv(tau + 0.5 * h, Vector(m + 0.5 * h * km2), Matrix(P + 0.5 * h * kP2));
  auto [km4, kP4] = deriv(tau + h, Vector(m + h * km3), Matrix(P + h * kP3));
  m += (h / 6.0) * (km1 + 2.0 * km2 + 2.0 * km3 + km4);
  P = symmetrize(P + (h / 6.0) * (kP1 + 2.0 * kP2 + 2.0 * kP3 + kP4));
}

template <typename Deriv>
GaussianBelief integrate(const GaussianBelief& b, double t1, double h_max, const Deriv& deriv) {
  GaussianBelief out = b;
  double tau = b.t;
  const double tol = 1e-12 * std::max(1.0, std::abs(t1));
  while (tau < t1 - tol) {
    const double h = std::min(h_max, t1 - tau);
    rk4_step(tau, h, out.mean, out.cov, deriv);
    tau += h;
  }
  out.t = t1;
  return out;
}

void require_at_instant(const GaussianBelief& b, double t_k) {
  if (std::abs(b.t - t_k) > 1e-9 * std::max(1.0, std::abs(t_k)))
    throw std::invalid_argument("belief time does not match the measurement instant");
}

struct UpdateTerms {
  Matrix C, R, S;
  Vector innovation;
};

UpdateTerms update_terms(const GaussianBelief& b, const DiscreteMeasurementModel& model,
                         const Vector& y, double t_k) {
  UpdateTerms u;
  u.C = model.C(t_k);
  u.R = model.R(t_k);
  u.S = symmetrize(u.C * b.cov * u.C.transpose() + u.R);
  u.innovation = y - u.C * b.mean;
  return u;
}

}  // namespace

GaussianBelief predict(const GaussianBelief& b, const LinearStateModel& model, double t1,
                       const CdFilterConfig& cfg) {
  if (t1 < b.t) throw std::invalid_argument("predict target precedes the belief time");
  if (t1 == b.t) return b;
  const double h = effective_substep(cfg, t1 - b.t);
  return integrate(b, t1, h, [&](double tau, const Vector& m, const Matrix& P) {
    const Matrix A = model.A(tau);
    const Matrix G = model.G(tau);
    return std::pair<Vector, Matrix>(A * m, A * P + P * A.transpose() + G * G.transpose());
  });
}

GaussianBelief predict_vec(const GaussianBelief& b, const LinearStateModel& model, double t1,
                           const CdFilterConfig& cfg) {
  if (t1 < b.t) throw std::invalid_argument("predict target precedes the belief time");
  if (t1 == b.t) return b;
  const double h = effective_substep(cfg, t1 - b.t);
  const Index n = b.mean.size();
  const Matrix I = Matrix::Identity(n, n);
  return integrate(b, t1, h, [&](double tau, const Vector& m, const Matrix& P) {
    const Matrix A = model.A(tau);
    const Matrix G = model.G(tau);
    const Vector dm = kron(m.transpose(), I) * vec(A);
    const Vector dP = (kron(I, A) + kron(A, I)) * vec(P) + vec(Matrix(G * G.transpose()));
    return std::pair<Vector, Matrix>(dm, unvec(dP, n, n));
  });
}

GaussianBelief update(const GaussianBelief& b, const DiscreteMeasurementModel& model,
                      const Vector& y, double t_k, const CdFilterConfig& cfg) {
  require_at_instant(b, t_k);
  const auto u = update_terms(b, model, y, t_k);
  const Matrix K = solve_spd(u.S, Matrix(u.C * b.cov)).transpose();  // P C^T S^-1
  GaussianBelief out;
  out.t = b.t;
  out.mean = b.mean + K * u.innovation;
  if (cfg.joseph_update) {
    const Matrix J = Matrix::Identity(b.cov.rows(), b.cov.cols()) - K * u.C;
    out.cov = symmetrize(J * b.cov * J.transpose() + K * u.R * K.transpose());
  } else {
    out.cov = symmetrize(b.cov - K * (u.C * b.cov));
  }
  return out;
}

GaussianBelief update_vec(const GaussianBelief& b, const DiscreteMeasurementModel& model,
                          const Vector& y, double t_k, const CdFilterConfig&) {
  require_at_instant(b, t_k);
  const auto u = update_terms(b, model, y, t_k);
  const Index n = b.mean.size();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix row = solve_spd(u.S, u.innovation).transpose() * u.C;          // nu^T S^-1 C
  const Matrix M = solve_spd(u.S, Matrix(u.C * b.cov)).transpose() * u.C;     // P C^T S^-1 C
  GaussianBelief out;
  out.t = b.t;
  out.mean = Vector(b.mean + kron(row, I) * vec(b.cov));
  out.cov = symmetrize(unvec(Vector(vec(b.cov) - kron(M, I) * vec(b.cov)), n, n));
  return out;
}

Matrix stationary_predict_cov(const LinearStateModel& model) {
  if (!model.A.is_constant() || !model.G.is_constant())
    throw std::invalid_argument("stationary covariance requires constant coefficients");
  const Matrix A = model.A(0.0);
  const Matrix G = model.G(0.0);
  return numkit::lyapunov_solve(A, G * G.transpose());
}

Matrix stationary_update_cov(const Matrix& P_minus, const DiscreteMeasurementModel& model) {
  const double t0 = model.schedule.empty() ? 0.0 : model.schedule.front();
  const Matrix C = model.C(t0);
  const Matrix R = model.R(t0);
  const Index n = P_minus.rows();
  const Matrix S = symmetrize(C * P_minus * C.transpose() + R);
  const Matrix M = solve_spd(S, Matrix(C * P_minus)).transpose() * C;
  const Vector vp = vec(P_minus);
  return symmetrize(unvec(Vector(vp - kron(M, Matrix::Identity(n, n)) * vp), n, n));
}

FilterTrajectory run(const LinearStateModel& model, const DiscreteMeasurementModel& meas,
                     const MeasurementRecord& record, const GaussianBelief& b0,
                     const CdFilterConfig& cfg, double t_end) {
  if (record.kind != MeasurementRecord::Kind::Discrete)
    throw std::invalid_argument("discrete-update filter needs a discrete record");
  FilterTrajectory traj;
  traj.steps.push_back({b0, StepTag::Predicted, {}, {}});
  GaussianBelief b = b0;
  for (std::size_t k = 0; k < record.times.size(); ++k) {
    const double t_k = record.times[k];
    const Vector y = record.values.col(static_cast<Index>(k));
    b = cfg.use_vec_form ? predict_vec(b, model, t_k, cfg) : predict(b, model, t_k, cfg);
    traj.steps.push_back({b, StepTag::Predicted, {}, {}});
    const auto u = update_terms(b, meas, y, t_k);
    b = cfg.use_vec_form ? update_vec(b, meas, y, t_k, cfg) : update(b, meas, y, t_k, cfg);
    traj.steps.push_back({b, StepTag::Updated, u.innovation, u.S});
  }
  if (std::isfinite(t_end) && t_end > b.t) {
    b = cfg.use_vec_form ? predict_vec(b, model, t_end, cfg) : predict(b, model, t_end, cfg);
    traj.steps.push_back({b, StepTag::Predicted, {}, {}});
  }
  return traj;
}

}  // namespace filtkit::kf_cd
