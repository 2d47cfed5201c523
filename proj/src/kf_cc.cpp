#include "filtkit/kf_cc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace filtkit::kf_cc {

namespace {

using numkit::kron;
using numkit::lyapunov_solve;
using numkit::solve_spd;
using numkit::symmetrize;
using numkit::unvec;
using numkit::vec;

Matrix riccati_rhs(const Matrix& A, const Matrix& GGt, const Matrix& C, const Matrix& phi,
                   const Matrix& P) {
  const Matrix K = solve_spd(phi, Matrix(C * P)).transpose();
  return A * P + P * A.transpose() + GGt - K * (C * P);
}

bool is_hurwitz(const Matrix& A) {
  try {
    const Matrix X = lyapunov_solve(A, Matrix::Identity(A.rows(), A.cols()));
    return numkit::min_eigenvalue_sym(X) > 1e-12 * std::max(1.0, X.norm());
  } catch (const SingularSystem&) {
    return false;
  }
}

}  // namespace

Matrix gain(const GaussianBelief& b, const ContinuousMeasurementModel& meas) {
  const Matrix C = meas.C(b.t);
  return solve_spd(meas.phi_eta, Matrix(C * b.cov)).transpose();  // P C^T phi^-1
}

GaussianBelief step(const GaussianBelief& b, const LinearStateModel& model,
                    const ContinuousMeasurementModel& meas, const Vector& dz,
                    const CcFilterConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidStep("dt must be positive");
  const double t = b.t;
  const Matrix A = model.A(t);
  const Matrix G = model.G(t);
  const Matrix C = meas.C(t);
  const Matrix K = gain(b, meas);

  GaussianBelief out;
  out.t = t + cfg.dt;
  out.mean = b.mean + A * b.mean * cfg.dt + K * (dz - C * b.mean * cfg.dt);
  if (cfg.rk4_covariance) {
    const Matrix GGt = G * G.transpose();
    const Matrix& P = b.cov;
    const double h = cfg.dt;
    const Matrix k1 = riccati_rhs(A, GGt, C, meas.phi_eta, P);
    const Matrix k2 = riccati_rhs(A, GGt, C, meas.phi_eta, Matrix(P + 0.5 * h * k1));
    const Matrix k3 = riccati_rhs(A, GGt, C, meas.phi_eta, Matrix(P + 0.5 * h * k2));
    const Matrix k4 = riccati_rhs(A, GGt, C, meas.phi_eta, Matrix(P + h * k3));
    out.cov = symmetrize(P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  } else {
    out.cov = symmetrize(
        b.cov + (A * b.cov + b.cov * A.transpose() + G * G.transpose() - K * (C * b.cov)) * cfg.dt);
  }
  return out;
}

GaussianBelief step_vec(const GaussianBelief& b, const LinearStateModel& model,
                        const ContinuousMeasurementModel& meas, const Vector& dz,
                        const CcFilterConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidStep("dt must be positive");
  const double t = b.t;
  const Matrix A = model.A(t);
  const Matrix G = model.G(t);
  const Matrix C = meas.C(t);
  const Index n = b.mean.size();
  const Matrix I = Matrix::Identity(n, n);
  const Vector vP = vec(b.cov);

  // nu^T phi^-1 C with nu the innovation increment.
  const Vector nu = dz - C * b.mean * cfg.dt;
  const Matrix row = solve_spd(meas.phi_eta, nu).transpose() * C;
  const Matrix gain_sq = solve_spd(meas.phi_eta, Matrix(C * b.cov)).transpose() * C;  // P C^T phi^-1 C

  GaussianBelief out;
  out.t = t + cfg.dt;
  out.mean = Vector(b.mean + kron(Matrix(b.mean.transpose()), I) * vec(A) * cfg.dt +
                    kron(row, I) * vP);
  const Vector dP = (kron(I, A) + kron(A, I)) * vP + vec(Matrix(G * G.transpose())) -
                    kron(gain_sq, I) * vP;
  out.cov = symmetrize(unvec(Vector(vP + dP * cfg.dt), n, n));
  return out;
}

Matrix stationary_cov(const LinearStateModel& model, const ContinuousMeasurementModel& meas) {
  if (!model.A.is_constant() || !model.G.is_constant() || !meas.C.is_constant())
    throw std::invalid_argument("stationary covariance requires constant coefficients");
  const Matrix A = model.A(0.0);
  const Matrix G = model.G(0.0);
  const Matrix C = meas.C(0.0);
  const Matrix& phi = meas.phi_eta;
  const Matrix GGt = G * G.transpose();
  const Index n = A.rows();

  Matrix K0 = Matrix::Zero(n, C.rows());
  if (!is_hurwitz(A)) {
    // Seed with K0 = Y^-1 C^T where (A + sigma I)^T Y + Y (A + sigma I) = 2 C^T C
    // and sigma exceeds the spectral radius: then Y (A - K0 C) + (A - K0 C)^T Y
    // = -2 sigma Y, so the seed stabilizes whenever Y is positive definite
    // (observable pair). A shifted-covariance sweep stays as the fallback.
    const double sigma = A.cwiseAbs().rowwise().sum().maxCoeff() + 1.0;
    const Matrix shifted = A + sigma * Matrix::Identity(n, n);
    bool found = false;
    try {
      const Matrix Y = lyapunov_solve(Matrix(-shifted.transpose()),
                                      Matrix(2.0 * C.transpose() * C));
      const Matrix cand = solve_spd(Y, Matrix(C.transpose()));
      if (is_hurwitz(Matrix(A - cand * C))) {
        K0 = cand;
        found = true;
      }
    } catch (const NotSPD&) {
    } catch (const SingularSystem&) {
    }
    if (!found) {
      Matrix Q0 = GGt;
      if (Q0.cwiseAbs().maxCoeff() <= 0.0) Q0 = Matrix::Identity(n, n);
      const Matrix P0 = lyapunov_solve(Matrix(A - sigma * Matrix::Identity(n, n)), Q0);
      for (const double beta : {1.0, 2.0, 4.0, 8.0}) {
        const Matrix cand = beta * solve_spd(phi, Matrix(C * P0)).transpose();
        if (is_hurwitz(Matrix(A - cand * C))) {
          K0 = cand;
          found = true;
          break;
        }
      }
    }
    if (!found) throw NoConvergence(0, std::numeric_limits<double>::infinity(),
                                    "no stabilizing initial gain found");
  }

  Matrix K = K0;
  const double scale = std::max(1.0, GGt.norm());
  for (int iter = 1; iter <= 60; ++iter) {
    const Matrix P =
        lyapunov_solve(Matrix(A - K * C), Matrix(GGt + K * phi * K.transpose()));
    K = solve_spd(phi, Matrix(C * P)).transpose();
    const double res = riccati_rhs(A, GGt, C, phi, P).norm();
    if (res <= 1e-9 * scale) return symmetrize(P);
    if (iter == 60) throw NoConvergence(iter, res, "stationary Riccati iteration stalled");
  }
  throw NoConvergence(0, 0.0, "unreachable");
}

FilterTrajectory run(const LinearStateModel& model, const ContinuousMeasurementModel& meas,
                     const MeasurementRecord& record, const GaussianBelief& b0,
                     const CcFilterConfig& cfg) {
  if (record.kind != MeasurementRecord::Kind::Continuous)
    throw std::invalid_argument("increment-driven filter needs a continuous record");
  if (std::abs(record.dt - cfg.dt) > 1e-12 * std::max(1.0, std::abs(cfg.dt)))
    throw GridMismatch("record grid step does not match the filter dt");
  FilterTrajectory traj;
  traj.steps.push_back({b0, StepTag::Predicted, {}, {}});
  GaussianBelief b = b0;
  for (std::size_t k = 0; k < record.times.size(); ++k) {
    const Vector dz = record.values.col(static_cast<Index>(k));
    const Vector nu = dz - meas.C(b.t) * b.mean * cfg.dt;
    b = cfg.use_vec_form ? step_vec(b, model, meas, dz, cfg) : step(b, model, meas, dz, cfg);
    traj.steps.push_back({b, StepTag::Updated, nu, {}});
  }
  return traj;
}

}  // namespace filtkit::kf_cc
