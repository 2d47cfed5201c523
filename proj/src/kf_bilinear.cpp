#include "filtkit/kf_bilinear.hpp"

#include <cmath>
#include <stdexcept>

#include "filtkit/kf_cc.hpp"

namespace filtkit::kf_bilinear {

namespace {

using numkit::solve_spd;
using numkit::symmetrize;

Matrix enforce_psd(const Matrix& P, double t) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(P);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig >= 0.0) return P;
  const double band = 1e-9 * std::max(P.trace(), 1e-300);
  if (min_eig <= -band) throw DivergedCovariance(min_eig, P.trace(), t);
  const Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose());
}

}  // namespace

GaussianBelief step(const GaussianBelief& b, const BilinearStateModel& model,
                    const ContinuousMeasurementModel& meas, const Vector& dz,
                    const BilinearFilterConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidStep("dt must be positive");
  const double t = b.t;
  const Matrix A = model.A(t);
  const Matrix G = model.G(t);
  const Vector a0 = model.A0(t);
  const Vector bv = model.B(t);
  const Matrix C = meas.C(t);
  const Vector& m = b.mean;
  const Matrix& P = b.cov;

  const Matrix K = solve_spd(meas.phi_eta, Matrix(C * P)).transpose();  // P C^T phi^-1
  const Vector nu = dz - C * m * cfg.dt;

  GaussianBelief out;
  out.t = t + cfg.dt;
  out.mean = m + (a0 + A * m + models::ito_drift_correction(model, m, t)) * cfg.dt + K * nu;

  const Vector gb = G * bv;            // sum_phi G_{. phi} B_phi
  const double b2 = bv.squaredNorm();  // sum_phi B_phi^2
  Matrix flow = A * P + P * A.transpose() + G * G.transpose() + m * gb.transpose() +
                gb * m.transpose() + b2 * (m * m.transpose()) - K * (C * P);
  flow += (cfg.covariance_form == CovarianceForm::MomentExact ? 2.0 : 1.0) * b2 * P;
  out.cov = enforce_psd(symmetrize(P + flow * cfg.dt), out.t);
  return out;
}

FilterTrajectory run(const BilinearStateModel& model, const ContinuousMeasurementModel& meas,
                     const MeasurementRecord& record, const GaussianBelief& b0,
                     const BilinearFilterConfig& cfg) {
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
    b = step(b, model, meas, dz, cfg);
    traj.steps.push_back({b, StepTag::Updated, nu, {}});
  }
  return traj;
}

double kalman_specialization_check(const BilinearStateModel& model,
                                   const ContinuousMeasurementModel& meas,
                                   const MeasurementRecord& record, const GaussianBelief& b0,
                                   const BilinearFilterConfig& cfg) {
  auto all_zero = [](const Vector& v) { return v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0; };
  for (const double t : record.times)
    if (!all_zero(model.A0(t)) || !all_zero(model.B(t)))
      throw std::invalid_argument("specialization check requires A0 = 0 and B = 0");

  const FilterTrajectory bi = run(model, meas, record, b0, cfg);
  LinearStateModel lin{model.n, model.d, model.A, model.G};
  kf_cc::CcFilterConfig lin_cfg;
  lin_cfg.dt = cfg.dt;
  const FilterTrajectory kb = kf_cc::run(lin, meas, record, b0, lin_cfg);

  double dev = 0.0;
  for (std::size_t k = 0; k < bi.steps.size(); ++k) {
    dev = std::max(dev, (bi.steps[k].belief.mean - kb.steps[k].belief.mean).cwiseAbs().maxCoeff());
    dev = std::max(dev, (bi.steps[k].belief.cov - kb.steps[k].belief.cov).cwiseAbs().maxCoeff());
  }
  return dev;
}

}  // namespace filtkit::kf_bilinear
