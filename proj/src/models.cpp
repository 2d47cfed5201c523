#include "filtkit/models.hpp"

#include <cmath>

namespace filtkit::models {

namespace {

void check_shape(std::vector<std::string>& out, const Matrix& M, Index rows, Index cols,
                 const std::string& name) {
  if (M.rows() != rows || M.cols() != cols)
    out.push_back(name + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                  ", got " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
  else if (!numkit::is_finite(M))
    out.push_back(name + " has non-finite entries");
}

void check_spd(std::vector<std::string>& out, const Matrix& M, const std::string& name,
               bool allow_zero = false) {
  if (!numkit::is_symmetric(M)) {
    out.push_back(name + " not symmetric");
    return;
  }
  if (allow_zero && M.cwiseAbs().maxCoeff() == 0.0) return;
  if (numkit::min_eigenvalue_sym(M) <= 0.0) out.push_back(name + " not SPD");
}

}  // namespace

std::vector<std::string> validate(const LinearStateModel& model) {
  std::vector<std::string> out;
  if (model.n < 1) out.push_back("n must be >= 1");
  if (model.d < 1) out.push_back("d must be >= 1");
  if (!out.empty()) return out;
  check_shape(out, model.A(0.0), model.n, model.n, "A");
  check_shape(out, model.G(0.0), model.n, model.d, "G");
  return out;
}

std::vector<std::string> validate(const BilinearStateModel& model) {
  std::vector<std::string> out;
  if (model.n < 1) out.push_back("n must be >= 1");
  if (model.d < 1) out.push_back("d must be >= 1");
  if (!out.empty()) return out;
  check_shape(out, model.A(0.0), model.n, model.n, "A");
  check_shape(out, model.G(0.0), model.n, model.d, "G");
  const Vector a0 = model.A0(0.0);
  if (a0.size() != model.n)
    out.push_back("A0: expected length " + std::to_string(model.n) + ", got " +
                  std::to_string(a0.size()));
  const Vector b = model.B(0.0);
  if (b.size() != model.d)
    out.push_back("B: expected length " + std::to_string(model.d) + ", got " +
                  std::to_string(b.size()));
  return out;
}

std::vector<std::string> validate(const DiscreteMeasurementModel& model) {
  std::vector<std::string> out;
  if (model.m < 1) out.push_back("m must be >= 1");
  if (!out.empty()) return out;
  const double t0 = model.schedule.empty() ? 0.0 : model.schedule.front();
  const Matrix C = model.C(t0);
  if (C.rows() != model.m)
    out.push_back("C: expected " + std::to_string(model.m) + " rows, got " +
                  std::to_string(C.rows()));
  check_spd(out, model.R(t0), "R", /*allow_zero=*/true);
  for (std::size_t k = 1; k < model.schedule.size(); ++k)
    if (model.schedule[k] <= model.schedule[k - 1]) {
      out.push_back("schedule not strictly increasing");
      break;
    }
  return out;
}

std::vector<std::string> validate(const ContinuousMeasurementModel& model) {
  std::vector<std::string> out;
  if (model.m < 1) out.push_back("m must be >= 1");
  if (!out.empty()) return out;
  const Matrix C = model.C(0.0);
  if (C.rows() != model.m)
    out.push_back("C: expected " + std::to_string(model.m) + " rows, got " +
                  std::to_string(C.rows()));
  if (model.phi_eta.rows() != model.m || model.phi_eta.cols() != model.m)
    out.push_back("phi_eta: expected " + std::to_string(model.m) + "x" + std::to_string(model.m) +
                  ", got " + std::to_string(model.phi_eta.rows()) + "x" +
                  std::to_string(model.phi_eta.cols()));
  else
    check_spd(out, model.phi_eta, "phi_eta");
  return out;
}

std::vector<std::string> validate(const GaussianBelief& belief) {
  std::vector<std::string> out;
  if (belief.mean.size() < 1) out.push_back("mean must be non-empty");
  if (!belief.mean.allFinite()) out.push_back("mean has non-finite entries");
  if (belief.cov.rows() != belief.mean.size() || belief.cov.cols() != belief.mean.size()) {
    out.push_back("cov: expected " + std::to_string(belief.mean.size()) + "x" +
                  std::to_string(belief.mean.size()) + ", got " + std::to_string(belief.cov.rows()) +
                  "x" + std::to_string(belief.cov.cols()));
    return out;
  }
  if (!numkit::is_finite(belief.cov)) out.push_back("cov has non-finite entries");
  else if (!numkit::is_symmetric(belief.cov)) out.push_back("cov not symmetric");
  else if (numkit::min_eigenvalue_sym(belief.cov) <
           -1e-9 * std::max(1.0, belief.cov.trace()))
    out.push_back("cov not PSD");
  return out;
}

Vector ito_drift_correction(const BilinearStateModel& model, const Vector& x, double t) {
  const Matrix G = model.G(t);
  const Vector b = model.B(t);
  return 0.5 * (G * b + b.squaredNorm() * x);
}

}  // namespace filtkit::models
