#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "filtkit/numkit.hpp"

namespace filtkit {

// Time-indexed matrix coefficient: either a constant or a callback. Most
// models are constant; the callback form exists for time-varying tests.
class MatrixFn {
 public:
  MatrixFn() = default;
  MatrixFn(Matrix constant) : constant_(std::move(constant)) {}
  MatrixFn(std::function<Matrix(double)> fn) : fn_(std::move(fn)), is_constant_(false) {}

  Matrix operator()(double t) const { return is_constant_ ? constant_ : fn_(t); }
  bool is_constant() const { return is_constant_; }

 private:
  Matrix constant_;
  std::function<Matrix(double)> fn_;
  bool is_constant_ = true;
};

class VectorFn {
 public:
  VectorFn() = default;
  VectorFn(Vector constant) : constant_(std::move(constant)) {}
  VectorFn(std::function<Vector(double)> fn) : fn_(std::move(fn)), is_constant_(false) {}

  Vector operator()(double t) const { return is_constant_ ? constant_ : fn_(t); }
  bool is_constant() const { return is_constant_; }

 private:
  Vector constant_;
  std::function<Vector(double)> fn_;
  bool is_constant_ = true;
};

// dx = A(t) x dt + G(t) dW, W a d-dimensional standard Wiener process.
struct LinearStateModel {
  int n = 0;  // state dimension
  int d = 0;  // noise dimension
  MatrixFn A;  // n x n drift
  MatrixFn G;  // n x d diffusion
};

// Stratonovich model with scalar bilinear noise feedback per channel:
// dx = (A0(t) + A(t) x) dt + sum_phi (G_col_phi(t) + x B_phi(t)) o dW_phi.
struct BilinearStateModel {
  int n = 0;
  int d = 0;
  VectorFn A0;  // n, affine drift offset
  MatrixFn A;   // n x n
  MatrixFn G;   // n x d
  VectorFn B;   // d, per-channel scalar state gain
};

// y_k = C(t_k) x(t_k) + v_k, v_k ~ N(0, R(t_k)), at scheduled instants.
struct DiscreteMeasurementModel {
  int m = 0;  // measurement dimension
  MatrixFn C;  // m x n
  MatrixFn R;  // m x m, SPD (zero admitted for noise-free tests)
  std::vector<double> schedule;  // strictly increasing instants
};

// dz = C(t) x dt + d_eta, d_eta increments with covariance phi_eta dt.
struct ContinuousMeasurementModel {
  int m = 0;
  MatrixFn C;      // m x n
  Matrix phi_eta;  // m x m, SPD
};

// Gaussian state belief at time t.
struct GaussianBelief {
  double t = 0.0;
  Vector mean;
  Matrix cov;
};

namespace models {

// Each overload returns a list of human-readable problems; empty means valid.
std::vector<std::string> validate(const LinearStateModel& model);
std::vector<std::string> validate(const BilinearStateModel& model);
std::vector<std::string> validate(const DiscreteMeasurementModel& model);
std::vector<std::string> validate(const ContinuousMeasurementModel& model);
std::vector<std::string> validate(const GaussianBelief& belief);

// Stratonovich-to-Ito drift shift of the bilinear model at state x:
// component i is 0.5 * sum_phi (G(t)_{i phi} B(t)_phi + B(t)_phi^2 x_i).
Vector ito_drift_correction(const BilinearStateModel& model, const Vector& x, double t);

}  // namespace models
}  // namespace filtkit
