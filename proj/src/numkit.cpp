#include "filtkit/numkit.hpp"

#include <cmath>
#include <stdexcept>

namespace filtkit::numkit {

Vector vec(const Matrix& M) {
  Vector v(M.size());
  Index k = 0;
  for (Index j = 0; j < M.cols(); ++j)
    for (Index i = 0; i < M.rows(); ++i) v(k++) = M(i, j);
  return v;
}

Matrix unvec(const Vector& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw std::invalid_argument("unvec: size mismatch");
  Matrix M(rows, cols);
  Index k = 0;
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = v(k++);
  return M;
}

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

Matrix cholesky_spd(const Matrix& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("cholesky_spd: matrix not square");
  const Index n = M.rows();
  const double tol = n > 0 ? 1e-12 * M.diagonal().maxCoeff() : 0.0;
  Matrix L = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = M(j, j) - L.row(j).head(j).squaredNorm();
    if (d < tol) throw NotSPD(d);
    if (d <= 0.0) continue;  // zero pivot admitted only when tol <= 0 (e.g. the zero matrix)
    L(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < n; ++i)
      L(i, j) = (M(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
  }
  return L;
}

Matrix solve_spd(const Matrix& M, const Matrix& rhs) {
  if (M.rows() != rhs.rows()) throw std::invalid_argument("solve_spd: shape mismatch");
  Matrix L = cholesky_spd(M);
  auto sweep = [&](const Matrix& b) -> Matrix {
    Matrix y = L.triangularView<Eigen::Lower>().solve(b);
    return L.transpose().triangularView<Eigen::Upper>().solve(y);
  };
  Matrix X = sweep(rhs);
  X += sweep(rhs - M * X);  // one refinement pass
  return X;
}

Vector solve_spd(const Matrix& M, const Vector& rhs) {
  return Vector(solve_spd(M, Matrix(rhs)));
}

Matrix expm(const Matrix& A, double t) {
  if (A.rows() != A.cols()) throw std::invalid_argument("expm: matrix not square");
  const Index n = A.rows();
  Matrix B = A * t;
  const double norm1 = B.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.25) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.25)));
  B /= std::ldexp(1.0, squarings);

  Matrix sum = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= 40; ++k) {
    term = term * B / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-18 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

Matrix lyapunov_solve(const Matrix& A, const Matrix& Q) {
  if (A.rows() != A.cols() || Q.rows() != Q.cols() || A.rows() != Q.rows())
    throw std::invalid_argument("lyapunov_solve: shape mismatch");
  const Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  Matrix op = kron(I, A) + kron(A, I);
  Eigen::FullPivLU<Matrix> lu(op);
  if (!lu.isInvertible()) throw SingularSystem("lyapunov operator is singular");
  Matrix P = symmetrize(unvec(lu.solve(-vec(Q)), n, n));

  const double scale = std::max(1.0, Q.norm());
  if ((A * P + P * A.transpose() + Q).norm() > 1e-9 * std::max(scale, P.norm()))
    throw SingularSystem("lyapunov solve residual too large");
  if (min_eigenvalue_sym(symmetrize(Q)) >= -1e-12 * scale &&
      min_eigenvalue_sym(P) < -1e-9 * std::max(1.0, P.norm()))
    throw SingularSystem("stationary covariance is not PSD (drift not Hurwitz)");
  return P;
}

Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

double min_eigenvalue_sym(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_finite(const Matrix& M) { return M.allFinite(); }

bool is_symmetric(const Matrix& M, double tol) {
  if (M.rows() != M.cols()) return false;
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, M.cwiseAbs().maxCoeff());
}

}  // namespace filtkit::numkit
