#pragma once

#include <Eigen/Dense>

#include "filtkit/errors.hpp"

namespace filtkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace numkit {

// Column-stacking vectorization: vec(M)(i + j*rows) = M(i,j).
Vector vec(const Matrix& M);

// Inverse of vec; v.size() must equal rows*cols.
Matrix unvec(const Vector& v, Index rows, Index cols);

// Kronecker product; satisfies vec(A X B) = kron(B^T, A) vec(X).
Matrix kron(const Matrix& A, const Matrix& B);

// Lower-triangular L with L L^T = M. Pivots are accepted when they clear
// 1e-12 * max diagonal entry; a zero matrix passes with L = 0. Throws NotSPD
// with the offending pivot otherwise.
Matrix cholesky_spd(const Matrix& M);

// Solve M X = rhs for SPD M via Cholesky plus one iterative refinement pass.
Matrix solve_spd(const Matrix& M, const Matrix& rhs);
Vector solve_spd(const Matrix& M, const Vector& rhs);

// exp(A t) by scaling-and-squaring on a Taylor series summed to machine
// precision; relative error <= 1e-12 for ||A t||_1 <= 10.
Matrix expm(const Matrix& A, double t = 1.0);

// Solve A P + P A^T + Q = 0 through the n^2 x n^2 Kronecker form
// (I kron A + A kron I) vec(P) = -vec(Q). Throws SingularSystem when the
// operator is singular or when Q is PSD but the solution is not (the drift
// then has no stationary covariance).
Matrix lyapunov_solve(const Matrix& A, const Matrix& Q);

Matrix symmetrize(const Matrix& M);

// Smallest eigenvalue of a symmetric matrix; the PSD probe.
double min_eigenvalue_sym(const Matrix& M);

bool is_finite(const Matrix& M);
bool is_symmetric(const Matrix& M, double tol = 1e-10);

}  // namespace numkit
}  // namespace filtkit
