#pragma once

#include <complex>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace dwsec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

namespace numerics {

// Module tolerances. Every solver accepts an override.
inline constexpr double kLyapunovResidualTol = 1e-10;
inline constexpr double kDareResidualTol = 1e-9;
inline constexpr int kDareMaxIterations = 10000;
inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kEigenConditionWarn = 1e8;
inline constexpr double kEigenReconstructionTol = 1e-6;

double spectral_radius(const Matrix& m);

/// Solves M = phi M phi^T + q by a Kronecker-vectorized linear solve.
/// Throws DivergenceError when rho(phi) >= 1 and InputError when q is not
/// symmetric.
Matrix solve_discrete_lyapunov(const Matrix& phi, const Matrix& q,
                               double residual_tol = kLyapunovResidualTol);

struct DareOptions {
  double residual_tol = kDareResidualTol;
  int max_iterations = kDareMaxIterations;
};

/// Filter Riccati equation (a priori covariance):
///   P = A P A^T - A P C^T (C P C^T + V)^-1 C P A^T + W
/// Fixed-point iteration of the Riccati map from P0 = W.
Matrix solve_dare_estimator(const Matrix& a, const Matrix& c,
                            const Matrix& process_cov, const Matrix& meas_cov,
                            const DareOptions& opts = {});

/// Control Riccati equation:
///   S = A^T S A - A^T S B (B^T S B + R)^-1 B^T S A + Q
/// Fixed-point iteration of the Riccati map from S0 = Q.
Matrix solve_dare_controller(const Matrix& a, const Matrix& b, const Matrix& q,
                             const Matrix& r, const DareOptions& opts = {});

/// Frobenius residual of the filter Riccati equation at p.
double estimator_dare_residual(const Matrix& a, const Matrix& c,
                               const Matrix& process_cov,
                               const Matrix& meas_cov, const Matrix& p);

double controller_dare_residual(const Matrix& a, const Matrix& b,
                                const Matrix& q, const Matrix& r,
                                const Matrix& s);

struct EigenResult {
  ComplexVector eigenvalues;
  ComplexMatrix eigenvectors;  // unit Euclidean columns
  double condition_number = 0.0;
  double reconstruction_error = 0.0;  // ||V D V^-1 - M||_F / ||M||_F
  std::optional<std::string> warning;
};

EigenResult eigen_decompose(const Matrix& m);

struct SingularValueExtremes {
  double s_max = 0.0;
  double s_min = 0.0;
};

SingularValueExtremes singular_value_extremes(const Matrix& m);
SingularValueExtremes singular_value_extremes(const ComplexMatrix& m);

}  // namespace numerics
}  // namespace dwsec
