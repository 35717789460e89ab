#include "dwsec/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "dwsec/errors.hpp"

namespace dwsec::numerics {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << m.rows() << "x"
       << m.cols();
    throw DimensionError(os.str());
  }
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                   const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << m.rows()
       << "x" << m.cols();
    throw DimensionError(os.str());
  }
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix estimator_riccati_map(const Matrix& a, const Matrix& c,
                             const Matrix& w, const Matrix& v,
                             const Matrix& p) {
  const Matrix apct = a * p * c.transpose();
  const Matrix innov = c * p * c.transpose() + v;
  return symmetrized(a * p * a.transpose() -
                     apct * innov.ldlt().solve(apct.transpose()) + w);
}

Matrix controller_riccati_map(const Matrix& a, const Matrix& b,
                              const Matrix& q, const Matrix& r,
                              const Matrix& s) {
  const Matrix btsa = b.transpose() * s * a;
  const Matrix gram = b.transpose() * s * b + r;
  return symmetrized(a.transpose() * s * a -
                     btsa.transpose() * gram.ldlt().solve(btsa) + q);
}

// Iterates x <- map(x) until the Riccati residual is below tol and the
// iterate has stopped moving at working precision.
template <typename Map>
Matrix iterate_riccati(Map&& map, Matrix x, const DareOptions& opts,
                       const char* name) {
  double residual = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Matrix next = map(x);
    residual = (next - x).norm();
    const double scale = std::max(next.norm(), 1e-300);
    x = std::move(next);
    if (!x.allFinite()) {
      throw ConvergenceError(std::string(name) + ": iterate became non-finite",
                             residual);
    }
    if (residual <= opts.residual_tol && residual <= 1e-13 * scale) {
      return x;
    }
  }
  residual = (map(x) - x).norm();
  if (residual <= opts.residual_tol) return x;
  std::ostringstream os;
  os << name << ": no convergence within " << opts.max_iterations
     << " iterations (residual " << residual << ")";
  throw ConvergenceError(os.str(), residual);
}

}  // namespace

double spectral_radius(const Matrix& m) {
  require_square(m, "spectral_radius");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix solve_discrete_lyapunov(const Matrix& phi, const Matrix& q,
                               double residual_tol) {
  require_square(phi, "solve_discrete_lyapunov(phi)");
  const Eigen::Index n = phi.rows();
  require_shape(q, n, n, "solve_discrete_lyapunov(q)");
  if ((q - q.transpose()).norm() > kSymmetryTol * std::max(1.0, q.norm())) {
    throw InputError("solve_discrete_lyapunov: q is not symmetric");
  }
  const double rho = spectral_radius(phi);
  if (rho >= 1.0) {
    std::ostringstream os;
    os << "solve_discrete_lyapunov: spectral radius " << rho
       << " >= 1, no stationary solution";
    throw DivergenceError(os.str());
  }
  if (n == 0) return Matrix(0, 0);

  // vec(M) = (I - phi (x) phi)^-1 vec(q), column-major vec.
  const Eigen::Index n2 = n * n;
  Matrix kron(n2, n2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) = phi(i, j) * phi;
    }
  }
  const Matrix lhs = Matrix::Identity(n2, n2) - kron;
  const Vector rhs = Eigen::Map<const Vector>(q.data(), n2);
  Vector sol = lhs.partialPivLu().solve(rhs);
  Matrix m = symmetrized(Eigen::Map<Matrix>(sol.data(), n, n));

  // One step of iterative refinement keeps the residual at round-off level
  // for the 12-state closed loops.
  const Matrix resid = phi * m * phi.transpose() + q - m;
  const Vector rres = Eigen::Map<const Vector>(resid.data(), n2);
  Vector corr = lhs.partialPivLu().solve(rres);
  m = symmetrized(m + Eigen::Map<Matrix>(corr.data(), n, n));

  const double final_res = (m - (phi * m * phi.transpose() + q)).norm();
  if (final_res > residual_tol * (1.0 + m.norm())) {
    throw ConvergenceError("solve_discrete_lyapunov: residual bound violated",
                           final_res);
  }
  return m;
}

Matrix solve_dare_estimator(const Matrix& a, const Matrix& c,
                            const Matrix& process_cov, const Matrix& meas_cov,
                            const DareOptions& opts) {
  require_square(a, "solve_dare_estimator(a)");
  const Eigen::Index n = a.rows();
  if (c.cols() != n) throw DimensionError("solve_dare_estimator: c columns");
  require_shape(process_cov, n, n, "solve_dare_estimator(process_cov)");
  require_shape(meas_cov, c.rows(), c.rows(), "solve_dare_estimator(meas_cov)");
  return iterate_riccati(
      [&](const Matrix& p) {
        return estimator_riccati_map(a, c, process_cov, meas_cov, p);
      },
      symmetrized(process_cov), opts, "solve_dare_estimator");
}

Matrix solve_dare_controller(const Matrix& a, const Matrix& b, const Matrix& q,
                             const Matrix& r, const DareOptions& opts) {
  require_square(a, "solve_dare_controller(a)");
  const Eigen::Index n = a.rows();
  if (b.rows() != n) throw DimensionError("solve_dare_controller: b rows");
  require_shape(q, n, n, "solve_dare_controller(q)");
  require_shape(r, b.cols(), b.cols(), "solve_dare_controller(r)");
  return iterate_riccati(
      [&](const Matrix& s) { return controller_riccati_map(a, b, q, r, s); },
      symmetrized(q), opts, "solve_dare_controller");
}

double estimator_dare_residual(const Matrix& a, const Matrix& c,
                               const Matrix& process_cov,
                               const Matrix& meas_cov, const Matrix& p) {
  return (estimator_riccati_map(a, c, process_cov, meas_cov, p) - p).norm();
}

double controller_dare_residual(const Matrix& a, const Matrix& b,
                                const Matrix& q, const Matrix& r,
                                const Matrix& s) {
  return (controller_riccati_map(a, b, q, r, s) - s).norm();
}

EigenResult eigen_decompose(const Matrix& m) {
  require_square(m, "eigen_decompose");
  EigenResult out;
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("eigen_decompose: QR iteration failed", 0.0);
  }
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  for (Eigen::Index j = 0; j < out.eigenvectors.cols(); ++j) {
    const double nrm = out.eigenvectors.col(j).norm();
    if (nrm > 0.0) out.eigenvectors.col(j) /= nrm;
  }

  const auto sv = singular_value_extremes(out.eigenvectors);
  out.condition_number =
      sv.s_min > 0.0 ? sv.s_max / sv.s_min
                     : std::numeric_limits<double>::infinity();

  const ComplexMatrix& v = out.eigenvectors;
  const ComplexMatrix recon =
      v * out.eigenvalues.asDiagonal() * v.partialPivLu().inverse();
  const double mnorm = std::max(m.norm(), 1e-300);
  out.reconstruction_error =
      (recon - m.cast<std::complex<double>>()).norm() / mnorm;
  if (!std::isfinite(out.condition_number) ||
      out.condition_number > kEigenConditionWarn ||
      !(out.reconstruction_error <= kEigenReconstructionTol)) {
    std::ostringstream os;
    os << "eigenvector matrix is ill-conditioned (cond " << out.condition_number
       << ", reconstruction error " << out.reconstruction_error
       << "); matrix is defective or nearly so";
    out.warning = os.str();
  }
  return out;
}

SingularValueExtremes singular_value_extremes(const Matrix& m) {
  if (m.size() == 0) return {};
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  return {s.maxCoeff(), s.minCoeff()};
}

SingularValueExtremes singular_value_extremes(const ComplexMatrix& m) {
  if (m.size() == 0) return {};
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& s = svd.singularValues();
  return {s.maxCoeff(), s.minCoeff()};
}

}  // namespace dwsec::numerics
