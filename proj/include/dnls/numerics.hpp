#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dnls::numerics {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y ~ slope*x + intercept.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);
/// Fit log y against log x; every entry must be positive.
LinearFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// Richardson table for samples F(h0), F(h0/r), F(h0/r^2), ... with error
/// expansion in integer powers of h. Returns the fully extrapolated value and
/// the difference between the two highest-order estimates.
template <class T>
struct Extrapolation {
  T value{};
  double error_estimate = 0.0;
};

template <class T>
Extrapolation<T> richardson(const std::vector<T>& samples, double ratio);

/// Solve a (possibly complex) tridiagonal system with Gaussian elimination
/// without pivoting. lower[i] couples row i+1 to column i, upper[i] couples
/// row i to column i+1.
Eigen::VectorXcd solve_tridiagonal(std::span<const std::complex<double>> lower,
                                   std::span<const std::complex<double>> diag,
                                   std::span<const std::complex<double>> upper, const Eigen::VectorXcd& rhs);

struct TridiagonalEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns, empty when not requested
};

/// Eigenpairs of the real symmetric tridiagonal matrix (diag, off) via LAPACK
/// dstevr. With a value window only eigenvalues in (lo, hi] are returned.
TridiagonalEigen symmetric_tridiagonal_eigen(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                             bool vectors);
TridiagonalEigen symmetric_tridiagonal_eigen(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                                             bool vectors, double lo, double hi);

/// Four-point Lagrange weights (value and first derivative) at x for nodes xs.
struct LagrangeWeights {
  double w[4];
  double dw[4];
};
LagrangeWeights lagrange4(const double xs[4], double x);

}  // namespace dnls::numerics
