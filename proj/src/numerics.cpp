#include "dnls/numerics.hpp"

#include <cmath>
#include <string>

#include <lapacke.h>

#include "dnls/errors.hpp"

namespace dnls::numerics {

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("fit_line: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw ValidationError("fit_line: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("fit_line: abscissae are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

LinearFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw ValidationError("fit_loglog: non-positive sample");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return fit_line(lx, ly);
}

namespace {
double magnitude(double v) { return std::abs(v); }
double magnitude(const std::complex<double>& v) { return std::abs(v); }
double magnitude(const Eigen::VectorXcd& v) { return v.norm(); }
}  // namespace

template <class T>
Extrapolation<T> richardson(const std::vector<T>& samples, double ratio) {
  if (samples.empty()) throw ValidationError("richardson: no samples");
  // table[k] holds the order-m estimates from sample k.
  std::vector<T> row = samples;
  Extrapolation<T> out;
  if (samples.size() == 1) {
    out.value = samples[0];
    return out;
  }
  T previous_best = row.back();
  for (std::size_t m = 1; m < samples.size(); ++m) {
    const double factor = std::pow(ratio, static_cast<double>(m));
    std::vector<T> next;
    next.reserve(row.size() - 1);
    for (std::size_t k = 1; k < row.size(); ++k) {
      T refined = (row[k] * factor - row[k - 1]) / (factor - 1.0);
      next.push_back(std::move(refined));
    }
    previous_best = row.back();
    row = std::move(next);
  }
  out.value = row.back();
  out.error_estimate = magnitude(T(out.value - previous_best));
  return out;
}

template Extrapolation<double> richardson(const std::vector<double>&, double);
template Extrapolation<std::complex<double>> richardson(const std::vector<std::complex<double>>&, double);
template Extrapolation<Eigen::VectorXcd> richardson(const std::vector<Eigen::VectorXcd>&, double);

Eigen::VectorXcd solve_tridiagonal(std::span<const std::complex<double>> lower,
                                   std::span<const std::complex<double>> diag,
                                   std::span<const std::complex<double>> upper, const Eigen::VectorXcd& rhs) {
  const std::size_t n = diag.size();
  if (rhs.size() != static_cast<Eigen::Index>(n) || lower.size() + 1 != n || upper.size() + 1 != n) {
    throw ValidationError("solve_tridiagonal: inconsistent sizes");
  }
  std::vector<std::complex<double>> c(n), d(n);
  std::complex<double> piv = diag[0];
  if (piv == 0.0) throw NumericalError("solve_tridiagonal: zero pivot");
  c[0] = n > 1 ? upper[0] / piv : 0.0;
  d[0] = rhs[0] / piv;
  for (std::size_t i = 1; i < n; ++i) {
    piv = diag[i] - lower[i - 1] * c[i - 1];
    if (piv == 0.0) throw NumericalError("solve_tridiagonal: zero pivot");
    c[i] = i + 1 < n ? upper[i] / piv : 0.0;
    d[i] = (rhs[static_cast<Eigen::Index>(i)] - lower[i - 1] * d[i - 1]) / piv;
  }
  Eigen::VectorXcd x(static_cast<Eigen::Index>(n));
  x[static_cast<Eigen::Index>(n - 1)] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    x[static_cast<Eigen::Index>(i)] = d[i] - c[i] * x[static_cast<Eigen::Index>(i + 1)];
  }
  return x;
}

static TridiagonalEigen run_dstevr(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, bool vectors,
                                   char range, double lo, double hi) {
  const lapack_int n = static_cast<lapack_int>(diag.size());
  if (off.size() + 1 != diag.size()) throw ValidationError("tridiagonal eigen: off-diagonal length must be n-1");
  Eigen::VectorXd d = diag;
  Eigen::VectorXd e(n);
  e.head(n - 1) = off;
  e[n - 1] = 0.0;
  lapack_int m = 0;
  Eigen::VectorXd w(n);
  const lapack_int ldz = vectors ? n : 1;
  Eigen::MatrixXd z;
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n));
  if (vectors) z.resize(n, n);
  double dummy = 0.0;
  const lapack_int info =
      LAPACKE_dstevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', range, n, d.data(), e.data(), lo, hi, 0, 0, 0.0, &m,
                     w.data(), vectors ? z.data() : &dummy, ldz, isuppz.data());
  if (info != 0) throw NumericalError("LAPACK dstevr failed with info=" + std::to_string(info));
  TridiagonalEigen out;
  out.values = w.head(m);
  if (vectors) out.vectors = z.leftCols(m);
  return out;
}

TridiagonalEigen symmetric_tridiagonal_eigen(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, bool vectors) {
  return run_dstevr(diag, off, vectors, 'A', 0.0, 0.0);
}

TridiagonalEigen symmetric_tridiagonal_eigen(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, bool vectors,
                                             double lo, double hi) {
  return run_dstevr(diag, off, vectors, 'V', lo, hi);
}

LagrangeWeights lagrange4(const double xs[4], double x) {
  LagrangeWeights lw{};
  for (int i = 0; i < 4; ++i) {
    double num = 1.0, den = 1.0;
    for (int j = 0; j < 4; ++j) {
      if (j == i) continue;
      num *= x - xs[j];
      den *= xs[i] - xs[j];
    }
    lw.w[i] = num / den;
    double dsum = 0.0;
    for (int k = 0; k < 4; ++k) {
      if (k == i) continue;
      double prod = 1.0;
      for (int j = 0; j < 4; ++j) {
        if (j == i || j == k) continue;
        prod *= x - xs[j];
      }
      dsum += prod;
    }
    lw.dw[i] = dsum / den;
  }
  return lw;
}

}  // namespace dnls::numerics
