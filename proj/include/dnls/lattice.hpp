#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dnls/errors.hpp"

namespace dnls {

using cplx = std::complex<double>;

enum class Boundary { dirichlet };

/// Truncation of Z to the sites -N..N. Neighbours outside the window read as 0.
class LatticeGrid {
 public:
  explicit LatticeGrid(int half_width, Boundary boundary = Boundary::dirichlet);

  int half_width() const { return half_width_; }
  Boundary boundary() const { return boundary_; }
  int size() const { return 2 * half_width_ + 1; }
  int index(int site) const { return site + half_width_; }
  int site(int index) const { return index - half_width_; }
  bool contains(int site) const { return site >= -half_width_ && site <= half_width_; }

  bool operator==(const LatticeGrid&) const = default;

 private:
  int half_width_;
  Boundary boundary_;
};

void require_same_grid(const LatticeGrid& a, const LatticeGrid& b, const char* what);

/// Complex amplitude per lattice site.
class LatticeField {
 public:
  explicit LatticeField(LatticeGrid grid);
  LatticeField(LatticeGrid grid, Eigen::VectorXcd values);
  LatticeField(LatticeGrid grid, const Eigen::VectorXd& real_values);

  static LatticeField delta(LatticeGrid grid, int site, cplx amplitude = 1.0);

  const LatticeGrid& grid() const { return grid_; }
  const Eigen::VectorXcd& values() const { return values_; }
  Eigen::VectorXcd& values() { return values_; }

  /// Value at a lattice site; zero outside the window.
  cplx operator()(int site) const {
    return grid_.contains(site) ? values_[grid_.index(site)] : cplx{0.0, 0.0};
  }
  cplx& at(int site);

  bool all_finite() const;

  LatticeField operator+(const LatticeField& other) const;
  LatticeField operator-(const LatticeField& other) const;
  LatticeField operator*(cplx s) const;

 private:
  LatticeGrid grid_;
  Eigen::VectorXcd values_;
};

/// Real potential V(n) on a grid.
class Potential {
 public:
  explicit Potential(LatticeGrid grid);
  Potential(LatticeGrid grid, Eigen::VectorXd values);

  static Potential zero(LatticeGrid grid) { return Potential(grid); }
  /// V = -v0 delta_0.
  static Potential single_site(LatticeGrid grid, double v0);
  /// V = -v0 (delta_{-d} + delta_{+d}).
  static Potential two_site(LatticeGrid grid, double v0, int d);

  const LatticeGrid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator()(int site) const { return grid_.contains(site) ? values_[grid_.index(site)] : 0.0; }

  /// sum_n (1+|n|)|V(n)|.
  double first_moment() const;
  /// max |V(n)| over |n| > N/2; large values signal a potential that the
  /// truncation cuts off.
  double tail_max() const;
  /// Largest |n| with |V(n)| > threshold (0 when V vanishes).
  int support_radius(double threshold = 0.0) const;

  /// Same potential restricted or zero-padded onto another grid.
  Potential regrid(LatticeGrid target) const;

  bool operator==(const Potential& other) const;

 private:
  LatticeGrid grid_;
  Eigen::VectorXd values_;
};

/// beta(s) = s^3 + sum_{j>=4} lambda_j s^j. lambda()[k] multiplies s^(k+4).
class NonlinearityCoefficients {
 public:
  NonlinearityCoefficients() = default;
  explicit NonlinearityCoefficients(std::vector<double> lambda);

  const std::vector<double>& lambda() const { return lambda_; }
  int degree() const { return 3 + static_cast<int>(lambda_.size()); }

  double beta(double s) const;
  double beta_prime(double s) const;
  /// B(s) = int_0^s beta, integrated termwise: s^4/4 + sum lambda_j s^(j+1)/(j+1).
  double antiderivative(double s) const;

 private:
  std::vector<double> lambda_;
};

inline double beta_eval(double s, const NonlinearityCoefficients& c) { return c.beta(s); }

// Operators ------------------------------------------------------------------

LatticeField discrete_laplacian(const LatticeField& u);
LatticeField apply_H(const LatticeField& u, const Potential& V);
/// (Hu) for a raw vector on V's grid; used on hot paths.
void apply_H(const Potential& V, const Eigen::VectorXcd& u, Eigen::VectorXcd& out);
void apply_H(const Potential& V, const Eigen::VectorXd& u, Eigen::VectorXd& out);

LatticeField stagger(const LatticeField& u);
Potential negate(const Potential& V);

// Inner products and norms ---------------------------------------------------

/// <u,v> = Re sum u(n) conj(v(n)).
double inner_real(const LatticeField& u, const LatticeField& v);
/// (u,v) = sum u(n) conj(v(n)), linear in the first slot.
cplx inner(const LatticeField& u, const LatticeField& v);

double mass(const LatticeField& u);
double norm_l2(const LatticeField& u);
double norm_sup(const LatticeField& u);
/// ||u||_{l^{p,sigma}} = (sum <n>^{p sigma} |u(n)|^p)^{1/p}, <n> = sqrt(1+n^2).
double norm_weighted(const LatticeField& u, double p, double sigma);
/// ||u||_{l^a_e} = (sum e^{2a|n|} |u(n)|^2)^{1/2}.
double norm_exponential(const LatticeField& u, double a);

double energy(const LatticeField& u, const Potential& V, const NonlinearityCoefficients& coeffs);

// CSV ------------------------------------------------------------------------

/// Columns n,re,im.
void write_field_csv(const std::filesystem::path& path, const LatticeField& u);
LatticeField read_field_csv(const std::filesystem::path& path);

}  // namespace dnls
