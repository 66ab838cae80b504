#include "dnls/lattice.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace dnls {

LatticeGrid::LatticeGrid(int half_width, Boundary boundary) : half_width_(half_width), boundary_(boundary) {
  if (half_width < 1) throw ValidationError("lattice half-width must be positive, got " + std::to_string(half_width));
}

void require_same_grid(const LatticeGrid& a, const LatticeGrid& b, const char* what) {
  if (!(a == b)) {
    throw GridMismatch(std::string(what) + ": grids differ (N=" + std::to_string(a.half_width()) +
                       " vs N=" + std::to_string(b.half_width()) + ")");
  }
}

// LatticeField ----------------------------------------------------------------

LatticeField::LatticeField(LatticeGrid grid) : grid_(grid), values_(Eigen::VectorXcd::Zero(grid.size())) {}

LatticeField::LatticeField(LatticeGrid grid, Eigen::VectorXcd values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw GridMismatch("field length does not match grid size");
  if (!all_finite()) throw ValidationError("field has non-finite entries");
}

LatticeField::LatticeField(LatticeGrid grid, const Eigen::VectorXd& real_values)
    : LatticeField(grid, Eigen::VectorXcd(real_values.cast<cplx>())) {}

LatticeField LatticeField::delta(LatticeGrid grid, int site, cplx amplitude) {
  LatticeField u(grid);
  u.at(site) = amplitude;
  return u;
}

cplx& LatticeField::at(int site) {
  if (!grid_.contains(site)) throw ValidationError("site " + std::to_string(site) + " outside the lattice");
  return values_[grid_.index(site)];
}

bool LatticeField::all_finite() const {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i].real()) || !std::isfinite(values_[i].imag())) return false;
  }
  return true;
}

LatticeField LatticeField::operator+(const LatticeField& other) const {
  require_same_grid(grid_, other.grid_, "field addition");
  return LatticeField(grid_, Eigen::VectorXcd(values_ + other.values_));
}

LatticeField LatticeField::operator-(const LatticeField& other) const {
  require_same_grid(grid_, other.grid_, "field subtraction");
  return LatticeField(grid_, Eigen::VectorXcd(values_ - other.values_));
}

LatticeField LatticeField::operator*(cplx s) const { return LatticeField(grid_, Eigen::VectorXcd(values_ * s)); }

// Potential -------------------------------------------------------------------

Potential::Potential(LatticeGrid grid) : grid_(grid), values_(Eigen::VectorXd::Zero(grid.size())) {}

Potential::Potential(LatticeGrid grid, Eigen::VectorXd values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw GridMismatch("potential length does not match grid size");
  if (!values_.allFinite()) throw ValidationError("potential has non-finite entries");
}

Potential Potential::single_site(LatticeGrid grid, double v0) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(grid.size());
  v[grid.index(0)] = -v0;
  return Potential(grid, std::move(v));
}

Potential Potential::two_site(LatticeGrid grid, double v0, int d) {
  if (d < 1 || !grid.contains(d)) throw ValidationError("two-site well separation must satisfy 1 <= d <= N");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(grid.size());
  v[grid.index(-d)] = -v0;
  v[grid.index(d)] = -v0;
  return Potential(grid, std::move(v));
}

double Potential::first_moment() const {
  double s = 0.0;
  for (int i = 0; i < grid_.size(); ++i) s += (1.0 + std::abs(grid_.site(i))) * std::abs(values_[i]);
  return s;
}

double Potential::tail_max() const {
  double m = 0.0;
  const int half = grid_.half_width() / 2;
  for (int i = 0; i < grid_.size(); ++i) {
    if (std::abs(grid_.site(i)) > half) m = std::max(m, std::abs(values_[i]));
  }
  return m;
}

int Potential::support_radius(double threshold) const {
  int r = 0;
  for (int i = 0; i < grid_.size(); ++i) {
    if (std::abs(values_[i]) > threshold) r = std::max(r, std::abs(grid_.site(i)));
  }
  return r;
}

Potential Potential::regrid(LatticeGrid target) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(target.size());
  for (int i = 0; i < target.size(); ++i) v[i] = (*this)(target.site(i));
  return Potential(target, std::move(v));
}

bool Potential::operator==(const Potential& other) const {
  return grid_ == other.grid_ && values_ == other.values_;
}

// Nonlinearity ----------------------------------------------------------------

NonlinearityCoefficients::NonlinearityCoefficients(std::vector<double> lambda) : lambda_(std::move(lambda)) {
  for (double l : lambda_) {
    if (!std::isfinite(l)) throw ValidationError("nonlinearity coefficient is not finite");
  }
}

double NonlinearityCoefficients::beta(double s) const {
  // Horner in s starting at s^3.
  double tail = 0.0;
  for (auto it = lambda_.rbegin(); it != lambda_.rend(); ++it) tail = tail * s + *it;
  return s * s * s * (1.0 + s * tail);
}

double NonlinearityCoefficients::beta_prime(double s) const {
  double d = 3.0 * s * s;
  double p = s * s * s;
  for (std::size_t k = 0; k < lambda_.size(); ++k) {
    const double j = static_cast<double>(k + 4);
    d += lambda_[k] * j * p;
    p *= s;
  }
  return d;
}

double NonlinearityCoefficients::antiderivative(double s) const {
  double b = 0.25 * s * s * s * s;
  double p = s * s * s * s * s;
  for (std::size_t k = 0; k < lambda_.size(); ++k) {
    const double j = static_cast<double>(k + 4);
    b += lambda_[k] * p / (j + 1.0);
    p *= s;
  }
  return b;
}

// Operators -------------------------------------------------------------------

LatticeField discrete_laplacian(const LatticeField& u) {
  const Eigen::VectorXcd& x = u.values();
  const Eigen::Index n = x.size();
  Eigen::VectorXcd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const cplx left = i > 0 ? x[i - 1] : cplx{};
    const cplx right = i + 1 < n ? x[i + 1] : cplx{};
    out[i] = right - 2.0 * x[i] + left;
  }
  return LatticeField(u.grid(), std::move(out));
}

template <class Vec>
static void apply_H_impl(const Potential& V, const Vec& u, Vec& out) {
  const Eigen::Index n = u.size();
  const Eigen::VectorXd& v = V.values();
  out.resize(n);
  if (n == 1) {
    out[0] = (2.0 + v[0]) * u[0];
    return;
  }
  out[0] = (2.0 + v[0]) * u[0] - u[1];
  for (Eigen::Index i = 1; i + 1 < n; ++i) out[i] = (2.0 + v[i]) * u[i] - u[i - 1] - u[i + 1];
  out[n - 1] = (2.0 + v[n - 1]) * u[n - 1] - u[n - 2];
}

void apply_H(const Potential& V, const Eigen::VectorXcd& u, Eigen::VectorXcd& out) { apply_H_impl(V, u, out); }
void apply_H(const Potential& V, const Eigen::VectorXd& u, Eigen::VectorXd& out) { apply_H_impl(V, u, out); }

LatticeField apply_H(const LatticeField& u, const Potential& V) {
  require_same_grid(u.grid(), V.grid(), "apply_H");
  Eigen::VectorXcd out;
  apply_H(V, u.values(), out);
  return LatticeField(u.grid(), std::move(out));
}

LatticeField stagger(const LatticeField& u) {
  Eigen::VectorXcd out = u.values();
  for (int i = 0; i < u.grid().size(); ++i) {
    if (u.grid().site(i) % 2 != 0) out[i] = -out[i];
  }
  return LatticeField(u.grid(), std::move(out));
}

Potential negate(const Potential& V) { return Potential(V.grid(), Eigen::VectorXd(-V.values())); }

// Inner products and norms ----------------------------------------------------

double inner_real(const LatticeField& u, const LatticeField& v) { return inner(u, v).real(); }

cplx inner(const LatticeField& u, const LatticeField& v) {
  require_same_grid(u.grid(), v.grid(), "inner product");
  // Eigen's dot conjugates the first argument.
  return v.values().dot(u.values());
}

double mass(const LatticeField& u) { return u.values().squaredNorm(); }
double norm_l2(const LatticeField& u) { return u.values().norm(); }
double norm_sup(const LatticeField& u) { return u.values().size() ? u.values().cwiseAbs().maxCoeff() : 0.0; }

double norm_weighted(const LatticeField& u, double p, double sigma) {
  if (p < 1.0) throw ValidationError("weighted norm needs p >= 1");
  double s = 0.0;
  for (int i = 0; i < u.grid().size(); ++i) {
    const double n = u.grid().site(i);
    const double w = std::pow(1.0 + n * n, 0.5 * p * sigma);
    s += w * std::pow(std::abs(u.values()[i]), p);
  }
  return std::pow(s, 1.0 / p);
}

double norm_exponential(const LatticeField& u, double a) {
  double s = 0.0;
  for (int i = 0; i < u.grid().size(); ++i) {
    const double n = std::abs(u.grid().site(i));
    s += std::exp(2.0 * a * n) * std::norm(u.values()[i]);
  }
  return std::sqrt(s);
}

double energy(const LatticeField& u, const Potential& V, const NonlinearityCoefficients& coeffs) {
  require_same_grid(u.grid(), V.grid(), "energy");
  Eigen::VectorXcd hu;
  apply_H(V, u.values(), hu);
  const double quadratic = hu.dot(u.values()).real();
  double potential = 0.0;
  for (Eigen::Index i = 0; i < u.values().size(); ++i) potential += coeffs.antiderivative(std::norm(u.values()[i]));
  return 0.5 * quadratic + 0.5 * potential;
}

// CSV -------------------------------------------------------------------------

void write_field_csv(const std::filesystem::path& path, const LatticeField& u) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "n,re,im\n" << std::setprecision(17);
  for (int i = 0; i < u.grid().size(); ++i) {
    os << u.grid().site(i) << ',' << u.values()[i].real() << ',' << u.values()[i].imag() << '\n';
  }
}

LatticeField read_field_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line.rfind("n,re,im", 0) != 0) throw ValidationError(path.string() + ": expected header n,re,im");
  std::vector<int> sites;
  std::vector<cplx> vals;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected three columns");
    }
    sites.push_back(std::stoi(a));
    vals.emplace_back(std::stod(b), std::stod(c));
  }
  if (sites.empty() || sites.size() % 2 == 0) throw ValidationError(path.string() + ": need 2N+1 rows");
  const int N = static_cast<int>(sites.size() / 2);
  LatticeGrid grid(N);
  Eigen::VectorXcd v(grid.size());
  for (std::size_t k = 0; k < sites.size(); ++k) {
    if (sites[k] != grid.site(static_cast<int>(k))) throw ValidationError(path.string() + ": sites must run -N..N");
    v[static_cast<Eigen::Index>(k)] = vals[k];
  }
  return LatticeField(grid, std::move(v));
}

}  // namespace dnls
