#include "dnls/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <mutex>
#include <cstdio>
#include <numbers>

#include "dnls/numerics.hpp"

namespace dnls {

namespace {

Eigen::VectorXd H_diagonal(const Potential& V) { return (V.values().array() + 2.0).matrix(); }
Eigen::VectorXd H_offdiagonal(const Potential& V) { return Eigen::VectorXd::Constant(V.grid().size() - 1, -1.0); }

double decay_rate_for(double e) {
  // Exponential ansatz e^{-kappa|n|} away from the potential: e = 2 - 2cosh(kappa)
  // below the band and e = 2 + 2cosh(kappa) above it (staggered).
  const double c = e < 0 ? (2.0 - e) / 2.0 : (e - 2.0) / 2.0;
  return std::acosh(std::max(1.0, c));
}

}  // namespace

double SpectralData::min_decay_rate() const {
  if (decay_rates.empty()) return 0.0;
  return *std::min_element(decay_rates.begin(), decay_rates.end());
}

SpectralData discrete_spectrum(const Potential& V, const SpectrumOptions& options) {
  const Eigen::VectorXd diag = H_diagonal(V);
  const Eigen::VectorXd off = H_offdiagonal(V);
  const double margin = 10.0 * options.truncation_tolerance;
  const double big = 4.0 + 2.0 + diag.cwiseAbs().maxCoeff();

  SpectralData out;
  out.grid = V.grid();
  if (V.grid().size() < 2) throw ValidationError("discrete_spectrum: grid too small");

  // Below the band and above it, separately.
  std::vector<std::pair<double, Eigen::VectorXd>> pairs;
  auto collect = [&](double lo, double hi) {
    auto r = numerics::symmetric_tridiagonal_eigen(diag, off, true, lo, hi);
    for (Eigen::Index k = 0; k < r.values.size(); ++k) pairs.emplace_back(r.values[k], r.vectors.col(k));
  };
  collect(-big, -margin);
  collect(4.0 + margin, big);
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  for (std::size_t k = 0; k + 1 < pairs.size(); ++k) {
    if (std::abs(pairs[k + 1].first - pairs[k].first) < options.degeneracy_tolerance) {
      throw ValidationError("discrete_spectrum: degenerate eigenvalues near " + std::to_string(pairs[k].first));
    }
  }

  out.band_margin = pairs.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  const int n = V.grid().size();
  for (auto& [e, phi] : pairs) {
    phi.normalize();
    Eigen::Index imax = 0;
    phi.cwiseAbs().maxCoeff(&imax);
    if (phi[imax] < 0) phi = -phi;

    Eigen::VectorXd hphi;
    apply_H(V, phi, hphi);
    const double res = (hphi - e * phi).norm();

    const int layer = std::min(options.boundary_layer, n / 2);
    const double edge_mass = phi.head(layer).squaredNorm() + phi.tail(layer).squaredNorm();
    if (edge_mass > options.truncation_tolerance) {
      out.warnings.push_back("eigenfunction at e=" + std::to_string(e) + " has boundary mass " +
                             std::to_string(edge_mass) + "; enlarge the lattice");
    }
    out.eigenvalues.push_back(e);
    out.eigenfunctions.push_back(phi);
    out.residuals.push_back(res);
    out.decay_rates.push_back(decay_rate_for(e));
    out.band_margin = std::min(out.band_margin, e < 0 ? -e : e - 4.0);
  }
  return out;
}

Eigen::VectorXcd pc_project(const Eigen::VectorXcd& u, const SpectralData& spec) {
  if (u.size() != spec.grid.size()) throw GridMismatch("pc_project: field and spectral data on different grids");
  Eigen::VectorXcd out = u;
  for (const auto& phi : spec.eigenfunctions) {
    const cplx c = phi.cast<cplx>().dot(u);  // sum u(n) phi(n), phi real
    out -= c * phi.cast<cplx>();
  }
  return out;
}

LatticeField pc_project(const LatticeField& u, const SpectralData& spec) {
  require_same_grid(u.grid(), spec.grid, "pc_project");
  return LatticeField(u.grid(), pc_project(u.values(), spec));
}

// Resolvent -------------------------------------------------------------------

ResolventSample resolvent_solve(double omega, double epsilon, const LatticeField& f, const Potential& V) {
  require_same_grid(f.grid(), V.grid(), "resolvent_solve");
  if (epsilon < 0) throw ValidationError("resolvent_solve: epsilon must be nonnegative");
  if (epsilon == 0.0) {
    if (omega >= 0.0 && omega <= 4.0) {
      throw ValidationError("resolvent_solve: epsilon = 0 with omega in the band [0,4] is singular");
    }
    const SpectralData spec = discrete_spectrum(V);
    for (double e : spec.eigenvalues) {
      if (std::abs(e - omega) < 1e-12) throw ValidationError("resolvent_solve: omega is an eigenvalue");
    }
  }
  const int n = V.grid().size();
  const cplx shift(omega, epsilon);
  std::vector<cplx> diag(n), lower(n - 1, cplx(-1.0, 0.0)), upper(n - 1, cplx(-1.0, 0.0));
  for (int i = 0; i < n; ++i) diag[i] = 2.0 + V.values()[i] - shift;
  Eigen::VectorXcd x = numerics::solve_tridiagonal(lower, diag, upper, f.values());

  Eigen::VectorXcd hx;
  apply_H(V, x, hx);
  const double fn = f.values().norm();
  const double res = (hx - shift * x - f.values()).norm();

  ResolventSample s;
  s.omega = omega;
  s.epsilon = epsilon;
  s.solution = LatticeField(V.grid(), std::move(x));
  s.relative_residual = fn > 0 ? res / fn : res;
  return s;
}

double ladder_epsilon0(const LatticeGrid& grid, double omega, const LadderOptions& o) {
  if (o.epsilon0 > 0) return o.epsilon0;
  const int n = std::max(grid.half_width(), o.min_half_width);
  const double sin_xi = std::sqrt(std::max(0.0, 1.0 - 0.25 * (2.0 - omega) * (2.0 - omega)));
  return 35.0 * std::max(sin_xi, 0.05) / n * std::pow(o.ratio, o.order);
}

namespace {

std::vector<double> ladder_epsilons(const LatticeGrid& grid, double omega, const LadderOptions& o) {
  if (o.order < 0 || o.epsilon0 < 0 || o.ratio <= 1) throw ValidationError("invalid epsilon ladder");
  std::vector<double> eps;
  double e = ladder_epsilon0(grid, omega, o);
  for (int k = 0; k <= o.order; ++k) {
    eps.push_back(e);
    e /= o.ratio;
  }
  return eps;
}

LatticeField pad_field(const LatticeField& f, const LatticeGrid& target) {
  LatticeField out(target);
  for (int i = 0; i < f.grid().size(); ++i) out.at(f.grid().site(i)) = f.values()[i];
  return out;
}

LatticeField crop_field(const LatticeField& f, const LatticeGrid& target) {
  LatticeField out(target);
  for (int i = 0; i < target.size(); ++i) out.values()[i] = f(target.site(i));
  return out;
}

LatticeGrid ladder_grid(const LatticeGrid& g, const LadderOptions& o) {
  return g.half_width() >= o.min_half_width ? g : LatticeGrid(o.min_half_width, g.boundary());
}

}  // namespace

LimitingAbsorption limiting_absorption(double omega, const LatticeField& f, const LatticeField& g, const Potential& V,
                                       const LadderOptions& options) {
  require_same_grid(f.grid(), g.grid(), "limiting_absorption");
  require_same_grid(f.grid(), V.grid(), "limiting_absorption");
  if (!(omega > 0.0 && omega < 4.0)) throw ValidationError("limiting_absorption: omega must lie in (0,4)");
  const LatticeGrid work = ladder_grid(V.grid(), options);
  const Potential Vw = V.regrid(work);
  const LatticeField fw = pad_field(f, work);
  const LatticeField gw = pad_field(g, work);
  LimitingAbsorption out;
  out.epsilons = ladder_epsilons(work, omega, options);
  for (double eps : out.epsilons) {
    const ResolventSample s = resolvent_solve(omega, eps, fw, Vw);
    out.ladder.push_back(inner(s.solution, gw));
    out.ladder_reversed.push_back(inner(gw, s.solution));
  }
  out.value_reversed = numerics::richardson(out.ladder_reversed, options.ratio).value;
  const auto ex = numerics::richardson(out.ladder, options.ratio);
  out.value = ex.value;
  out.error_estimate = ex.error_estimate;
  const double tol = std::max(options.abs_tolerance, options.rel_tolerance * std::abs(out.value));
  if (out.error_estimate > tol) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "limiting_absorption: ladder did not converge (error %.3e > tolerance %.3e)",
                  out.error_estimate, tol);
    throw NumericalError(buf);
  }
  return out;
}

LatticeField outgoing_resolvent(double omega, const LatticeField& f, const Potential& V, const LadderOptions& options) {
  require_same_grid(f.grid(), V.grid(), "outgoing_resolvent");
  if (!(omega > 0.0 && omega < 4.0)) throw ValidationError("outgoing_resolvent: omega must lie in (0,4)");
  const LatticeGrid work = ladder_grid(V.grid(), options);
  const Potential Vw = V.regrid(work);
  const LatticeField fw = pad_field(f, work);
  std::vector<Eigen::VectorXcd> rungs;
  for (double eps : ladder_epsilons(work, omega, options)) rungs.push_back(resolvent_solve(omega, eps, fw, Vw).solution.values());
  return crop_field(LatticeField(work, numerics::richardson(rungs, options.ratio).value), V.grid());
}

// Scattering ------------------------------------------------------------------

JostPair jost_solutions(double xi, const Potential& V, double resonance_tolerance) {
  if (!(xi > 0.0 && xi < std::numbers::pi)) throw ValidationError("jost_solutions: xi must lie in (0, pi)");
  const LatticeGrid& g = V.grid();
  const int N = g.half_width();
  const int n = g.size();
  const double lambda = 2.0 - 2.0 * std::cos(xi);
  const cplx I(0.0, 1.0);

  // Extended arrays over sites -N-1..N+1 (index k <-> site k-N-1); V = 0 outside.
  const int m = n + 2;
  std::vector<cplx> fp(m), fm(m);
  auto Vat = [&](int k) { return V(k - N - 1); };
  fp[m - 1] = std::exp(I * xi * double(N + 1));
  fp[m - 2] = std::exp(I * xi * double(N));
  for (int k = m - 2; k >= 1; --k) fp[k - 1] = (2.0 + Vat(k) - lambda) * fp[k] - fp[k + 1];
  fm[0] = std::exp(-I * xi * double(-N - 1));
  fm[1] = std::exp(-I * xi * double(-N));
  for (int k = 1; k <= m - 2; ++k) fm[k + 1] = (2.0 + Vat(k) - lambda) * fm[k] - fm[k - 1];

  JostPair out;
  const int centre = N + 1;
  out.wronskian = fp[centre + 1] * fm[centre] - fp[centre] * fm[centre + 1];
  double spread = 0.0;
  for (int k = 0; k + 1 < m; ++k) {
    const cplx w = fp[k + 1] * fm[k] - fp[k] * fm[k + 1];
    spread = std::max(spread, std::abs(w - out.wronskian));
  }
  out.wronskian_spread = spread;
  if (std::abs(out.wronskian) < resonance_tolerance) {
    throw NumericalError("jost_solutions: Wronskian vanishes at xi=" + std::to_string(xi) + " (resonance)");
  }

  out.plus.quasi_momentum = xi;
  out.plus.side = JostSide::plus;
  out.plus.values = Eigen::Map<Eigen::VectorXcd>(fp.data() + 1, n);
  out.plus.wronskian_with_partner = out.wronskian;
  out.minus.quasi_momentum = xi;
  out.minus.side = JostSide::minus;
  out.minus.values = Eigen::Map<Eigen::VectorXcd>(fm.data() + 1, n);
  out.minus.wronskian_with_partner = out.wronskian;
  return out;
}

cplx distorted_ft(const LatticeField& f, double xi, const Potential& V) {
  require_same_grid(f.grid(), V.grid(), "distorted_ft");
  const double a = std::abs(xi);
  if (!(a > 0.0 && a < std::numbers::pi)) throw ValidationError("distorted_ft: need 0 < |xi| < pi");
  const JostPair jp = jost_solutions(a, V);
  const cplx T = cplx(0.0, 2.0 * std::sin(a)) / jp.wronskian;
  const Eigen::VectorXcd& basis = xi > 0 ? jp.plus.values : jp.minus.values;
  // sum f(n) conj(T basis(n))
  const cplx pairing = basis.dot(f.values()) * std::conj(T);
  return pairing / std::sqrt(2.0 * std::numbers::pi);
}

EdgeScan check_generic_edges(const Potential& V, double threshold) {
  EdgeScan scan;
  scan.min_abs_wronskian = std::numeric_limits<double>::infinity();
  for (double d : {1e-4, 1e-3, 1e-2}) {
    for (double xi : {d, std::numbers::pi - d}) {
      const JostPair jp = jost_solutions(xi, V, 0.0);
      const double w = std::abs(jp.wronskian);
      if (w < scan.min_abs_wronskian) {
        scan.min_abs_wronskian = w;
        scan.at_xi = xi;
      }
    }
  }
  scan.generic = scan.min_abs_wronskian > threshold;
  return scan;
}

// Linear propagation ----------------------------------------------------------

SpectralPropagator::SpectralPropagator(const Potential& V) : V_(V) {
  auto r = numerics::symmetric_tridiagonal_eigen(H_diagonal(V), H_offdiagonal(V), true);
  eig_.values = std::move(r.values);
  eig_.vectors = std::move(r.vectors);
}

Eigen::VectorXcd SpectralPropagator::coefficients(const LatticeField& u0) const {
  require_same_grid(u0.grid(), V_.grid(), "SpectralPropagator");
  Eigen::VectorXcd c(eig_.values.size());
  c.real() = eig_.vectors.transpose() * u0.values().real();
  c.imag() = eig_.vectors.transpose() * u0.values().imag();
  return c;
}

LatticeField SpectralPropagator::evolve_coefficients(const Eigen::VectorXcd& c, double t) const {
  Eigen::VectorXcd phased(c.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) phased[k] = c[k] * std::polar(1.0, -eig_.values[k] * t);
  Eigen::VectorXcd out(c.size());
  out.real() = eig_.vectors * phased.real();
  out.imag() = eig_.vectors * phased.imag();
  return LatticeField(V_.grid(), std::move(out));
}

LatticeField SpectralPropagator::apply(const LatticeField& u0, double t) const {
  if (t == 0.0) return u0;
  return evolve_coefficients(coefficients(u0), t);
}

std::shared_ptr<const SpectralPropagator> spectral_propagator(const Potential& V) {
  static std::mutex mutex;
  static std::list<std::shared_ptr<const SpectralPropagator>> cache;
  constexpr std::size_t capacity = 2;
  {
    std::lock_guard lock(mutex);
    for (auto it = cache.begin(); it != cache.end(); ++it) {
      if ((*it)->potential() == V) {
        auto hit = *it;
        cache.erase(it);
        cache.push_front(hit);
        return hit;
      }
    }
  }
  auto fresh = std::make_shared<const SpectralPropagator>(V);
  std::lock_guard lock(mutex);
  cache.push_front(fresh);
  while (cache.size() > capacity) cache.pop_back();
  return fresh;
}

LatticeField propagate_linear(const LatticeField& u0, double t, const Potential& V) {
  require_same_grid(u0.grid(), V.grid(), "propagate_linear");
  if (t == 0.0) return u0;
  return spectral_propagator(V)->apply(u0, t);
}

// Decay experiments -----------------------------------------------------------

DecayFit decay_exponent_experiment(DecayKind kind, const Potential& V, double t_max, const DecayOptions& options) {
  if (options.n_times < 4) throw ValidationError("decay experiment needs at least 4 time samples");
  const double reflection_time = 0.5 * V.grid().half_width();
  if (!(t_max > 0) || t_max >= reflection_time) {
    throw ValidationError("decay experiment: t_max must be below the reflection time N/2 = " +
                          std::to_string(reflection_time));
  }
  const SpectralData spec = discrete_spectrum(V);
  LatticeField initial(V.grid());
  if (kind == DecayKind::sup_norm_l0) {
    initial = pc_project(LatticeField::delta(V.grid(), 0), spec);
  } else {
    std::vector<double> src = options.source.empty() ? std::vector<double>{1.0, 0.5} : options.source;
    LatticeField f(V.grid());
    for (std::size_t k = 0; k < src.size(); ++k) f.at(static_cast<int>(k)) = src[k];
    f = pc_project(f, spec);
    initial = pc_project(outgoing_resolvent(options.omega, f, V, options.ladder), spec);
  }

  auto prop = spectral_propagator(V);
  const Eigen::VectorXcd c = prop->coefficients(initial);
  DecayFit fit;
  const double t0 = t_max / 10.0;
  for (int k = 0; k < options.n_times; ++k) {
    const double t = t0 * std::pow(t_max / t0, double(k) / double(options.n_times - 1));
    const LatticeField u = prop->evolve_coefficients(c, t);
    fit.times.push_back(t);
    fit.norms.push_back(kind == DecayKind::sup_norm_l0 ? norm_sup(u) : norm_weighted(u, 2.0, -options.sigma));
  }
  const auto line = numerics::fit_loglog(fit.times, fit.norms);
  fit.slope = line.slope;
  fit.r_squared = line.r_squared;
  return fit;
}

}  // namespace dnls
