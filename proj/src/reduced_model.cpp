#include "dnls/reduced_model.hpp"

#include <cmath>
#include <tuple>

namespace dnls {

namespace {

cplx ipow(cplx z, int p) {
  cplx r = 1.0;
  for (int k = 0; k < p; ++k) r *= z;
  return r;
}

// X = z1bar^{N0-1} z2^{N0}
cplx source_amplitude(cplx z1, cplx z2, int N0) { return ipow(std::conj(z1), N0 - 1) * ipow(z2, N0); }

}  // namespace

double PhaseCoefficients::operator()(double s1, double s2) const {
  double out = 0.0, p1 = 1.0;
  for (const auto& row : c) {
    double p2 = 1.0;
    for (double coef : row) {
      out += coef * p1 * p2;
      p2 *= s2;
    }
    p1 *= s1;
  }
  return out;
}

ReducedConfig make_reduced_config(const SpectralData& spec, int N0, InteractionProfile G) {
  if (spec.count() != 2) throw ValidationError("reduced model needs exactly two eigenvalues");
  require_same_grid(G.G.grid(), spec.grid, "make_reduced_config");
  ReducedConfig c;
  c.e1 = spec.eigenvalues[0];
  c.e2 = spec.eigenvalues[1];
  c.N0 = N0;
  G.G = pc_project(G.G, spec);
  c.G = std::move(G);
  return c;
}

std::pair<cplx, cplx> reduced_z_field(cplx z1, cplx z2, cplx pairing, const ReducedConfig& c) {
  const cplx I(0.0, 1.0);
  const int N0 = c.N0;
  const double s1 = std::norm(z1), s2 = std::norm(z2);
  const cplx f1 = (c.e1 + c.A1(s1, s2)) * z1 +
                  double(N0 - 1) * ipow(std::conj(z1), N0 - 2) * ipow(z2, N0) * pairing;
  const cplx f2 = (c.e2 + c.A2(s1, s2)) * z2 +
                  double(N0) * ipow(z1, N0 - 1) * ipow(std::conj(z2), N0 - 1) * std::conj(pairing);
  return {-I * f1, -I * f2};
}

std::pair<double, double> rate_equations_rhs(cplx z1, cplx z2, double Gamma, int N0) {
  const double P = std::pow(std::norm(z1), N0 - 1) * std::pow(std::norm(z2), N0);
  const double base = 2.0 * Gamma * P;
  return {(N0 - 1) * base, -N0 * base};
}

LatticeField outgoing_G(const ReducedConfig& config, const Potential& V) {
  const double w = config.omega_star();
  if (!(w > 0 && w < 4)) throw ValidationError("outgoing_G: omega* must lie in (0,4)");
  return outgoing_resolvent(w, config.G.G, V, config.ladder);
}

LatticeField y_ansatz(cplx z1, cplx z2, int N0, const LatticeField& resolvent_G) {
  return resolvent_G * (-source_amplitude(z1, z2, N0));
}

LatticeField y_ansatz(cplx z1, cplx z2, const ReducedConfig& config, const Potential& V) {
  if (source_amplitude(z1, z2, config.N0) == 0.0) return LatticeField(V.grid());
  return y_ansatz(z1, z2, config.N0, outgoing_G(config, V));
}

ReducedTrajectory integrate_reduced(const ReducedState& s0, const ReducedConfig& config, const Potential& V,
                                    const NonlinearityCoefficients& coeffs, const SpectralData& spec,
                                    const ReducedRunOptions& opt) {
  require_same_grid(s0.eta.grid(), V.grid(), "integrate_reduced");
  require_same_grid(config.G.G.grid(), V.grid(), "integrate_reduced");
  if (!(opt.dt > 0)) throw ValidationError("integrate_reduced: dt must be positive");
  if (opt.record_stride < 1) throw ValidationError("integrate_reduced: record_stride must be positive");
  if (config.N0 < 2) throw ValidationError("integrate_reduced: N0 must be at least 2");

  const cplx I(0.0, 1.0);
  const int N0 = config.N0;
  const Eigen::VectorXcd G = config.G.G.values();
  const TaylorLinearStepper linear(V, config.absorber ? absorber_profile(V.grid(), *config.absorber) : Eigen::VectorXd());
  const SplitStepIntegrator phases(V, coeffs, opt.dt);
  std::optional<LatticeField> RG;
  if (opt.track_y_ansatz) RG = outgoing_G(config, V);

  cplx z1 = s0.z1, z2 = s0.z2;
  Eigen::VectorXcd eta = s0.eta.values();

  auto pairing = [&]() { return eta.dot(G); };  // (G, eta) = sum G conj(eta)

  auto rk4 = [&](cplx a, cplx b, double h) {
    const cplx c = pairing();
    auto f = [&](cplx x, cplx y) { return reduced_z_field(x, y, c, config); };
    const auto k1 = f(a, b);
    const auto k2 = f(a + 0.5 * h * k1.first, b + 0.5 * h * k1.second);
    const auto k3 = f(a + 0.5 * h * k2.first, b + 0.5 * h * k2.second);
    const auto k4 = f(a + h * k3.first, b + h * k3.second);
    return std::pair<cplx, cplx>{a + h / 6.0 * (k1.first + 2.0 * k2.first + 2.0 * k3.first + k4.first),
                                 b + h / 6.0 * (k1.second + 2.0 * k2.second + 2.0 * k3.second + k4.second)};
  };
  auto source = [&](double h, cplx x_old, cplx x_new) { eta -= (I * h * 0.5 * (x_old + x_new)) * G; };
  auto eta_nonlinear = [&](double h) {
    if (!config.include_eta_nonlinearity) return;
    phases.nonlinear_phase(eta, h);
    eta = pc_project(eta, spec);
  };

  ReducedTrajectory out;
  auto record = [&](double t) {
    if (!std::isfinite(std::abs(z1)) || !std::isfinite(std::abs(z2)) || !eta.allFinite()) {
      throw NumericalError("integrate_reduced: non-finite state at t=" + std::to_string(t));
    }
    const LatticeField ef(V.grid(), eta);
    const cplx xg = source_amplitude(z1, z2, N0) * pairing();
    out.times.push_back(t);
    out.z1.push_back(z1);
    out.z2.push_back(z2);
    out.eta_weighted_norm.push_back(norm_weighted(ef, 2.0, -2.0));
    out.eta_mass.push_back(mass(ef));
    out.rate_z1.push_back(2.0 * (N0 - 1) * xg.imag());
    out.rate_z2.push_back(-2.0 * N0 * xg.imag());
    if (RG) {
      const LatticeField Y = y_ansatz(z1, z2, N0, *RG);
      const double ny = norm_weighted(Y, 2.0, -2.0);
      out.y_mismatch.push_back(ny > 0 ? norm_weighted(ef - Y, 2.0, -2.0) / ny : 0.0);
    }
  };

  const long total = std::lround(opt.t_max / opt.dt);
  const double h = 0.5 * opt.dt;
  record(0.0);
  for (long k = 1; k <= total; ++k) {
    cplx x0 = source_amplitude(z1, z2, N0);
    std::tie(z1, z2) = rk4(z1, z2, h);
    source(h, x0, source_amplitude(z1, z2, N0));
    eta_nonlinear(h);

    linear.apply(eta, opt.dt);

    eta_nonlinear(h);
    x0 = source_amplitude(z1, z2, N0);
    const auto [p1, p2] = rk4(z1, z2, h);
    source(h, x0, source_amplitude(p1, p2, N0));
    std::tie(z1, z2) = rk4(z1, z2, h);

    if (k % opt.record_stride == 0 || k == total) record(k * opt.dt);
  }
  out.final_state = {z1, z2, LatticeField(V.grid(), eta)};
  return out;
}

ModulationSeries ReducedTrajectory::to_series(int N0) const {
  ModulationSeries s;
  s.N0 = N0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    s.times.push_back(times[k]);
    s.z1.push_back(z1[k]);
    s.z2.push_back(z2[k]);
    s.eta_weighted_norm.push_back(eta_weighted_norm[k]);
    const double a1 = std::abs(z1[k]), a2 = std::abs(z2[k]);
    s.interaction.push_back(std::pow(a1, N0 - 1) * std::pow(a2, N0));
    s.almost_conserved.push_back(N0 * a1 * a1 + (N0 - 1) * a2 * a2);
    s.mass.push_back(a1 * a1 + a2 * a2 + eta_mass[k]);
  }
  s.finalize();
  return s;
}

double hamiltonian_consistency_defect(const ReducedState& state, const ReducedConfig& config) {
  const Eigen::VectorXcd& G = config.G.G.values();
  const int N0 = config.N0;
  auto K = [&](cplx z1, cplx z2, const Eigen::VectorXcd& eta) {
    return (source_amplitude(z1, z2, N0) * eta.dot(G)).real();
  };
  const cplx z1 = state.z1, z2 = state.z2;
  const Eigen::VectorXcd& eta = state.eta.values();
  const cplx c = eta.dot(G);
  const double h = 1e-6 * std::max({std::abs(z1), std::abs(z2), 1e-3});

  // 2 dK/dzbar = dK/dx + i dK/dy
  auto grad = [&](auto&& f, double step) {
    const double dx = (f(cplx(step, 0)) - f(cplx(-step, 0))) / (2 * step);
    const double dy = (f(cplx(0, step)) - f(cplx(0, -step))) / (2 * step);
    return cplx(dx, dy);
  };
  const cplx g1 = grad([&](cplx d) { return K(z1 + d, z2, eta); }, h);
  const cplx g2 = grad([&](cplx d) { return K(z1, z2 + d, eta); }, h);
  const cplx f1 = double(N0 - 1) * ipow(std::conj(z1), N0 - 2) * ipow(z2, N0) * c;
  const cplx f2 = double(N0) * ipow(z1, N0 - 1) * ipow(std::conj(z2), N0 - 1) * std::conj(c);

  Eigen::Index site = 0;
  G.cwiseAbs().maxCoeff(&site);
  const double he = 1e-6 * std::max(std::abs(eta[site]), 1e-3);
  const cplx ge = grad(
      [&](cplx d) {
        Eigen::VectorXcd e = eta;
        e[site] += d;
        return K(z1, z2, e);
      },
      he);
  const cplx fe = source_amplitude(z1, z2, N0) * G[site];

  auto rel = [](cplx a, cplx b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s > 0 ? std::abs(a - b) / s : 0.0;
  };
  return std::max({rel(g1, f1), rel(g2, f2), rel(ge, fe)});
}

}  // namespace dnls
