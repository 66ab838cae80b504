#include "dnls/resonance.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dnls/numerics.hpp"

namespace dnls {

ResonanceReport classify_resonance(double e1, double e2, std::pair<int, int> n_range, double edge_tolerance) {
  if (!(e1 < e2)) throw ValidationError("classify_resonance: need e1 < e2");
  if (n_range.first > n_range.second) throw ValidationError("classify_resonance: empty n range");
  ResonanceReport r;
  r.e1 = e1;
  r.e2 = e2;
  r.n_lo = n_range.first;
  r.n_hi = n_range.second;
  for (int n = r.n_lo; n <= r.n_hi; ++n) r.omega_table.push_back(r.omega(n));
  // omega_n increases with n, so the smallest n inside (0,4) is the first resonance.
  for (int n = r.n_lo; n <= r.n_hi; ++n) {
    const double w = r.omega(n);
    if (w > edge_tolerance && w < 4.0 - edge_tolerance) {
      r.classification = ResonanceClass::resonant;
      r.N0 = n;
      r.omega_star = w;
      r.xi_star = std::acos(0.5 * (2.0 - w));
      return r;
    }
  }
  // No interior resonance: an omega_n on {0,4} leaves the classification undecided.
  for (int n = r.n_lo; n <= r.n_hi; ++n) {
    const double w = r.omega(n);
    if (std::abs(w) <= edge_tolerance || std::abs(w - 4.0) <= edge_tolerance) {
      throw ValidationError("classify_resonance: omega_" + std::to_string(n) + " = " + std::to_string(w) +
                            " sits on a band edge");
    }
  }
  return r;
}

ResonanceReport classify_resonance(const SpectralData& spec, std::pair<int, int> n_range, double edge_tolerance) {
  if (spec.count() != 2) {
    throw ValidationError("classify_resonance: need exactly two eigenvalues, found " + std::to_string(spec.count()));
  }
  return classify_resonance(spec.eigenvalues[0], spec.eigenvalues[1], n_range, edge_tolerance);
}

InteractionProfile leading_G(const SpectralData& spec, int N0, std::optional<std::pair<double, double>> z_weights) {
  if (N0 < 2) throw ValidationError("leading_G: N0 must be at least 2");
  if (spec.count() < 2) throw ValidationError("leading_G: need two eigenfunctions");
  const Eigen::ArrayXd p1 = spec.eigenfunctions[0].array();
  const Eigen::ArrayXd p2 = spec.eigenfunctions[1].array();
  Eigen::ArrayXd g;
  if (N0 >= 4) {
    g = p1.pow(N0 - 1) * p2.pow(N0);
  } else {
    if (!z_weights) throw ValidationError("leading_G: N0 = 2, 3 needs the weights (|z1|^2, |z2|^2)");
    const auto [a1, a2] = *z_weights;
    if (N0 == 2) {
      g = 6.0 * a1 * a1 * p1.pow(5) * p2.square() + 12.0 * a1 * a2 * p1.cube() * p2.pow(4) +
          3.0 * a2 * a2 * p1 * p2.pow(6);
    } else {
      g = 4.0 * a1 * p1.pow(4) * p2.cube() + 3.0 * a2 * p1.square() * p2.pow(5);
    }
  }
  InteractionProfile out;
  out.G = LatticeField(spec.grid, Eigen::VectorXd(g.matrix()));
  out.N0 = N0;
  out.construction = GConstruction::leading_pointwise;
  return out;
}

static void require_resonant(const ResonanceReport& report, double edge_guard) {
  if (!report.resonant()) throw ValidationError("Gamma needs a resonant configuration");
  if (report.xi_star < edge_guard || report.xi_star > std::numbers::pi - edge_guard) {
    throw ValidationError("xi* = " + std::to_string(report.xi_star) + " is within the band-edge guard");
  }
}

double gamma_closed_form(const InteractionProfile& G, const ResonanceReport& report, const Potential& V,
                         double edge_guard) {
  require_resonant(report, edge_guard);
  const double xi = report.xi_star;
  const cplx gp = distorted_ft(G.G, xi, V);
  const cplx gm = distorted_ft(G.G, -xi, V);
  return std::numbers::pi / (2.0 * std::sin(xi)) * (std::norm(gp) + std::norm(gm));
}

GammaOracle gamma_oracle(const InteractionProfile& G, const ResonanceReport& report, const Potential& V,
                         const LadderOptions& options, double edge_guard) {
  require_resonant(report, edge_guard);
  GammaOracle out;
  if (G.G.values().norm() == 0.0) {
    out.epsilons = {};
    return out;
  }
  const LimitingAbsorption la = limiting_absorption(report.omega_star, G.G, G.G, V, options);
  out.gamma = la.value.imag();
  out.error_estimate = la.error_estimate;
  out.epsilons = la.epsilons;
  for (const cplx& c : la.ladder) out.ladder.push_back(c.imag());
  out.gamma_conjugate = -la.value_reversed.imag();
  return out;
}

}  // namespace dnls
