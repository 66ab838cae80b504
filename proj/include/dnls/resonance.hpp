#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "dnls/lattice.hpp"
#include "dnls/spectral.hpp"

namespace dnls {

enum class ResonanceClass { nonresonant, resonant };

struct ResonanceReport {
  double e1 = 0.0;
  double e2 = 0.0;
  int n_lo = -10;
  int n_hi = 10;
  std::vector<double> omega_table;  // omega_n for n = n_lo..n_hi
  ResonanceClass classification = ResonanceClass::nonresonant;
  int N0 = 0;
  double omega_star = 0.0;
  double xi_star = 0.0;

  double omega(int n) const { return e1 + n * (e2 - e1); }
  bool resonant() const { return classification == ResonanceClass::resonant; }
};

/// omega_n = e1 + n(e2 - e1) over n_range; resonant when some omega_n lies in (0,4).
/// Without such an n, an omega_n on {0,4} raises ValidationError.
ResonanceReport classify_resonance(const SpectralData& spec, std::pair<int, int> n_range = {-10, 10},
                                   double edge_tolerance = 1e-9);
ResonanceReport classify_resonance(double e1, double e2, std::pair<int, int> n_range = {-10, 10},
                                   double edge_tolerance = 1e-9);

enum class GConstruction { leading_pointwise, user_supplied };

struct InteractionProfile {
  LatticeField G{LatticeGrid{1}};
  int N0 = 0;
  GConstruction construction = GConstruction::user_supplied;
};

/// N0 >= 4: G = phi_1^{N0-1} phi_2^{N0}. N0 = 2, 3: the |z_j|^2-weighted
/// combinations, which need weights = (|z1|^2, |z2|^2).
InteractionProfile leading_G(const SpectralData& spec, int N0,
                             std::optional<std::pair<double, double>> z_weights = std::nullopt);

/// pi/(2 sin xi*) (|G^(xi*)|^2 + |G^(-xi*)|^2) with the Parseval-normalized distorted FT.
double gamma_closed_form(const InteractionProfile& G, const ResonanceReport& report, const Potential& V,
                         double edge_guard = 1e-3);

struct GammaOracle {
  double gamma = 0.0;            // Im (R+ G, G)
  double gamma_conjugate = 0.0;  // -Im (G, R+ G)
  double error_estimate = 0.0;
  std::vector<double> epsilons;
  std::vector<double> ladder;    // Im ((H - w - i eps)^{-1} G, G)
};

/// Gamma from the limiting absorption ladder.
GammaOracle gamma_oracle(const InteractionProfile& G, const ResonanceReport& report, const Potential& V,
                         const LadderOptions& options = {}, double edge_guard = 1e-3);


}  // namespace dnls
