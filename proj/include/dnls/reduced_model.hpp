#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "dnls/dynamics.hpp"
#include "dnls/modulation.hpp"
#include "dnls/resonance.hpp"
#include "dnls/spectral.hpp"

namespace dnls {

/// Real polynomial sum_{p,q} c[p][q] |z1|^{2p} |z2|^{2q}.
struct PhaseCoefficients {
  std::vector<std::vector<double>> c;
  double operator()(double s1, double s2) const;
};

struct ReducedConfig {
  double e1 = 0.0;
  double e2 = 0.0;
  int N0 = 0;
  InteractionProfile G;  // projected onto range(P_c) by make_reduced_config
  PhaseCoefficients A1;
  PhaseCoefficients A2;
  bool include_eta_nonlinearity = false;
  static constexpr bool drop_remainders = true;
  std::optional<Absorber> absorber;
  LadderOptions ladder{};

  double omega_star() const { return e1 + N0 * (e2 - e1); }
};

ReducedConfig make_reduced_config(const SpectralData& spec, int N0, InteractionProfile G);

struct ReducedState {
  cplx z1{};
  cplx z2{};
  LatticeField eta{LatticeGrid{1}};
};

struct ReducedTrajectory {
  std::vector<double> times;
  std::vector<cplx> z1;
  std::vector<cplx> z2;
  std::vector<double> eta_weighted_norm;  // l^{2,-2}
  std::vector<double> rate_z1;            // d|z1|^2/dt from the vector field
  std::vector<double> rate_z2;
  std::vector<double> y_mismatch;         // ||eta - Y||/||Y|| in l^{2,-2}; empty unless requested
  std::vector<double> eta_mass;
  ReducedState final_state;

  ModulationSeries to_series(int N0) const;
};

struct ReducedRunOptions {
  double dt = 0.005;
  double t_max = 0.0;
  int record_stride = 20;
  bool track_y_ansatz = false;
};

/// Integrates the truncated (z1, z2, eta) system without remainders: RK4 for (z1, z2) at frozen eta,
/// Strang split-step for eta with the source z1bar^{N0-1} z2^{N0} G applied
/// in the half steps (trapezoidal in time).
ReducedTrajectory integrate_reduced(const ReducedState& state0, const ReducedConfig& config, const Potential& V,
                                    const NonlinearityCoefficients& coeffs, const SpectralData& spec,
                                    const ReducedRunOptions& options);

/// R+(omega*) G on the grid of V.
LatticeField outgoing_G(const ReducedConfig& config, const Potential& V);

/// Y = -z1bar^{N0-1} z2^{N0} R+(omega*) G. The second overload reuses a precomputed R+ G.
LatticeField y_ansatz(cplx z1, cplx z2, const ReducedConfig& config, const Potential& V);
LatticeField y_ansatz(cplx z1, cplx z2, int N0, const LatticeField& resolvent_G);

/// (d|z1|^2/dt, d|z2|^2/dt) = (2(N0-1) Gamma P, -2 N0 Gamma P), P = |z1|^{2(N0-1)} |z2|^{2 N0}.
std::pair<double, double> rate_equations_rhs(cplx z1, cplx z2, double Gamma, int N0);

/// Right-hand sides of the z equations (the values of dz_j/dt) for a given pairing c = (G, eta).
std::pair<cplx, cplx> reduced_z_field(cplx z1, cplx z2, cplx pairing, const ReducedConfig& config);

/// Largest relative gap between the z and eta vector fields and 2 dK/d(conj) of
/// K = Re(z1bar^{N0-1} z2^{N0} (G, eta)), by central differences.
double hamiltonian_consistency_defect(const ReducedState& state, const ReducedConfig& config);

}  // namespace dnls
