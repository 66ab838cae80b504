#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dnls/lattice.hpp"

namespace dnls {

/// Discrete spectrum of H = -Delta + V outside the band [0,4].
struct SpectralData {
  LatticeGrid grid{1};
  std::vector<double> eigenvalues;               // ascending
  std::vector<Eigen::VectorXd> eigenfunctions;   // real, unit l2 norm, positive at their largest-|phi| site
  std::vector<double> residuals;                 // ||H phi - e phi||
  std::vector<double> decay_rates;               // kappa with e = 2 - 2cosh(kappa) (or 4 - e for e > 4)
  double band_margin = 0.0;                      // min distance of an eigenvalue to {0,4}
  std::vector<std::string> warnings;

  std::size_t count() const { return eigenvalues.size(); }
  LatticeField eigenfunction(std::size_t j) const { return LatticeField(grid, eigenfunctions.at(j)); }
  /// Smallest decay rate over the returned eigenfunctions.
  double min_decay_rate() const;
};

struct SpectrumOptions {
  double truncation_tolerance = 1e-10;
  double degeneracy_tolerance = 1e-12;
  int boundary_layer = 10;
};

SpectralData discrete_spectrum(const Potential& V, const SpectrumOptions& options = {});

/// u - sum_j (u, phi_j) phi_j: removes both real and imaginary projections.
LatticeField pc_project(const LatticeField& u, const SpectralData& spec);
Eigen::VectorXcd pc_project(const Eigen::VectorXcd& u, const SpectralData& spec);

// Resolvent -------------------------------------------------------------------

struct ResolventSample {
  double omega = 0.0;
  double epsilon = 0.0;
  LatticeField solution{LatticeGrid{1}};
  double relative_residual = 0.0;
};

/// Solves (H - omega - i epsilon) x = f by tridiagonal elimination. With
/// epsilon = 0 the shift must lie off [0,4] and off the discrete spectrum.
ResolventSample resolvent_solve(double omega, double epsilon, const LatticeField& f, const Potential& V);

struct LadderOptions {
  double epsilon0 = 0.0;   // largest rung; 0 picks it from the (padded) grid size
  double ratio = 2.0;      // geometric ladder
  int order = 3;           // Richardson order; order+1 rungs
  double rel_tolerance = 1e-6;
  double abs_tolerance = 1e-14;
  int min_half_width = 4000;  // inputs on smaller grids are zero-padded to this size
};

/// Smallest rung eps_min = 35 sin(xi)/N: the outgoing wave, damped like
/// exp(-eps n / (2 sin xi)), loses a factor 1e-15 on the way to the wall and back.
double ladder_epsilon0(const LatticeGrid& grid, double omega, const LadderOptions& options);

struct LimitingAbsorption {
  cplx value{};
  double error_estimate = 0.0;
  std::vector<double> epsilons;
  std::vector<cplx> ladder;
  std::vector<cplx> ladder_reversed;  // (g, (H - omega - i eps)^{-1} f)
  cplx value_reversed{};
};

/// epsilon -> 0 limit of ((H - omega - i epsilon)^{-1} f, g).
LimitingAbsorption limiting_absorption(double omega, const LatticeField& f, const LatticeField& g, const Potential& V,
                                       const LadderOptions& options = {});

/// Richardson-extrapolated vector R_+(omega) f on the grid of V.
LatticeField outgoing_resolvent(double omega, const LatticeField& f, const Potential& V,
                                const LadderOptions& options = {});

// Scattering ------------------------------------------------------------------

enum class JostSide { plus, minus };

struct JostSolution {
  double quasi_momentum = 0.0;
  JostSide side = JostSide::plus;
  Eigen::VectorXcd values;   // on grid sites -N..N
  cplx wronskian_with_partner{};
};

struct JostPair {
  JostSolution plus;
  JostSolution minus;
  cplx wronskian{};
  double wronskian_spread = 0.0;  // max |W(n) - W| over the grid
};

/// f_+ ~ e^{i xi n} to the right of the potential, f_- ~ e^{-i xi n} to the
/// left; W = f_+(n+1) f_-(n) - f_+(n) f_-(n+1).
JostPair jost_solutions(double xi, const Potential& V, double resonance_tolerance = 1e-8);

/// Distorted Fourier coefficient: (2 pi)^{-1/2} sum_n f(n) conj(e(n, xi)) with
/// e(., xi) = T(|xi|) f_{sign xi}(., |xi|) and T = 2 i sin|xi| / W. This
/// normalization makes ||P_c f||^2 = int_{-pi}^{pi} |f^(xi)|^2 dxi.
cplx distorted_ft(const LatticeField& f, double xi, const Potential& V);

struct EdgeScan {
  double min_abs_wronskian = 0.0;
  double at_xi = 0.0;
  bool generic = false;
};

/// Scans |W(xi)| at xi -> 0+ and xi -> pi-. A potential with a zero-energy or
/// energy-4 resonance has W -> 0 at that edge (W = 2i sin xi for V = 0).
EdgeScan check_generic_edges(const Potential& V, double threshold = 1e-3);

// Linear propagation ----------------------------------------------------------

/// e^{-itH} by a one-time dense diagonalization.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const Potential& V);

  const Potential& potential() const { return V_; }
  const Eigen::VectorXd& eigenvalues() const { return eig_.values; }
  const Eigen::MatrixXd& eigenvectors() const { return eig_.vectors; }

  LatticeField apply(const LatticeField& u0, double t) const;
  /// Expansion coefficients Q^T u0, reusable across times.
  Eigen::VectorXcd coefficients(const LatticeField& u0) const;
  LatticeField evolve_coefficients(const Eigen::VectorXcd& c, double t) const;

 private:
  Potential V_;
  struct Eig {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
  } eig_;
};

/// Shared, cached propagator for a potential. The cache keeps the most recent
/// few diagonalizations.
std::shared_ptr<const SpectralPropagator> spectral_propagator(const Potential& V);

LatticeField propagate_linear(const LatticeField& u0, double t, const Potential& V);

// Decay experiments -----------------------------------------------------------

enum class DecayKind { sup_norm_l0, weighted_l4 };

struct DecayOptions {
  int n_times = 16;
  double sigma = 4.0;           // weight for weighted_l4
  double omega = 0.0;           // omega_* for weighted_l4
  std::vector<double> source;   // compact source for weighted_l4, centred at site 0
  LadderOptions ladder{};
};

struct DecayFit {
  double slope = 0.0;
  double r_squared = 0.0;
  std::vector<double> times;
  std::vector<double> norms;
};

DecayFit decay_exponent_experiment(DecayKind kind, const Potential& V, double t_max, const DecayOptions& options = {});

}  // namespace dnls
