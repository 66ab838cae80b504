#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dnls/bound_states.hpp"
#include "dnls/dynamics.hpp"
#include "dnls/spectral.hpp"

namespace dnls {

struct BranchPair {
  BoundStateBranch first;   // j = 1
  BoundStateBranch second;  // j = 2
};

struct ModulationState {
  cplx z1{};
  cplx z2{};
  LatticeField eta{LatticeGrid{1}};
  std::array<double, 4> residuals{};  // F_{1,R}, F_{1,I}, F_{2,R}, F_{2,I}
  int iterations = 0;
};

struct DecomposeOptions {
  int max_iterations = 50;
  double tolerance = 1e-13;
};

/// Solves F_{j,A}(z) = <i(u - phi_1(z1) - phi_2(z2)), D_{j,A} phi_j(z_j)> = 0
/// from the seed z_j = (u, phi_j) and sets eta = P_c(u - phi_1(z1) - phi_2(z2)).
ModulationState decompose(const LatticeField& u, const BranchPair& branches, const SpectralData& spec,
                          const DecomposeOptions& options = {});

/// phi_1(z1) + phi_2(z2) + eta.
LatticeField reconstruct(const ModulationState& s, const BranchPair& branches);

struct ModulationSeries {
  int N0 = 0;
  std::vector<double> times;
  std::vector<cplx> z1;
  std::vector<cplx> z2;
  std::vector<double> eta_weighted_norm;  // l^{2,-2}
  std::vector<double> interaction;        // |z1^{N0-1} z2^{N0}|
  std::vector<double> almost_conserved;   // N0|z1|^2 + (N0-1)|z2|^2
  std::vector<double> dz1_sq_dt;          // centred differences of |z_j|^2
  std::vector<double> dz2_sq_dt;
  std::vector<double> mass;

  std::size_t size() const { return times.size(); }
  void append(double t, const ModulationState& s, double total_mass);
  void finalize();  // fills the finite-difference series
};

/// Incremental tracker usable as a run() observer.
class ModulationTracker {
 public:
  ModulationTracker(const BranchPair& branches, const SpectralData& spec, int N0);
  void operator()(double t, const LatticeField& u);
  ModulationSeries& series() { return series_; }
  const ModulationSeries& series() const { return series_; }

 private:
  const BranchPair* branches_;
  const SpectralData* spec_;
  ModulationSeries series_;
};

ModulationSeries track(const TrajectoryRecord& record, const BranchPair& branches, const SpectralData& spec, int N0);

void write_series_csv(const std::filesystem::path& path, const ModulationSeries& series);

// Long-run diagnostics ---------------------------------------------------------

struct EquipartitionReport {
  bool converged = false;
  std::string message;
  int survivor = 0;             // 1 or 2, 0 when undecided
  double epsilon = 0.0;         // ||u0||
  double dying_amplitude = 0.0; // tail |z_dying|
  double measured_rho_sq = 0.0; // tail average of |z_survivor|^2
  double measured_rho = 0.0;    // tail average of |z_survivor|
  double predicted = 0.0;       // combination of |(u0, phi_j)|^2
  double residual = 0.0;        // |measured_rho_sq - predicted|
  double residual_over_eps4 = 0.0;
  double residual_rho_reading = 0.0;  // |measured_rho - predicted|
  double interaction_tail_fraction = 0.0;
};

/// Tail statistics over the last `tail_fraction` of the series. A run counts
/// as converged when the dying mode is below convergence_factor * epsilon.
EquipartitionReport equipartition_check(const ModulationSeries& series, const LatticeField& u0,
                                        const SpectralData& spec, int N0, double tail_fraction = 0.1,
                                        double convergence_factor = 1e-3);

/// int |z1^{N0-1} z2^{N0}|^2 dt over the whole run and its share over [t_max/2, t_max].
struct InteractionIntegral {
  double total = 0.0;
  double tail = 0.0;
  double tail_fraction = 0.0;
};
InteractionIntegral interaction_integral(const ModulationSeries& series);

/// Fitted C in max_t |Q(t) - Q(0)| = C eps^4 T for Q = N0|z1|^2 + (N0-1)|z2|^2.
struct AlmostConservationFit {
  double max_drift = 0.0;
  double T = 0.0;
  double constant = 0.0;
};
AlmostConservationFit almost_conservation_fit(const ModulationSeries& series, double epsilon);

struct InstabilityReport {
  double seed_frac = 0.0;
  double z_amp = 0.0;
  double orbit_radius = 0.0;
  std::optional<double> exit_time;
  double max_distance = 0.0;
  double t_max = 0.0;
};

/// Runs u0 = phi_2(z_amp) + seed_frac z_amp phi_1 until the orbital distance
/// inf_theta ||u - e^{i theta} phi_2(z_amp)|| exceeds orbit_radius (default z_amp/2).
InstabilityReport instability_witness(double z_amp, double seed_frac, const IntegratorConfig& config,
                                      const BranchPair& branches, const Potential& V,
                                      const NonlinearityCoefficients& coeffs, std::optional<double> orbit_radius = {},
                                      int check_stride = 200);

struct RateFit {
  bool degenerate = false;       // interaction identically zero
  int windows = 0;
  double slope_z2 = 0.0;         // d|z2|^2/dt against P
  double slope_z1 = 0.0;
  double predicted_z2 = 0.0;     // -2 N0 Gamma
  double predicted_z1 = 0.0;     // 2 (N0-1) Gamma
  double relative_error_z2 = 0.0;
  double relative_error_z1 = 0.0;
  double balance = 0.0;          // N0 slope_z1 + (N0-1) slope_z2
};

/// Window-averages the rate series (window length `window`, 0 selects
/// 20 pi/(e2 - e1)) and regresses through the origin against the averaged
/// P = |z1|^{2(N0-1)} |z2|^{2 N0}. Rates come from `rate_z1`/`rate_z2` when
/// given, else from the finite-difference series.
RateFit fgr_rate_fit(const ModulationSeries& series, double Gamma, int N0, double e1, double e2, double window = 0.0,
                     const std::vector<double>* rate_z1 = nullptr, const std::vector<double>* rate_z2 = nullptr);

/// Averages of `values` over consecutive windows of length `window` in `times`.
std::vector<double> window_average(const std::vector<double>& times, const std::vector<double>& values, double window);

}  // namespace dnls
