#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dnls/lattice.hpp"

namespace dnls {

/// Complex absorbing potential -i W(n), W ramping quadratically from 0 to
/// `strength` over the outer `width` sites on each side.
struct Absorber {
  int width = 0;
  double strength = 0.5;
};

Eigen::VectorXd absorber_profile(const LatticeGrid& grid, const Absorber& absorber);

enum class Scheme { strang_splitstep };

struct IntegratorConfig {
  double dt = 0.005;
  double t_max = 0.0;
  Scheme scheme = Scheme::strang_splitstep;
  std::optional<Absorber> absorber;
  int record_stride = 200;        // steps per snapshot
  bool store_snapshots = true;
  bool monitor_energy = true;

  void validate(const LatticeGrid& grid) const;
};

/// u -> exp(-i h (H - i W)) u by a shifted Taylor series, O(n) per term. The
/// order is picked so the truncation remainder stays below 1e-17 relative;
/// steps with h ||A|| > 0.5 are split.
class TaylorLinearStepper {
 public:
  TaylorLinearStepper(const Potential& V, Eigen::VectorXd absorption = {});

  void apply(Eigen::VectorXcd& u, double h) const;
  const Potential& potential() const { return V_; }
  bool absorbing() const { return W_.size() > 0; }

 private:
  void apply_shifted(const Eigen::VectorXcd& x, Eigen::VectorXcd& out) const;

  Potential V_;
  Eigen::VectorXd W_;
  double centre_ = 0.0;
  double radius_ = 0.0;
  mutable Eigen::VectorXcd term_, next_;
};

/// Strang splitting: half nonlinear phase, full linear step, half nonlinear phase.
class SplitStepIntegrator {
 public:
  SplitStepIntegrator(const Potential& V, const NonlinearityCoefficients& coeffs, double dt,
                      std::optional<Absorber> absorber = std::nullopt);

  const Potential& potential() const { return stepper_.potential(); }
  const NonlinearityCoefficients& coefficients() const { return coeffs_; }
  double dt() const { return dt_; }

  /// One full step of size dt (negative dt runs backwards).
  void step(Eigen::VectorXcd& u) const;
  void step(Eigen::VectorXcd& u, double dt) const;
  /// n consecutive steps with the inner half phases merged.
  void advance(Eigen::VectorXcd& u, long n) const;

  void nonlinear_phase(Eigen::VectorXcd& u, double h) const;
  void linear(Eigen::VectorXcd& u, double h) const { stepper_.apply(u, h); }

 private:
  NonlinearityCoefficients coeffs_;
  double dt_;
  TaylorLinearStepper stepper_;
};

LatticeField step(const LatticeField& u, double dt, const Potential& V, const NonlinearityCoefficients& coeffs);

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<LatticeField> snapshots;
  std::vector<double> mass_series;
  std::vector<double> energy_series;
  std::vector<double> absorbed_mass_series;  // mass(0) - mass(t), only with an absorber
  double max_mass_drift = 0.0;               // relative, without absorber
  double max_energy_drift = 0.0;             // absolute
  long steps = 0;
};

using SnapshotObserver = std::function<void(double t, const LatticeField& u)>;

/// Integrates to config.t_max, recording every record_stride steps (and the
/// final time). Throws NumericalError when the field stops being finite.
TrajectoryRecord run(const LatticeField& u0, const IntegratorConfig& config, const Potential& V,
                     const NonlinearityCoefficients& coeffs, const SnapshotObserver& observer = {});

/// Snapshot CSVs (n,re,im) plus manifest.json with times and monitor series.
void write_trajectory(const std::filesystem::path& dir, const TrajectoryRecord& record,
                      const std::string& prefix = "snapshot");

/// ||u_dt - u_{dt/2}|| / ||u_{dt/2} - u_{dt/4}|| at t_final.
struct ConvergenceRatio {
  double ratio = 0.0;
  double coarse_gap = 0.0;
  double fine_gap = 0.0;
};
ConvergenceRatio dt_refinement_ratio(const LatticeField& u0, double dt, double t_final, const Potential& V,
                                     const NonlinearityCoefficients& coeffs);

}  // namespace dnls
