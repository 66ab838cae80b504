#include "dnls/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace dnls {

Eigen::VectorXd absorber_profile(const LatticeGrid& grid, const Absorber& a) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(grid.size());
  if (a.width <= 0) return w;
  const int inner = grid.half_width() - a.width;
  for (int i = 0; i < grid.size(); ++i) {
    const int n = std::abs(grid.site(i));
    if (n > inner) {
      const double x = double(n - inner) / a.width;
      w[i] = a.strength * x * x;
    }
  }
  return w;
}

void IntegratorConfig::validate(const LatticeGrid& grid) const {
  if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  if (!(t_max >= 0) || !std::isfinite(t_max)) throw ValidationError("t_max must be nonnegative");
  if (record_stride < 1) throw ValidationError("record_stride must be at least 1");
  if (absorber) {
    if (absorber->width < 1 || 4 * absorber->width >= grid.half_width()) {
      throw ValidationError("absorber width must satisfy 1 <= width < N/4");
    }
    if (!(absorber->strength >= 0)) throw ValidationError("absorber strength must be nonnegative");
  }
}

// TaylorLinearStepper ---------------------------------------------------------

TaylorLinearStepper::TaylorLinearStepper(const Potential& V, Eigen::VectorXd absorption)
    : V_(V), W_(std::move(absorption)) {
  if (W_.size() != 0 && W_.size() != V.grid().size()) throw GridMismatch("absorber profile length");
  const Eigen::VectorXd d = (V.values().array() + 2.0).matrix();
  const double lo = d.minCoeff() - 2.0;
  const double hi = d.maxCoeff() + 2.0;
  centre_ = 0.5 * (lo + hi);
  radius_ = 0.5 * (hi - lo) + (W_.size() ? W_.maxCoeff() : 0.0);
}

void TaylorLinearStepper::apply_shifted(const Eigen::VectorXcd& x, Eigen::VectorXcd& out) const {
  apply_H(V_, x, out);
  out -= centre_ * x;
  if (W_.size()) out.array() -= cplx(0.0, 1.0) * W_.array() * x.array();
}

void TaylorLinearStepper::apply(Eigen::VectorXcd& u, double h) const {
  if (h == 0.0) return;
  const int substeps = std::max(1, static_cast<int>(std::ceil(std::abs(h) * radius_ / 0.5)));
  const double s = h / substeps;
  const double x = std::abs(s) * radius_;
  int order = 1;
  double bound = x * x / 2.0;
  while (bound > 1e-17 && order < 40) {
    ++order;
    bound *= x / (order + 1);
  }
  const cplx phase = std::polar(1.0, -s * centre_);
  for (int k = 0; k < substeps; ++k) {
    term_ = u;
    for (int j = 1; j <= order; ++j) {
      apply_shifted(term_, next_);
      term_ = next_ * cplx(0.0, -s / j);
      u += term_;
    }
    u *= phase;
  }
}

// SplitStepIntegrator ---------------------------------------------------------

SplitStepIntegrator::SplitStepIntegrator(const Potential& V, const NonlinearityCoefficients& coeffs, double dt,
                                         std::optional<Absorber> absorber)
    : coeffs_(coeffs),
      dt_(dt),
      stepper_(V, absorber ? absorber_profile(V.grid(), *absorber) : Eigen::VectorXd()) {}

void SplitStepIntegrator::nonlinear_phase(Eigen::VectorXcd& u, double h) const {
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double s = std::norm(u[i]);
    if (s == 0.0) continue;
    u[i] *= std::polar(1.0, -coeffs_.beta(s) * h);
  }
}

void SplitStepIntegrator::step(Eigen::VectorXcd& u, double dt) const {
  nonlinear_phase(u, 0.5 * dt);
  stepper_.apply(u, dt);
  nonlinear_phase(u, 0.5 * dt);
}

void SplitStepIntegrator::step(Eigen::VectorXcd& u) const { step(u, dt_); }

void SplitStepIntegrator::advance(Eigen::VectorXcd& u, long n) const {
  if (n <= 0) return;
  nonlinear_phase(u, 0.5 * dt_);
  for (long k = 0; k < n; ++k) {
    stepper_.apply(u, dt_);
    nonlinear_phase(u, k + 1 < n ? dt_ : 0.5 * dt_);
  }
}

LatticeField step(const LatticeField& u, double dt, const Potential& V, const NonlinearityCoefficients& coeffs) {
  require_same_grid(u.grid(), V.grid(), "step");
  SplitStepIntegrator integ(V, coeffs, dt);
  Eigen::VectorXcd v = u.values();
  integ.step(v);
  return LatticeField(u.grid(), std::move(v));
}

// run -------------------------------------------------------------------------

TrajectoryRecord run(const LatticeField& u0, const IntegratorConfig& config, const Potential& V,
                     const NonlinearityCoefficients& coeffs, const SnapshotObserver& observer) {
  require_same_grid(u0.grid(), V.grid(), "run");
  config.validate(V.grid());
  const SplitStepIntegrator integ(V, coeffs, config.dt, config.absorber);
  const long total = std::lround(config.t_max / config.dt);

  TrajectoryRecord rec;
  Eigen::VectorXcd u = u0.values();
  const double m0 = mass(u0);
  const double e0 = config.monitor_energy ? energy(u0, V, coeffs) : 0.0;

  auto record = [&](long k) {
    const double t = k * config.dt;
    if (!u.allFinite()) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "non-finite field at t=%.6g (step %ld); reduce dt or the amplitude", t, k);
      throw NumericalError(buf);
    }
    const LatticeField f(V.grid(), u);
    const double m = mass(f);
    rec.times.push_back(t);
    rec.mass_series.push_back(m);
    if (config.monitor_energy) {
      const double e = energy(f, V, coeffs);
      rec.energy_series.push_back(e);
      rec.max_energy_drift = std::max(rec.max_energy_drift, std::abs(e - e0));
    }
    if (config.absorber) {
      rec.absorbed_mass_series.push_back(m0 - m);
    } else if (m0 > 0) {
      rec.max_mass_drift = std::max(rec.max_mass_drift, std::abs(m - m0) / m0);
    }
    if (config.store_snapshots) rec.snapshots.push_back(f);
    if (observer) observer(t, f);
  };

  record(0);
  long k = 0;
  while (k < total) {
    const long n = std::min<long>(config.record_stride, total - k);
    integ.advance(u, n);
    k += n;
    record(k);
  }
  rec.steps = total;
  return rec;
}

void write_trajectory(const std::filesystem::path& dir, const TrajectoryRecord& rec, const std::string& prefix) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["schema"] = 1;
  j["times"] = rec.times;
  j["mass"] = rec.mass_series;
  j["energy"] = rec.energy_series;
  j["absorbed_mass"] = rec.absorbed_mass_series;
  j["max_mass_drift"] = rec.max_mass_drift;
  j["max_energy_drift"] = rec.max_energy_drift;
  std::vector<std::string> files;
  for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%06zu.csv", prefix.c_str(), k);
    write_field_csv(dir / name, rec.snapshots[k]);
    files.emplace_back(name);
  }
  j["snapshots"] = files;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw Error("cannot write " + (dir / "manifest.json").string());
  os << j.dump(2) << '\n';
}

ConvergenceRatio dt_refinement_ratio(const LatticeField& u0, double dt, double t_final, const Potential& V,
                                     const NonlinearityCoefficients& coeffs) {
  auto solve = [&](double h) {
    SplitStepIntegrator integ(V, coeffs, h);
    Eigen::VectorXcd u = u0.values();
    integ.advance(u, std::lround(t_final / h));
    return u;
  };
  const Eigen::VectorXcd a = solve(dt), b = solve(dt / 2), c = solve(dt / 4);
  ConvergenceRatio r;
  r.coarse_gap = (a - b).norm();
  r.fine_gap = (b - c).norm();
  r.ratio = r.fine_gap > 0 ? r.coarse_gap / r.fine_gap : 0.0;
  return r;
}

}  // namespace dnls
