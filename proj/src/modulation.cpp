#include "dnls/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>

namespace dnls {

namespace {

double real_pair(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) { return b.dot(a).real(); }

const BoundStateBranch& branch_of(const BranchPair& b, int j) { return j == 1 ? b.first : b.second; }

}  // namespace

ModulationState decompose(const LatticeField& u, const BranchPair& branches, const SpectralData& spec,
                          const DecomposeOptions& options) {
  require_same_grid(u.grid(), spec.grid, "decompose");
  require_same_grid(u.grid(), branches.first.grid, "decompose");
  require_same_grid(u.grid(), branches.second.grid, "decompose");
  if (spec.count() < 2) throw ValidationError("decompose: need two eigenpairs");
  const cplx I(0.0, 1.0);

  std::array<cplx, 2> z = {inner(u, spec.eigenfunction(0)), inner(u, spec.eigenfunction(1))};
  ModulationState s;
  Eigen::VectorXcd v;
  std::array<Eigen::VectorXcd, 4> D;
  Eigen::Vector4d F;

  auto evaluate = [&]() {
    v = u.values();
    for (int j = 1; j <= 2; ++j) {
      const BoundStateBranch& b = branch_of(branches, j);
      v -= eval_bound_state(b, z[j - 1]).field.values();
      auto [dr, di] = bound_state_derivatives(b, z[j - 1]);
      D[2 * (j - 1)] = std::move(dr);
      D[2 * (j - 1) + 1] = std::move(di);
    }
    const Eigen::VectorXcd iv = I * v;
    for (int a = 0; a < 4; ++a) F[a] = real_pair(iv, D[a]);
  };

  evaluate();
  for (s.iterations = 0; s.iterations < options.max_iterations; ++s.iterations) {
    if (F.cwiseAbs().maxCoeff() <= options.tolerance) break;
    // dF_a/dx_b = <-i D_b, D_a>; the curvature term <i v, dD_a/dx_b> is O(|v| |z|^5) and dropped.
    Eigen::Matrix4d J;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) J(a, b) = real_pair(-I * D[b], D[a]);
    const Eigen::Vector4d dx = J.partialPivLu().solve(-F);
    z[0] += cplx(dx[0], dx[1]);
    z[1] += cplx(dx[2], dx[3]);
    evaluate();
    if (dx.cwiseAbs().maxCoeff() <= 1e-17 * (1.0 + std::abs(z[0]) + std::abs(z[1]))) break;
  }
  if (!(F.cwiseAbs().maxCoeff() <= 1e-10)) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "decompose: Newton failed (max |F| = %.3e after %d iterations); field too large",
                  F.cwiseAbs().maxCoeff(), s.iterations);
    throw NumericalError(buf);
  }
  s.z1 = z[0];
  s.z2 = z[1];
  s.eta = LatticeField(u.grid(), pc_project(v, spec));
  for (int a = 0; a < 4; ++a) s.residuals[a] = F[a];
  return s;
}

LatticeField reconstruct(const ModulationState& s, const BranchPair& branches) {
  return eval_bound_state(branches.first, s.z1).field + eval_bound_state(branches.second, s.z2).field + s.eta;
}

// Series ----------------------------------------------------------------------

void ModulationSeries::append(double t, const ModulationState& s, double total_mass) {
  times.push_back(t);
  z1.push_back(s.z1);
  z2.push_back(s.z2);
  eta_weighted_norm.push_back(norm_weighted(s.eta, 2.0, -2.0));
  const double a1 = std::abs(s.z1), a2 = std::abs(s.z2);
  interaction.push_back(std::pow(a1, N0 - 1) * std::pow(a2, N0));
  almost_conserved.push_back(N0 * a1 * a1 + (N0 - 1) * a2 * a2);
  mass.push_back(total_mass);
}

void ModulationSeries::finalize() {
  const std::size_t n = times.size();
  dz1_sq_dt.assign(n, 0.0);
  dz2_sq_dt.assign(n, 0.0);
  if (n < 2) return;
  auto diff = [&](const std::vector<cplx>& z, std::vector<double>& out) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t a = k == 0 ? 0 : k - 1;
      const std::size_t b = k + 1 == n ? n - 1 : k + 1;
      out[k] = (std::norm(z[b]) - std::norm(z[a])) / (times[b] - times[a]);
    }
  };
  diff(z1, dz1_sq_dt);
  diff(z2, dz2_sq_dt);
}

ModulationTracker::ModulationTracker(const BranchPair& branches, const SpectralData& spec, int N0)
    : branches_(&branches), spec_(&spec) {
  series_.N0 = N0;
}

void ModulationTracker::operator()(double t, const LatticeField& u) {
  series_.append(t, decompose(u, *branches_, *spec_), mass(u));
}

ModulationSeries track(const TrajectoryRecord& record, const BranchPair& branches, const SpectralData& spec, int N0) {
  if (record.snapshots.size() != record.times.size()) throw ValidationError("track: record has no stored snapshots");
  ModulationTracker tracker(branches, spec, N0);
  for (std::size_t k = 0; k < record.times.size(); ++k) tracker(record.times[k], record.snapshots[k]);
  tracker.series().finalize();
  return tracker.series();
}

void write_series_csv(const std::filesystem::path& path, const ModulationSeries& s) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "t,re_z1,im_z1,re_z2,im_z2,eta_w_norm,interaction,almost_conserved\n" << std::setprecision(17);
  for (std::size_t k = 0; k < s.size(); ++k) {
    os << s.times[k] << ',' << s.z1[k].real() << ',' << s.z1[k].imag() << ',' << s.z2[k].real() << ','
       << s.z2[k].imag() << ',' << s.eta_weighted_norm[k] << ',' << s.interaction[k] << ','
       << s.almost_conserved[k] << '\n';
  }
}

// Long-run diagnostics ---------------------------------------------------------

EquipartitionReport equipartition_check(const ModulationSeries& s, const LatticeField& u0, const SpectralData& spec,
                                        int N0, double tail_fraction, double convergence_factor) {
  if (s.size() < 2) throw ValidationError("equipartition_check: series too short");
  if (spec.count() < 2) throw ValidationError("equipartition_check: need two eigenpairs");
  EquipartitionReport r;
  r.epsilon = norm_l2(u0);
  const double a1 = std::norm(inner(u0, spec.eigenfunction(0)));
  const double a2 = std::norm(inner(u0, spec.eigenfunction(1)));

  const double t_end = s.times.back();
  const double t_tail = t_end - tail_fraction * (t_end - s.times.front());
  double m1 = 0, m2 = 0, r1 = 0, r2 = 0;
  int count = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s.times[k] < t_tail) continue;
    m1 += std::norm(s.z1[k]);
    m2 += std::norm(s.z2[k]);
    r1 += std::abs(s.z1[k]);
    r2 += std::abs(s.z2[k]);
    ++count;
  }
  m1 /= count;
  m2 /= count;
  r1 /= count;
  r2 /= count;

  r.survivor = m1 >= m2 ? 1 : 2;
  r.dying_amplitude = r.survivor == 1 ? r2 : r1;
  r.measured_rho_sq = r.survivor == 1 ? m1 : m2;
  r.measured_rho = r.survivor == 1 ? r1 : r2;
  const double n0 = N0;
  r.predicted = r.survivor == 1 ? a1 + (n0 - 1) / n0 * a2 : n0 / (n0 - 1) * a1 + a2;
  r.residual = std::abs(r.measured_rho_sq - r.predicted);
  r.residual_rho_reading = std::abs(r.measured_rho - r.predicted);
  r.residual_over_eps4 = r.epsilon > 0 ? r.residual / std::pow(r.epsilon, 4) : 0.0;
  r.interaction_tail_fraction = interaction_integral(s).tail_fraction;
  r.converged = r.dying_amplitude < convergence_factor * r.epsilon;
  char buf[200];
  std::snprintf(buf, sizeof buf, "tail |z_%d| = %.3e %s %.3e = %.0e * eps", 3 - r.survivor, r.dying_amplitude,
                r.converged ? "<" : ">=", convergence_factor * r.epsilon, convergence_factor);
  r.message = buf;
  return r;
}

InteractionIntegral interaction_integral(const ModulationSeries& s) {
  InteractionIntegral out;
  if (s.size() < 2) return out;
  const double half = 0.5 * (s.times.front() + s.times.back());
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double dt = s.times[k] - s.times[k - 1];
    const double piece = 0.5 * dt * (s.interaction[k] * s.interaction[k] + s.interaction[k - 1] * s.interaction[k - 1]);
    out.total += piece;
    if (s.times[k - 1] >= half) out.tail += piece;
  }
  out.tail_fraction = out.total > 0 ? out.tail / out.total : 0.0;
  return out;
}

AlmostConservationFit almost_conservation_fit(const ModulationSeries& s, double epsilon) {
  if (s.size() < 2) throw ValidationError("almost_conservation_fit: series too short");
  if (!(epsilon > 0)) throw ValidationError("almost_conservation_fit: epsilon must be positive");
  AlmostConservationFit f;
  for (double q : s.almost_conserved) f.max_drift = std::max(f.max_drift, std::abs(q - s.almost_conserved.front()));
  f.T = s.times.back() - s.times.front();
  f.constant = f.max_drift / (std::pow(epsilon, 4) * f.T);
  return f;
}

InstabilityReport instability_witness(double z_amp, double seed_frac, const IntegratorConfig& config,
                                      const BranchPair& branches, const Potential& V,
                                      const NonlinearityCoefficients& coeffs, std::optional<double> orbit_radius,
                                      int check_stride) {
  config.validate(V.grid());
  if (check_stride < 1) throw ValidationError("instability_witness: check_stride must be positive");
  InstabilityReport r;
  r.seed_frac = seed_frac;
  r.z_amp = z_amp;
  r.orbit_radius = orbit_radius.value_or(z_amp / 2);
  r.t_max = config.t_max;

  const LatticeField phi2 = eval_bound_state(branches.second, z_amp).field;
  const Eigen::VectorXcd phi1 = branches.first.base_eigenfunction.cast<cplx>();
  Eigen::VectorXcd u = phi2.values() + (seed_frac * z_amp) * phi1;
  const double phi_mass = mass(phi2);

  auto distance = [&]() {
    const double d2 = u.squaredNorm() + phi_mass - 2.0 * std::abs(phi2.values().dot(u));
    return std::sqrt(std::max(0.0, d2));
  };

  const SplitStepIntegrator integ(V, coeffs, config.dt, config.absorber);
  const long total = std::lround(config.t_max / config.dt);
  long k = 0;
  r.max_distance = distance();
  while (k < total) {
    const long n = std::min<long>(check_stride, total - k);
    integ.advance(u, n);
    k += n;
    if (!u.allFinite()) throw NumericalError("instability_witness: non-finite field");
    const double d = distance();
    r.max_distance = std::max(r.max_distance, d);
    if (d > r.orbit_radius) {
      r.exit_time = k * config.dt;
      break;
    }
  }
  return r;
}

std::vector<double> window_average(const std::vector<double>& times, const std::vector<double>& values, double window) {
  if (times.size() != values.size()) throw ValidationError("window_average: length mismatch");
  std::vector<double> out;
  if (times.empty() || !(window > 0)) return out;
  const double t0 = times.front();
  std::size_t k = 0;
  for (int w = 0;; ++w) {
    const double hi = t0 + (w + 1) * window;
    if (hi > times.back() + 1e-9 * window) break;
    double sum = 0;
    int c = 0;
    while (k < times.size() && times[k] < hi) {
      sum += values[k];
      ++c;
      ++k;
    }
    if (c > 0) out.push_back(sum / c);
  }
  return out;
}

RateFit fgr_rate_fit(const ModulationSeries& s, double Gamma, int N0, double e1, double e2, double window,
                     const std::vector<double>* rate_z1, const std::vector<double>* rate_z2) {
  if (window <= 0) window = 20.0 * std::numbers::pi / (e2 - e1);
  const std::vector<double>& r1 = rate_z1 ? *rate_z1 : s.dz1_sq_dt;
  const std::vector<double>& r2 = rate_z2 ? *rate_z2 : s.dz2_sq_dt;
  if (r1.size() != s.size() || r2.size() != s.size()) throw ValidationError("fgr_rate_fit: rate series length mismatch");
  std::vector<double> P(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) P[k] = s.interaction[k] * s.interaction[k];

  RateFit f;
  f.predicted_z2 = -2.0 * N0 * Gamma;
  f.predicted_z1 = 2.0 * (N0 - 1) * Gamma;
  const auto Pw = window_average(s.times, P, window);
  const auto w1 = window_average(s.times, r1, window);
  const auto w2 = window_average(s.times, r2, window);
  f.windows = static_cast<int>(Pw.size());
  if (std::all_of(P.begin(), P.end(), [](double p) { return p == 0.0; })) {
    f.degenerate = true;
    return f;
  }
  if (f.windows < 3) throw ValidationError("fgr_rate_fit: fewer than 3 averaging windows (insufficient dynamic range)");
  double pp = 0, p1 = 0, p2 = 0;
  for (int k = 0; k < f.windows; ++k) {
    pp += Pw[k] * Pw[k];
    p1 += Pw[k] * w1[k];
    p2 += Pw[k] * w2[k];
  }
  f.slope_z1 = p1 / pp;
  f.slope_z2 = p2 / pp;
  f.balance = N0 * f.slope_z1 + (N0 - 1) * f.slope_z2;
  if (Gamma != 0) {
    f.relative_error_z1 = std::abs(f.slope_z1 - f.predicted_z1) / std::abs(f.predicted_z1);
    f.relative_error_z2 = std::abs(f.slope_z2 - f.predicted_z2) / std::abs(f.predicted_z2);
  }
  return f;
}

}  // namespace dnls
