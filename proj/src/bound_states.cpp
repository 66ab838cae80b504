#include "dnls/bound_states.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/SparseLU>

#include "dnls/numerics.hpp"

namespace dnls {

namespace {

struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

Eigen::VectorXd stationary_map(const Potential& V, const NonlinearityCoefficients& coeffs, double rho,
                               const Eigen::VectorXd& psi, double E) {
  Eigen::VectorXd F;
  apply_H(V, psi, F);
  for (Eigen::Index i = 0; i < psi.size(); ++i) F[i] += (coeffs.beta(rho * psi[i] * psi[i]) - E) * psi[i];
  return F;
}

// Bordered Newton for (psi, e~) with psi = phi_j + q and <phi_j, psi> = 1.
NewtonResult solve_profile(const Potential& V, const NonlinearityCoefficients& coeffs, double rho, double e_base,
                           const Eigen::VectorXd& phi, Eigen::VectorXd& psi, double& e_shift,
                           const BranchOptions& options) {
  const Eigen::Index n = psi.size();
  const Eigen::VectorXd& v = V.values();
  NewtonResult r;
  Eigen::SparseMatrix<double> J(n + 1, n + 1);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(6 * n));
  double last_step = 1.0;

  for (r.iterations = 0; r.iterations <= options.max_newton; ++r.iterations) {
    const double E = e_base + e_shift;
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = stationary_map(V, coeffs, rho, psi, E);
    rhs[n] = phi.dot(psi) - 1.0;
    r.residual = rhs.head(n).norm();
    // q can be far below the residual tolerance at small rho, so at least two updates are taken.
    if (r.iterations >= 2 && r.residual <= options.residual_tolerance && last_step <= 1e-14) {
      r.converged = true;
      return r;
    }
    if (r.iterations == options.max_newton) break;

    // Chord iteration: the Jacobian is factorized once per sample.
    if (r.iterations == 0) {
      trip.clear();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = rho * psi[i] * psi[i];
        trip.emplace_back(i, i, 2.0 + v[i] - E + coeffs.beta(s) + 2.0 * s * coeffs.beta_prime(s));
        if (i > 0) trip.emplace_back(i, i - 1, -1.0);
        if (i + 1 < n) trip.emplace_back(i, i + 1, -1.0);
        trip.emplace_back(i, n, -psi[i]);
        trip.emplace_back(n, i, phi[i]);
      }
      J.setFromTriplets(trip.begin(), trip.end());
      lu.compute(J);
      if (lu.info() != Eigen::Success) break;
    }
    const Eigen::VectorXd delta = lu.solve(rhs);
    psi -= delta.head(n);
    e_shift -= delta[n];
    last_step = delta.cwiseAbs().maxCoeff();
    if (!psi.allFinite() || !std::isfinite(e_shift)) break;
  }
  return r;
}

}  // namespace

double stationary_residual(const LatticeField& phi, double E, const Potential& V,
                           const NonlinearityCoefficients& coeffs) {
  require_same_grid(phi.grid(), V.grid(), "stationary_residual");
  Eigen::VectorXcd out;
  apply_H(V, phi.values(), out);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const cplx p = phi.values()[i];
    out[i] += (coeffs.beta(std::norm(p)) - E) * p;
  }
  return out.norm();
}

BoundStateBranch continue_branch(int j, double rho_max, int n_steps, const Potential& V,
                                 const NonlinearityCoefficients& coeffs, const SpectralData& spec,
                                 const BranchOptions& options) {
  if (j < 1 || static_cast<std::size_t>(j) > spec.count()) throw ValidationError("continue_branch: no eigenpair " + std::to_string(j));
  if (!(rho_max > 0)) throw ValidationError("continue_branch: rho_max must be positive");
  if (n_steps < 3) throw ValidationError("continue_branch: need at least 3 samples");
  require_same_grid(V.grid(), spec.grid, "continue_branch");

  BoundStateBranch b;
  b.mode_index = j;
  b.grid = V.grid();
  b.base_eigenvalue = spec.eigenvalues[j - 1];
  b.base_eigenfunction = spec.eigenfunctions[j - 1];

  const double rho_min = options.rho_min > 0 ? options.rho_min : rho_max * 1e-3;
  if (rho_min >= rho_max) throw ValidationError("continue_branch: rho_min must be below rho_max");
  const Eigen::VectorXd& phi = b.base_eigenfunction;
  Eigen::VectorXd psi = phi;
  double e_shift = 0.0;

  for (int k = 0; k < n_steps; ++k) {
    const double rho = rho_min * std::pow(rho_max / rho_min, double(k) / double(n_steps - 1));
    Eigen::VectorXd trial = psi;
    double trial_e = e_shift;
    const NewtonResult nr = solve_profile(V, coeffs, rho, b.base_eigenvalue, phi, trial, trial_e, options);
    if (!nr.converged) {
      b.truncated = true;
      b.truncation_reason = "Newton did not converge at rho=" + std::to_string(rho) + " after " +
                            std::to_string(nr.iterations) + " iterations (residual " + std::to_string(nr.residual) + ")";
      break;
    }
    const double E = b.base_eigenvalue + trial_e;
    if (E >= 0.0 && E <= 4.0) {
      b.truncated = true;
      b.truncation_reason = "E_j entered the band [0,4] at rho=" + std::to_string(rho);
      break;
    }
    psi = trial;
    e_shift = trial_e;
    Eigen::VectorXd q = psi - phi;
    q -= phi.dot(q) * phi;  // removes the last rounding-level component along phi
    b.rho_samples.push_back(rho);
    b.q_profiles.push_back(q);
    b.e_shift.push_back(e_shift);
    b.newton_iterations.push_back(nr.iterations);
    const LatticeField full(b.grid, Eigen::VectorXd(std::sqrt(rho) * (phi + q)));
    b.residuals.push_back(stationary_residual(full, E, V, coeffs));
  }
  if (b.rho_samples.size() < 3) {
    throw NumericalError("continue_branch: fewer than 3 converged samples; " + b.truncation_reason);
  }
  return b;
}

BranchSample interpolate_branch(const BoundStateBranch& b, double rho) {
  if (rho < 0 || rho > b.rho_max() * (1.0 + 1e-12)) {
    throw ValidationError("|z|^2=" + std::to_string(rho) + " outside the branch range [0, " +
                          std::to_string(b.rho_max()) + "]");
  }
  const Eigen::Index n = b.base_eigenfunction.size();
  BranchSample s;
  // Nodes: rho = 0 followed by the samples.
  const std::size_t m = b.size() + 1;
  auto node = [&](std::size_t k) { return k == 0 ? 0.0 : b.rho_samples[k - 1]; };
  auto qnode = [&](std::size_t k) -> Eigen::VectorXd {
    return k == 0 ? Eigen::VectorXd::Zero(n) : b.q_profiles[k - 1];
  };
  auto enode = [&](std::size_t k) { return k == 0 ? 0.0 : b.e_shift[k - 1]; };

  std::size_t hi = 1;
  while (hi < m - 1 && node(hi) < rho) ++hi;
  std::size_t first = hi >= 2 ? hi - 2 : 0;
  if (first + 4 > m) first = m - 4;

  double xs[4];
  for (int i = 0; i < 4; ++i) xs[i] = node(first + i);
  const auto lw = numerics::lagrange4(xs, rho);
  s.q = Eigen::VectorXd::Zero(n);
  s.dq_drho = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < 4; ++i) {
    if (rho == xs[i]) {
      s.q = qnode(first + i);
      s.e_shift = enode(first + i);
      s.dq_drho.setZero();
      s.de_drho = 0.0;
      for (int k = 0; k < 4; ++k) {
        s.dq_drho += lw.dw[k] * qnode(first + k);
        s.de_drho += lw.dw[k] * enode(first + k);
      }
      return s;
    }
  }
  for (int i = 0; i < 4; ++i) {
    const Eigen::VectorXd qi = qnode(first + i);
    s.q += lw.w[i] * qi;
    s.dq_drho += lw.dw[i] * qi;
    s.e_shift += lw.w[i] * enode(first + i);
    s.de_drho += lw.dw[i] * enode(first + i);
  }
  return s;
}

BoundStateValue eval_bound_state(const BoundStateBranch& b, cplx z) {
  const BranchSample s = interpolate_branch(b, std::norm(z));
  Eigen::VectorXcd v = (b.base_eigenfunction + s.q).cast<cplx>() * z;
  return {LatticeField(b.grid, std::move(v)), b.base_eigenvalue + s.e_shift};
}

std::pair<Eigen::VectorXcd, Eigen::VectorXcd> bound_state_derivatives(const BoundStateBranch& b, cplx z) {
  const BranchSample s = interpolate_branch(b, std::norm(z));
  const Eigen::VectorXcd psi = (b.base_eigenfunction + s.q).cast<cplx>();
  const Eigen::VectorXcd dpsi = s.dq_drho.cast<cplx>();
  // phi(z) = z psi(|z|^2): d/dz_R = psi + 2 z_R z psi', d/dz_I = i psi + 2 z_I z psi'.
  Eigen::VectorXcd dr = psi + (2.0 * z.real()) * z * dpsi;
  Eigen::VectorXcd di = cplx(0.0, 1.0) * psi + (2.0 * z.imag()) * z * dpsi;
  return {std::move(dr), std::move(di)};
}

double branch_scaling_slope(const BoundStateBranch& b, double rho_lo, double rho_hi) {
  std::vector<double> x, y;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double rho = b.rho_samples[k];
    if (rho < rho_lo * (1 - 1e-12) || rho > rho_hi * (1 + 1e-12)) continue;
    x.push_back(std::sqrt(rho));
    y.push_back(b.q_profiles[k].norm());
  }
  if (x.size() < 2) throw ValidationError("branch_scaling_slope: fewer than two samples in range");
  return numerics::fit_loglog(x, y).slope;
}

void write_branch_csv(const std::filesystem::path& path, const BoundStateBranch& b) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "rho,e_shift,q_norm_l2\n" << std::setprecision(17);
  for (std::size_t k = 0; k < b.size(); ++k) {
    os << b.rho_samples[k] << ',' << b.e_shift[k] << ',' << b.q_profiles[k].norm() << '\n';
  }
}

}  // namespace dnls
