#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dnls/lattice.hpp"
#include "dnls/spectral.hpp"

namespace dnls {

/// Family rho -> (q_j(rho), e~_j(rho)) of nonlinear bound states
/// phi_j(z) = z (phi_j + q_j(|z|^2)) with E_j = e_j + e~_j.
struct BoundStateBranch {
  int mode_index = 1;  // 1 or 2
  LatticeGrid grid{1};
  double base_eigenvalue = 0.0;
  Eigen::VectorXd base_eigenfunction;
  std::vector<double> rho_samples;             // increasing, > 0
  std::vector<Eigen::VectorXd> q_profiles;     // real, orthogonal to the base eigenfunction
  std::vector<double> e_shift;
  std::vector<double> residuals;               // ||(H-E)phi(z) + beta(|phi|^2) phi|| per sample
  std::vector<int> newton_iterations;
  bool truncated = false;
  std::string truncation_reason;

  double rho_max() const { return rho_samples.empty() ? 0.0 : rho_samples.back(); }
  std::size_t size() const { return rho_samples.size(); }
};

struct BranchOptions {
  double rho_min = 0.0;  // 0 selects rho_max * 1e-3
  int max_newton = 50;
  double residual_tolerance = 1e-13;
};

/// Newton continuation from the linear eigenpair (e_j, phi_j) on a geometric
/// rho grid. Samples past a Newton failure are dropped and the branch is
/// flagged as truncated.
BoundStateBranch continue_branch(int j, double rho_max, int n_steps, const Potential& V,
                                 const NonlinearityCoefficients& coeffs, const SpectralData& spec,
                                 const BranchOptions& options = {});

/// q_j and e~_j at rho by cubic Lagrange interpolation, including the node rho=0 with q=0, e~=0.
struct BranchSample {
  Eigen::VectorXd q;
  Eigen::VectorXd dq_drho;
  double e_shift = 0.0;
  double de_drho = 0.0;
};
BranchSample interpolate_branch(const BoundStateBranch& branch, double rho);

struct BoundStateValue {
  LatticeField field;
  double energy = 0.0;  // E_j(|z|^2)
};

BoundStateValue eval_bound_state(const BoundStateBranch& branch, cplx z);

/// d phi_j(z)/d Re z and d phi_j(z)/d Im z.
std::pair<Eigen::VectorXcd, Eigen::VectorXcd> bound_state_derivatives(const BoundStateBranch& branch, cplx z);

/// Slope of log||q|| against log sqrt(rho) over samples with rho in [lo, hi].
double branch_scaling_slope(const BoundStateBranch& branch, double rho_lo, double rho_hi);

/// Equation (H - E) phi + beta(|phi|^2) phi, l2 norm, for any field and E.
double stationary_residual(const LatticeField& phi, double E, const Potential& V, const NonlinearityCoefficients& coeffs);

void write_branch_csv(const std::filesystem::path& path, const BoundStateBranch& branch);

}  // namespace dnls
