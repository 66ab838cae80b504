#pragma once

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "dnls/bound_states.hpp"
#include "dnls/harness.hpp"
#include "dnls/lattice.hpp"
#include "dnls/modulation.hpp"
#include "dnls/resonance.hpp"
#include "dnls/spectral.hpp"

namespace fixtures {

using dnls::cplx;

inline const dnls::LatticeGrid& grid() {
  static const dnls::LatticeGrid g(300);
  return g;
}

inline const dnls::Potential& potential() {
  static const dnls::Potential V = dnls::default_test_potential(grid());
  return V;
}

inline const dnls::SpectralData& spectrum() {
  static const dnls::SpectralData s = dnls::discrete_spectrum(potential());
  return s;
}

inline const dnls::ResonanceReport& resonance() {
  static const dnls::ResonanceReport r = dnls::classify_resonance(spectrum());
  return r;
}

inline const dnls::BranchPair& branches() {
  static const dnls::BranchPair b{
      dnls::continue_branch(1, 0.02, 25, potential(), {}, spectrum()),
      dnls::continue_branch(2, 0.02, 25, potential(), {}, spectrum())};
  return b;
}

inline dnls::LatticeField random_field(const dnls::LatticeGrid& g, unsigned seed, int radius = -1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  dnls::LatticeField u(g);
  const int r = radius < 0 ? g.half_width() : radius;
  for (int n = -r; n <= r; ++n) u.at(n) = cplx(nd(rng), nd(rng));
  return u;
}

// Independent dense reference for H = -Delta + V with Dirichlet truncation.
inline Eigen::MatrixXd dense_H(const dnls::Potential& V) {
  const int n = V.grid().size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    H(i, i) = 2.0 + V.values()[i];
    if (i > 0) H(i, i - 1) = -1.0;
    if (i + 1 < n) H(i, i + 1) = -1.0;
  }
  return H;
}

inline std::vector<double> dense_discrete_eigenvalues(const dnls::Potential& V, double margin = 1e-6) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_H(V), Eigen::EigenvaluesOnly);
  std::vector<double> out;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double e = es.eigenvalues()[k];
    if (e < -margin || e > 4.0 + margin) out.push_back(e);
  }
  return out;
}

}  // namespace fixtures
