#include <doctest.h>

#include "dnls/dynamics.hpp"
#include "fixtures.hpp"

using namespace dnls;

TEST_CASE("branch bifurcates from the linear eigenpair") {
  for (const BoundStateBranch* b : {&fixtures::branches().first, &fixtures::branches().second}) {
    REQUIRE(b->size() >= 3);
    // q = O(rho^3) and e~ = O(rho): both vanish against rho at the first sample.
    CHECK(b->q_profiles.front().norm() < 1e-6 * b->rho_samples.front());
    CHECK(std::abs(b->e_shift.front()) < 10.0 * b->rho_samples.front());
    const BranchSample s0 = interpolate_branch(*b, 0.0);
    CHECK(s0.q.norm() == 0.0);
    CHECK(s0.e_shift == 0.0);
  }
}

TEST_CASE("accepted samples solve the stationary equation") {
  const BoundStateBranch& b = fixtures::branches().first;
  for (double r : b.residuals) CHECK(r <= 1e-12);
  for (std::size_t k = 0; k < b.size(); k += 6) {
    const BoundStateValue v = eval_bound_state(b, std::sqrt(b.rho_samples[k]));
    CHECK(stationary_residual(v.field, v.energy, fixtures::potential(), {}) <= 1e-12);
  }
}

TEST_CASE("profiles are orthogonal to the base eigenfunction") {
  for (const BoundStateBranch* b : {&fixtures::branches().first, &fixtures::branches().second})
    for (const auto& q : b->q_profiles) CHECK(std::abs(b->base_eigenfunction.dot(q)) < 1e-14);
}

TEST_CASE("|q| and |e~| increase along the branch") {
  const BoundStateBranch& b = fixtures::branches().second;
  for (std::size_t k = 1; k < b.size(); ++k) {
    WARN(b.q_profiles[k].norm() > b.q_profiles[k - 1].norm());
    WARN(std::abs(b.e_shift[k]) > std::abs(b.e_shift[k - 1]));
  }
}

TEST_CASE("profiles decay at half the linear rate") {
  const SpectralData& s = fixtures::spectrum();
  for (int j = 0; j < 2; ++j) {
    const BoundStateBranch& b = j == 0 ? fixtures::branches().first : fixtures::branches().second;
    const double kappa = s.decay_rates[j];
    const Eigen::VectorXd& q = b.q_profiles.back();
    const double C = q.cwiseAbs().maxCoeff();
    for (int n = -b.grid.half_width(); n <= b.grid.half_width(); ++n) {
      const double bound = C * std::exp(-0.5 * kappa * std::abs(n));
      if (bound < 1e-14 * C) break;  // below the Newton rounding floor
      CHECK(std::abs(q[b.grid.index(n)]) <= bound);
    }
  }
}

TEST_CASE("correction scales like |z|^6") {
  const BoundStateBranch b = continue_branch(1, 1e-2, 25, fixtures::potential(), {}, fixtures::spectrum(),
                                             BranchOptions{1e-5});
  CHECK(std::abs(branch_scaling_slope(b, 1e-4, 1e-2) - 6.0) <= 0.2);
}

TEST_CASE("interpolation is exact at nodes and gauge covariant") {
  const BoundStateBranch& b = fixtures::branches().first;
  const std::size_t k = 10;
  const double rho = b.rho_samples[k];
  const BranchSample s = interpolate_branch(b, rho);
  CHECK((s.q - b.q_profiles[k]).norm() == 0.0);
  CHECK(s.e_shift == b.e_shift[k]);

  const BoundStateValue v = eval_bound_state(b, std::sqrt(rho));
  const Eigen::VectorXd expected = std::sqrt(rho) * (b.base_eigenfunction + b.q_profiles[k]);
  CHECK((v.field.values().real() - expected).norm() == 0.0);

  const cplx z(0.05, 0.03);
  const LatticeField base = eval_bound_state(b, z).field;
  for (double th : {0.4, 2.2, -1.0}) {
    const cplx g = std::polar(1.0, th);
    CHECK(norm_l2(eval_bound_state(b, g * z).field - base * g) <= 1e-15 * norm_l2(base));
  }
  CHECK_THROWS_AS(interpolate_branch(b, 2 * b.rho_max()), ValidationError);
}

TEST_CASE("bound-state derivatives match finite differences") {
  const BoundStateBranch& b = fixtures::branches().second;
  const cplx z(0.06, -0.04);
  const auto [dr, di] = bound_state_derivatives(b, z);
  const double h = 1e-6;
  const Eigen::VectorXcd fr =
      (eval_bound_state(b, z + h).field.values() - eval_bound_state(b, z - h).field.values()) / (2 * h);
  const Eigen::VectorXcd fi = (eval_bound_state(b, z + cplx(0, h)).field.values() -
                               eval_bound_state(b, z - cplx(0, h)).field.values()) / (2 * h);
  CHECK((dr - fr).norm() < 1e-8);
  CHECK((di - fi).norm() < 1e-8);
}

TEST_CASE("bound states are stationary under the full evolution") {
  const BoundStateBranch& b = fixtures::branches().first;
  const cplx z = 0.1;
  const BoundStateValue v = eval_bound_state(b, z);
  IntegratorConfig cfg;
  cfg.dt = 0.005;
  cfg.t_max = 50.0;
  cfg.record_stride = 10000;
  const TrajectoryRecord rec = run(v.field, cfg, fixtures::potential(), {});
  const LatticeField& u = rec.snapshots.back();
  double worst = 0;
  for (Eigen::Index i = 0; i < u.values().size(); ++i) {
    worst = std::max(worst, std::abs(std::abs(u.values()[i]) - std::abs(v.field.values()[i])));
  }
  CHECK(worst <= 1e-6);
  const cplx phase = inner(u, v.field) / mass(v.field);
  const cplx expected = std::exp(cplx(0, -v.energy * cfg.t_max));
  CHECK(std::abs(phase - expected) <= 1e-4);
}

TEST_CASE("branch validation") {
  CHECK_THROWS_AS(continue_branch(3, 1e-2, 10, fixtures::potential(), {}, fixtures::spectrum()), ValidationError);
  CHECK_THROWS_AS(continue_branch(1, -1.0, 10, fixtures::potential(), {}, fixtures::spectrum()), ValidationError);
}
