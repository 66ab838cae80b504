#include <doctest.h>

#include <numbers>

#include "fixtures.hpp"

using namespace dnls;
using fixtures::random_field;

TEST_CASE("free Laplacian has no discrete spectrum") {
  CHECK(discrete_spectrum(Potential::zero(LatticeGrid(200))).count() == 0);
}

TEST_CASE("single-site well matches the exponential ansatz and a dense solve") {
  const double v0 = 2.0;
  const double kappa = std::asinh(v0 / 2.0);
  const double analytic = 2.0 - 2.0 * std::cosh(kappa);
  CHECK(std::abs(analytic - (2.0 - std::sqrt(8.0))) < 1e-15);

  const SpectralData s = discrete_spectrum(Potential::single_site(LatticeGrid(1000), v0));
  REQUIRE(s.count() == 1);
  CHECK(std::abs(s.eigenvalues[0] - analytic) < 1e-9);
  CHECK(s.eigenvalues[0] == doctest::Approx(-0.828427).epsilon(1e-6));

  const auto dense = fixtures::dense_discrete_eigenvalues(Potential::single_site(LatticeGrid(200), v0));
  REQUIRE(dense.size() == 1);
  CHECK(std::abs(dense[0] - analytic) < 1e-9);
  CHECK(s.decay_rates[0] == doctest::Approx(kappa).epsilon(1e-9));
}

TEST_CASE("the frozen test potential has exactly two negative eigenvalues") {
  const SpectralData& s = fixtures::spectrum();
  REQUIRE(s.count() == 2);
  CHECK(s.eigenvalues[0] < s.eigenvalues[1]);
  CHECK(s.eigenvalues[1] < 0.0);
  const auto dense = fixtures::dense_discrete_eigenvalues(fixtures::potential());
  REQUIRE(dense.size() == 2);
  for (int j = 0; j < 2; ++j) CHECK(std::abs(dense[j] - s.eigenvalues[j]) < 1e-10);
  for (double r : s.residuals) CHECK(r <= 1e-10);
  for (std::size_t j = 0; j < 2; ++j) {
    const LatticeField phi = s.eigenfunction(j);
    CHECK(norm_l2(apply_H(phi, fixtures::potential()) - phi * s.eigenvalues[j]) <= 1e-10);
    CHECK(norm_l2(phi) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(std::abs(s.eigenfunctions[0].dot(s.eigenfunctions[1])) < 1e-13);
}

TEST_CASE("stagger-conjugated potential has eigenvalues 4 - e") {
  const SpectralData a = fixtures::spectrum();
  const SpectralData b = discrete_spectrum(negate(fixtures::potential()));
  REQUIRE(b.count() == a.count());
  for (std::size_t j = 0; j < a.count(); ++j) {
    CHECK(std::abs(b.eigenvalues[a.count() - 1 - j] - (4.0 - a.eigenvalues[j])) < 1e-10);
  }
}

TEST_CASE("near-degenerate distant wells are rejected") {
  const LatticeGrid g(200);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(g.size());
  v[g.index(-40)] = -2.0;
  v[g.index(40)] = -2.0;
  CHECK_THROWS_AS(discrete_spectrum(Potential(g, v)), Error);
}

TEST_CASE("pc_project examples") {
  const SpectralData& s = fixtures::spectrum();
  CHECK(norm_l2(pc_project(s.eigenfunction(0), s)) < 1e-14);
  CHECK(norm_l2(pc_project(s.eigenfunction(1) * cplx(0, 1), s)) < 1e-14);
  const LatticeField u = random_field(s.grid, 5);
  const LatticeField p = pc_project(u, s);
  CHECK(norm_l2(pc_project(p, s) - p) <= 1e-12 * norm_l2(u));
  for (std::size_t j = 0; j < s.count(); ++j) CHECK(std::abs(inner(p, s.eigenfunction(j))) < 1e-12);
}

TEST_CASE("resolvent below the spectrum is real for real data") {
  const LatticeField f = LatticeField::delta(fixtures::grid(), 0);
  const ResolventSample r = resolvent_solve(-10.0, 0.0, f, fixtures::potential());
  CHECK(std::abs(inner(r.solution, f).imag()) == 0.0);
  CHECK(r.relative_residual < 1e-12);
  CHECK_THROWS_AS(resolvent_solve(2.0, 0.0, f, fixtures::potential()), ValidationError);
}

TEST_CASE("resolvent has nonnegative imaginary part for eps > 0") {
  const Potential& V = fixtures::potential();
  LatticeField f(V.grid());
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (int n = -10; n <= 10; ++n) f.at(n) = nd(rng);
  for (double w : {0.5, 2.0, 3.5})
    for (double eps : {1.0, 0.1, 0.01}) {
      const ResolventSample r = resolvent_solve(w, eps, f, V);
      CHECK(r.relative_residual < 1e-10);
      CHECK(inner(r.solution, f).imag() >= -1e-12);
    }
}

TEST_CASE("free outgoing Green function has magnitude 1/(2 sin xi)") {
  // For -Delta the outgoing solution of (-Delta - omega - i0) x = delta_0 is
  // x(n) = i e^{i xi |n|} / (2 sin xi) with 2 - 2 cos xi = omega.
  const LatticeGrid g(400);
  const Potential V0 = Potential::zero(g);
  // Pointwise limits at distance n need eps n small, hence the wide padding.
  LadderOptions wide;
  wide.min_half_width = 40000;
  const LatticeField x = outgoing_resolvent(2.0, LatticeField::delta(g, 0), V0, wide);
  const double xi = std::numbers::pi / 2;
  for (int n = -20; n <= 20; ++n) {
    CHECK(std::abs(std::abs(x(n)) - 0.5) < 1e-6);
    const cplx expected = cplx(0, 1) * std::exp(cplx(0, xi * std::abs(n))) / (2.0 * std::sin(xi));
    CHECK(std::abs(x(n) - expected) < 1e-6);
  }
}

TEST_CASE("limiting absorption on an eigenfunction is the rank-one term") {
  const SpectralData& s = fixtures::spectrum();
  const Potential& V = fixtures::potential();
  const LatticeField phi = s.eigenfunction(0);
  const LatticeField g = random_field(V.grid(), 17, 15);
  const double w = 1.3;
  const LimitingAbsorption la = limiting_absorption(w, phi, g, V);
  const cplx expected = inner(phi, g) / (s.eigenvalues[0] - w);
  CHECK(std::abs(la.value - expected) < 1e-8 * std::abs(expected));
}

TEST_CASE("limiting absorption: f = g real gives Im >= 0; zero data gives 0") {
  const Potential& V = fixtures::potential();
  LatticeField f(V.grid());
  f.at(0) = 1.0;
  f.at(2) = -0.4;
  const LimitingAbsorption la = limiting_absorption(1.0, f, f, V);
  CHECK(la.value.imag() >= -1e-10);
  const LatticeField z(V.grid());
  CHECK(std::abs(limiting_absorption(1.0, z, z, V).value) == 0.0);
}

TEST_CASE("free Jost solutions are plane waves") {
  const LatticeGrid g(50);
  const double xi = 0.9;
  const JostPair p = jost_solutions(xi, Potential::zero(g));
  for (int n = -50; n <= 50; ++n) {
    CHECK(std::abs(p.plus.values[g.index(n)] - std::exp(cplx(0, xi * n))) < 1e-12);
    CHECK(std::abs(p.minus.values[g.index(n)] - std::exp(cplx(0, -xi * n))) < 1e-12);
  }
  CHECK(std::abs(p.wronskian - cplx(0, 2 * std::sin(xi))) < 1e-12);
}

TEST_CASE("Jost Wronskian is site independent") {
  const Potential& V = fixtures::potential();
  for (double xi : {0.1, 0.63, 1.5, 3.0}) {
    const JostPair p = jost_solutions(xi, V);
    CHECK(p.wronskian_spread < 1e-10);
    // Direct recomputation at random interior sites.
    std::mt19937 rng(1);
    std::uniform_int_distribution<int> site(-250, 249);
    double var = 0;
    for (int k = 0; k < 100; ++k) {
      const int n = site(rng);
      const auto& fp = p.plus.values;
      const auto& fm = p.minus.values;
      const int i = V.grid().index(n);
      const cplx w = fp[i + 1] * fm[i] - fp[i] * fm[i + 1];
      var += std::norm(w - p.wronskian) / 100;
    }
    CHECK(var < 1e-20);
  }
}

TEST_CASE("generic band edges") {
  CHECK(check_generic_edges(fixtures::potential()).generic);
  CHECK_FALSE(check_generic_edges(Potential::zero(LatticeGrid(100))).generic);
}

TEST_CASE("distorted Fourier transform of delta_0 for V = 0") {
  const LatticeGrid g(30);
  for (double xi : {-2.5, -0.4, 0.3, 1.9}) {
    CHECK(std::abs(distorted_ft(LatticeField::delta(g, 0), xi, Potential::zero(g)) -
                   1.0 / std::sqrt(2 * std::numbers::pi)) < 1e-13);
  }
}

namespace {
double ft_mass(const LatticeField& f, const Potential& V, int m) {
  // Midpoint rule; the integrand is smooth and 2 pi periodic.
  double acc = 0.0;
  const double h = 2 * std::numbers::pi / m;
  for (int k = 0; k < m; ++k) acc += std::norm(distorted_ft(f, -std::numbers::pi + (k + 0.5) * h, V));
  return acc * h;
}
}  // namespace

TEST_CASE("distorted Fourier transform satisfies Parseval on range(P_c)") {
  const LatticeGrid g(60);
  const Potential V = default_test_potential(g);
  const SpectralData s = discrete_spectrum(V);
  for (unsigned seed : {1u, 2u}) {
    const LatticeField f = random_field(g, seed, 8);
    const double lhs = mass(pc_project(f, s));
    CHECK(std::abs(ft_mass(f, V, 1200) - lhs) <= 1e-6 * lhs);
  }
  CHECK(ft_mass(s.eigenfunction(0), V, 1200) < 1e-10);
}

TEST_CASE("linear propagator") {
  const Potential& V = fixtures::potential();
  const SpectralData& s = fixtures::spectrum();
  const LatticeField u0 = random_field(V.grid(), 21, 30);
  CHECK(norm_l2(propagate_linear(u0, 0.0, V) - u0) < 1e-13 * norm_l2(u0));
  CHECK(std::abs(mass(propagate_linear(u0, 100.0, V)) - mass(u0)) < 1e-10 * mass(u0));
  const double t = 37.5;
  const LatticeField phi = s.eigenfunction(0);
  CHECK(norm_l2(propagate_linear(phi, t, V) - phi * std::exp(cplx(0, -s.eigenvalues[0] * t))) < 1e-10);
  const LatticeField a = pc_project(propagate_linear(u0, t, V), s);
  const LatticeField b = propagate_linear(pc_project(u0, s), t, V);
  CHECK(norm_l2(a - b) < 1e-10 * norm_l2(u0));
}

TEST_CASE("decay experiment needs at least four times") {
  DecayOptions o;
  o.n_times = 3;
  CHECK_THROWS_AS(decay_exponent_experiment(DecayKind::sup_norm_l0, Potential::zero(LatticeGrid(200)), 50, o),
                  ValidationError);
}

TEST_CASE("free sup-norm decay exponent on a short window") {
  const DecayFit fit = decay_exponent_experiment(DecayKind::sup_norm_l0, Potential::zero(LatticeGrid(1000)), 400);
  CHECK(fit.times.size() == 16);
  CHECK(std::abs(fit.slope + 1.0 / 3.0) < 0.1);
}
