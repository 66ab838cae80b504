#include <doctest.h>

#include <filesystem>

#include "fixtures.hpp"

using namespace dnls;
using fixtures::random_field;

TEST_CASE("laplacian annihilates constants in the interior") {
  const LatticeGrid g(20);
  LatticeField u(g, Eigen::VectorXcd(Eigen::VectorXcd::Ones(g.size())));
  const LatticeField d = discrete_laplacian(u);
  for (int n = -19; n <= 19; ++n) CHECK(std::abs(d(n)) == 0.0);
}

TEST_CASE("laplacian of a delta") {
  const LatticeGrid g(10);
  const LatticeField d = discrete_laplacian(LatticeField::delta(g, 0));
  CHECK(d(0) == cplx(-2.0));
  CHECK(d(1) == cplx(1.0));
  CHECK(d(-1) == cplx(1.0));
  for (int n = 2; n <= 10; ++n) CHECK(std::abs(d(n)) + std::abs(d(-n)) == 0.0);
}

TEST_CASE("laplacian plane-wave symbol") {
  const LatticeGrid g(200);
  const double xi = 0.7;
  LatticeField u(g);
  for (int n = -200; n <= 200; ++n) u.at(n) = std::exp(cplx(0, xi * n));
  const cplx expected = (2.0 * std::cos(xi) - 2.0) * u(0);
  CHECK(std::abs(discrete_laplacian(u)(0) - expected) < 1e-14);
}

TEST_CASE("apply_H examples") {
  const LatticeGrid g(10);
  const LatticeField d0 = LatticeField::delta(g, 0);
  const LatticeField h0 = apply_H(d0, Potential::zero(g));
  CHECK(h0(0) == cplx(2.0));
  CHECK(h0(1) == cplx(-1.0));
  CHECK(h0(-1) == cplx(-1.0));
  const LatticeField h1 = apply_H(d0, Potential::single_site(g, 1.5));
  CHECK(h1(0) == cplx(0.5));
  CHECK(h1(1) == cplx(-1.0));
  CHECK(norm_l2(apply_H(LatticeField(g), Potential::single_site(g, 1.5))) == 0.0);
}

TEST_CASE("apply_H is symmetric for the real inner product") {
  const Potential& V = fixtures::potential();
  for (unsigned s = 0; s < 5; ++s) {
    const LatticeField u = random_field(V.grid(), s), v = random_field(V.grid(), s + 100);
    const double lhs = inner_real(apply_H(u, V), v), rhs = inner_real(u, apply_H(v, V));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("free quadratic form lies in [0, 4 ||u||^2]") {
  const LatticeGrid g(100);
  for (unsigned s = 0; s < 20; ++s) {
    const LatticeField u = random_field(g, s);
    const double q = inner_real(apply_H(u, Potential::zero(g)), u);
    CHECK(q >= 0.0);
    CHECK(q <= 4.0 * mass(u));
  }
}

TEST_CASE("beta and its antiderivative") {
  const NonlinearityCoefficients cubic;
  CHECK(cubic.beta(0.0) == 0.0);
  CHECK(cubic.beta(1.0) == 1.0);
  const NonlinearityCoefficients quartic({0.5});
  CHECK(quartic.beta(2.0) == doctest::Approx(16.0).epsilon(1e-15));
  CHECK(beta_eval(2.0, quartic) == quartic.beta(2.0));

  // Composite Simpson integral of beta against the closed-form antiderivative.
  const NonlinearityCoefficients c({0.3, -0.2, 0.05});
  for (double s : {0.1, 0.7, 1.3}) {
    const int m = 2000;
    const double h = s / m;
    double acc = c.beta(0.0) + c.beta(s);
    for (int k = 1; k < m; ++k) acc += (k % 2 ? 4.0 : 2.0) * c.beta(k * h);
    CHECK(c.antiderivative(s) == doctest::Approx(acc * h / 3.0).epsilon(1e-12));
  }
  // beta' against a central difference.
  const double s = 0.4, h = 1e-6;
  CHECK(c.beta_prime(s) == doctest::Approx((c.beta(s + h) - c.beta(s - h)) / (2 * h)).epsilon(1e-8));
}

TEST_CASE("mass examples") {
  const LatticeGrid g(5);
  CHECK(mass(LatticeField::delta(g, 0)) == 1.0);
  CHECK(mass(LatticeField(g)) == 0.0);
  const cplx c(0.3, -1.2);
  CHECK(mass(LatticeField::delta(g, 0, c) + LatticeField::delta(g, 1, c)) == doctest::Approx(2.0 * std::norm(c)));
}

TEST_CASE("energy examples and gauge invariance") {
  const LatticeGrid g(5);
  const NonlinearityCoefficients cubic;
  CHECK(energy(LatticeField(g), Potential::zero(g), cubic) == 0.0);
  CHECK(energy(LatticeField::delta(g, 0), Potential::zero(g), cubic) == doctest::Approx(1.125).epsilon(1e-15));

  const Potential& V = fixtures::potential();
  const LatticeField u = random_field(V.grid(), 7, 20) * 0.1;
  const double e0 = energy(u, V, cubic);
  for (double th : {0.3, 1.7, -2.9}) {
    CHECK(std::abs(energy(u * std::polar(1.0, th), V, cubic) - e0) <= 1e-15 * std::abs(e0));
  }
}

TEST_CASE("stagger is an involution that fixes delta_0") {
  const LatticeGrid g(30);
  const LatticeField u = random_field(g, 3);
  CHECK(norm_l2(stagger(stagger(u)) - u) == 0.0);
  CHECK(norm_l2(stagger(LatticeField::delta(g, 0)) - LatticeField::delta(g, 0)) == 0.0);
}

TEST_CASE("stagger conjugation of the quadratic form") {
  const LatticeGrid g(60);
  const Potential V0 = Potential::zero(g);
  for (unsigned s = 0; s < 5; ++s) {
    const LatticeField u = random_field(g, s);
    const LatticeField su = stagger(u);
    const double lhs = inner_real(apply_H(su, V0), su);
    const double rhs = 4.0 * mass(u) - inner_real(apply_H(u, V0), u);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * mass(u));
  }
}

TEST_CASE("stagger maps the spectrum of -Delta+V to 4 minus the spectrum of -Delta-V") {
  const LatticeGrid g(40);
  const Potential V = Potential::two_site(g, 2.73, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> a(fixtures::dense_H(V), Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> b(fixtures::dense_H(negate(V)), Eigen::EigenvaluesOnly);
  const Eigen::Index n = a.eigenvalues().size();
  for (Eigen::Index k = 0; k < n; ++k) {
    CHECK(std::abs(b.eigenvalues()[n - 1 - k] - (4.0 - a.eigenvalues()[k])) < 1e-10);
  }
}

TEST_CASE("norms") {
  const LatticeGrid g(10);
  const LatticeField u = LatticeField::delta(g, 3, 2.0);
  CHECK(norm_sup(u) == 2.0);
  CHECK(norm_weighted(u, 2.0, -2.0) == doctest::Approx(2.0 / 10.0));
  CHECK(norm_exponential(u, 0.5) == doctest::Approx(2.0 * std::exp(1.5)));
}

TEST_CASE("grid mismatch is rejected") {
  CHECK_THROWS_AS(LatticeField(LatticeGrid(3)) + LatticeField(LatticeGrid(4)), GridMismatch);
}

TEST_CASE("field CSV round trip") {
  const LatticeGrid g(25);
  const LatticeField u = random_field(g, 11);
  const auto path = std::filesystem::temp_directory_path() / "dnls_field_roundtrip.csv";
  write_field_csv(path, u);
  const LatticeField v = read_field_csv(path);
  CHECK(v.grid() == g);
  CHECK(norm_l2(u - v) == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("potential helpers") {
  const LatticeGrid g(50);
  const Potential V = Potential::two_site(g, 2.0, 3);
  CHECK(V(3) == -2.0);
  CHECK(V(-3) == -2.0);
  CHECK(V.support_radius() == 3);
  CHECK(V.first_moment() == doctest::Approx(16.0));
  CHECK(V.tail_max() == 0.0);
  const Potential W = V.regrid(LatticeGrid(80));
  CHECK(W.grid().half_width() == 80);
  CHECK(W(3) == -2.0);
  CHECK(W.regrid(g) == V);
}
