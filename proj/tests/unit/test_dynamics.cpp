#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dnls/dynamics.hpp"
#include "fixtures.hpp"

using namespace dnls;
using fixtures::random_field;

TEST_CASE("tiny data: one step is the linear propagator") {
  const Potential& V = fixtures::potential();
  const LatticeField u0 = random_field(V.grid(), 4, 20) * 1e-5;
  const LatticeField a = step(u0, 0.005, V, {});
  const LatticeField b = propagate_linear(u0, 0.005, V);
  CHECK(norm_l2(a - b) <= 1e-12 * norm_l2(u0));
}

TEST_CASE("Taylor stepper matches the dense propagator") {
  const Potential& V = fixtures::potential();
  const TaylorLinearStepper T(V);
  const LatticeField u0 = random_field(V.grid(), 8, 40);
  Eigen::VectorXcd u = u0.values();
  for (int k = 0; k < 100; ++k) T.apply(u, 0.05);
  CHECK((u - propagate_linear(u0, 5.0, V).values()).norm() <= 1e-11 * norm_l2(u0));
  Eigen::VectorXcd w = u0.values();
  T.apply(w, 3.0);
  CHECK((w - propagate_linear(u0, 3.0, V).values()).norm() <= 1e-11 * norm_l2(u0));
}

TEST_CASE("nonlinear substep is a pure phase rotation") {
  const LatticeGrid g(20);
  const SplitStepIntegrator s(Potential::zero(g), NonlinearityCoefficients({0.2}), 0.01);
  Eigen::VectorXcd u = LatticeField::delta(g, 0, cplx(0.6, 0.3)).values();
  const double before = std::abs(u[g.index(0)]);
  s.nonlinear_phase(u, 0.01);
  CHECK(std::abs(u[g.index(0)]) == doctest::Approx(before).epsilon(1e-15));
  const double s0 = std::norm(cplx(0.6, 0.3));
  const cplx expected = cplx(0.6, 0.3) * std::exp(cplx(0, -0.01 * (s0 * s0 * s0 + 0.2 * std::pow(s0, 4))));
  CHECK(std::abs(u[g.index(0)] - expected) < 1e-15);
}

TEST_CASE("zero data stays zero") {
  IntegratorConfig c;
  c.t_max = 10;
  c.record_stride = 500;
  const TrajectoryRecord r = run(LatticeField(fixtures::grid()), c, fixtures::potential(), {});
  for (const auto& s : r.snapshots) CHECK(norm_l2(s) == 0.0);
}

TEST_CASE("mass and energy are conserved without an absorber") {
  const Potential& V = fixtures::potential();
  const SpectralData& s = fixtures::spectrum();
  const LatticeField u0 = (s.eigenfunction(0) + s.eigenfunction(1)) * (0.1 / std::sqrt(2.0));
  IntegratorConfig c;
  c.dt = 0.005;
  c.t_max = 100;
  c.record_stride = 2000;
  c.store_snapshots = false;
  const TrajectoryRecord r = run(u0, c, V, {});
  CHECK(r.steps == 20000);
  CHECK(r.max_mass_drift <= 1e-11);
  CHECK(r.max_energy_drift <= 1e-8);
  CHECK(r.times.back() == doctest::Approx(100.0));
}

TEST_CASE("halving dt reduces the error fourfold") {
  const SpectralData& s = fixtures::spectrum();
  const LatticeField u0 = (s.eigenfunction(0) + s.eigenfunction(1)) * 0.5;
  const ConvergenceRatio cr = dt_refinement_ratio(u0, 0.02, 20.0, fixtures::potential(), {});
  CHECK(cr.ratio >= 3.5);
  CHECK(cr.ratio <= 4.5);
}

TEST_CASE("gauge equivariance and time reversal") {
  const Potential& V = fixtures::potential();
  const LatticeField u0 = random_field(V.grid(), 31, 10) * 0.3;
  IntegratorConfig c;
  c.dt = 0.01;
  c.t_max = 5;
  c.record_stride = 100;
  const cplx g = std::polar(1.0, 0.77);
  const TrajectoryRecord a = run(u0, c, V, {});
  const TrajectoryRecord b = run(u0 * g, c, V, {});
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    CHECK(norm_l2(b.snapshots[k] - a.snapshots[k] * g) <= 1e-12 * norm_l2(u0));
  }

  const SplitStepIntegrator s(V, {}, 0.01);
  Eigen::VectorXcd u = u0.values();
  for (int k = 0; k < 50; ++k) s.step(u, 0.01);
  for (int k = 0; k < 50; ++k) s.step(u, -0.01);
  CHECK((u - u0.values()).norm() <= 1e-12 * norm_l2(u0));
}

TEST_CASE("advance equals repeated steps") {
  const Potential& V = fixtures::potential();
  const LatticeField u0 = random_field(V.grid(), 2, 10) * 0.3;
  const SplitStepIntegrator s(V, {}, 0.01);
  Eigen::VectorXcd a = u0.values(), b = u0.values();
  s.advance(a, 40);
  for (int k = 0; k < 40; ++k) s.step(b);
  CHECK((a - b).norm() <= 1e-13 * norm_l2(u0));
}

TEST_CASE("absorber removes outgoing mass") {
  const LatticeGrid g(200);
  const Potential V = Potential::zero(g);
  IntegratorConfig c;
  c.dt = 0.05;
  c.t_max = 1000;
  c.record_stride = 500;
  c.absorber = Absorber{40, 0.5};
  const TrajectoryRecord r = run(LatticeField::delta(g, 0), c, V, {});
  // Only waves with group velocity 2|sin xi| < 0.16 are still inside.
  CHECK(r.mass_series.back() < 0.1);
  for (std::size_t k = 1; k < r.mass_series.size(); ++k) CHECK(r.mass_series[k] <= r.mass_series[k - 1] + 1e-13);
  CHECK(r.absorbed_mass_series.back() == doctest::Approx(1.0 - r.mass_series.back()));
}

TEST_CASE("integrator validation") {
  const LatticeGrid g(100);
  IntegratorConfig c;
  c.dt = -0.01;
  c.t_max = 1;
  CHECK_THROWS_AS(c.validate(g), ValidationError);
  c.dt = 0.01;
  c.absorber = Absorber{30, 0.5};
  CHECK_THROWS_AS(c.validate(g), ValidationError);
  c.absorber = Absorber{20, 0.5};
  CHECK_NOTHROW(c.validate(g));
}

TEST_CASE("non-finite states are reported") {
  const LatticeGrid g(20);
  LatticeField u(g);
  u.at(0) = cplx(std::numeric_limits<double>::quiet_NaN(), 0);
  IntegratorConfig c;
  c.t_max = 1;
  CHECK_THROWS_AS(run(u, c, Potential::zero(g), {}), NumericalError);
}

TEST_CASE("trajectory output") {
  const LatticeGrid g(30);
  IntegratorConfig c;
  c.dt = 0.01;
  c.t_max = 1;
  c.record_stride = 25;
  const TrajectoryRecord r = run(LatticeField::delta(g, 0, 0.5), c, Potential::single_site(g, 1.0), {});
  const auto dir = std::filesystem::temp_directory_path() / "dnls_traj_test";
  std::filesystem::remove_all(dir);
  write_trajectory(dir, r);
  std::ifstream is(dir / "manifest.json");
  const auto j = nlohmann::json::parse(is);
  CHECK(j.at("schema") == 1);
  CHECK(j.at("times").size() == r.times.size());
  CHECK(j.at("mass").size() == r.times.size());
  CHECK(j.at("energy").size() == r.times.size());
  for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%06zu.csv", k);
    CHECK(norm_l2(read_field_csv(dir / name) - r.snapshots[k]) == 0.0);
  }
  std::filesystem::remove_all(dir);
}
