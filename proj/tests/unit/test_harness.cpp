#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"

using namespace dnls;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dnls_harness_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("experiment names round trip") {
  for (const auto& n : experiment_names()) CHECK(to_string(*experiment_from_string(n)) == n);
  CHECK_FALSE(experiment_from_string("nope").has_value());
}

TEST_CASE("config validation names the offending field") {
  auto message = [](const json& j) {
    try {
      parse_config(j);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message({{"experiment", "spectrum"}, {"colour", 1}}).find("config.colour") != std::string::npos);
  CHECK(message({{"grid", {{"N", 10}}}}).find("config.experiment") != std::string::npos);
  CHECK(message({{"experiment", "simulate"}, {"params", {{"dt", -0.01}, {"t_max", 1}}}}).find("params.dt") !=
        std::string::npos);
  CHECK(message({{"experiment", "simulate"}, {"params", {{"t_max", 1}, {"initial", {{"c3", 1}}}}}})
            .find("params.initial.c3") != std::string::npos);
  CHECK(message({{"experiment", "gamma"}, {"grid", {{"N", "big"}}}}).find("config.grid.N") != std::string::npos);
  CHECK(message({{"experiment", "decay"}, {"grid", {{"N", 100}}}, {"params", {{"t_max", 80}}}})
            .find("params.t_max") != std::string::npos);
  CHECK(message({{"experiment", "spectrum"}, {"potential", {{"kind", "custom"}, {"values", {1.0, 2.0}}}}})
            .find("values") != std::string::npos);
  CHECK(message({{"experiment", "spectrum"}}).empty());
}

TEST_CASE("malformed JSON reports the line") {
  const auto p = scratch("bad.json");
  std::ofstream(p) << "{\n  \"experiment\": \"spectrum\",\n  oops\n}\n";
  try {
    load_config(p);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::filesystem::remove(p);
}

TEST_CASE("spectrum experiment on the single-site well") {
  const auto out = scratch("spectrum");
  const ExperimentConfig c =
      parse_config({{"experiment", "spectrum"}, {"potential", {{"kind", "single_site"}, {"v0", 2.0}}}});
  const json m = run_experiment(c, {out});
  CHECK(m.at("schema") == 1);
  CHECK(m.at("software").at("version") == kSoftwareVersion);
  CHECK(m.at("results").at("eigenvalues")[0].get<double>() == doctest::Approx(-0.828427).epsilon(1e-6));
  CHECK(m.at("criteria")[0].at("passed") == true);
  CHECK(std::filesystem::exists(out / "manifest.json"));
  CHECK(std::filesystem::exists(out / "eigenfunction_1.csv"));
  std::filesystem::remove_all(out);
}

TEST_CASE("gamma experiment records both methods") {
  const auto out = scratch("gamma");
  const json m = run_experiment(parse_config({{"experiment", "gamma"}}), {out});
  const json& r = m.at("results");
  CHECK(r.at("N0") == 4);
  const double a = r.at("gamma_closed_form"), b = r.at("gamma_oracle"), gap = r.at("relative_gap");
  CHECK(gap == doctest::Approx(std::abs(a - b) / b));
  CHECK(gap <= 1e-5);
  std::filesystem::remove_all(out);
}

TEST_CASE("validation failures leave no output behind") {
  const auto out = scratch("invalid");
  ExperimentConfig c = parse_config({{"experiment", "gamma"}, {"potential", {{"kind", "single_site"}, {"v0", 1.0}}}});
  CHECK_THROWS_AS(run_experiment(c, {out}), ValidationError);
  CHECK_FALSE(std::filesystem::exists(out));
  c = parse_config({{"experiment", "simulate"}, {"params", {{"t_max", 1}}}});
  c.params["dt"] = -1.0;
  CHECK_THROWS_AS(run_experiment(c, {out}), ValidationError);
  CHECK_FALSE(std::filesystem::exists(out));
}

TEST_CASE("identical config and seed give identical CSV output") {
  const json cfg = {{"experiment", "simulate"},
                    {"grid", {{"N", 100}}},
                    {"params",
                     {{"dt", 0.01},
                      {"t_max", 2},
                      {"record_stride", 100},
                      {"initial", {{"c1", 0.1}, {"noise", 0.01}, {"noise_width", 5}}}}},
                    {"seed", 42}};
  const ExperimentConfig c = parse_config(cfg);
  const auto a = scratch("repro_a"), b = scratch("repro_b"), d = scratch("repro_c");
  run_experiment(c, {a});
  run_experiment(c, {b});
  RunOptions other{d};
  other.seed = 43;
  run_experiment(c, other);
  const std::string f = "trajectory/snapshot_000001.csv";
  CHECK(slurp(a / f) == slurp(b / f));
  CHECK(slurp(a / f) != slurp(d / f));
  const json tm = json::parse(slurp(a / "trajectory/manifest.json"));
  CHECK(tm.at("mass").size() == tm.at("times").size());
  CHECK(tm.at("energy").size() == tm.at("times").size());
  for (const auto& p : {a, b, d}) std::filesystem::remove_all(p);
}

TEST_CASE("test potential scan") {
  const TestPotentialResult r = find_test_potential(4);
  CHECK(r.params.v0 == kDefaultTestPotential.v0);
  CHECK(r.params.d == kDefaultTestPotential.d);
  CHECK(r.N0 == 4);
  CHECK(r.e2 < 0.0);
  const ResonanceReport check = classify_resonance(discrete_spectrum(Potential::two_site(LatticeGrid(500), r.params.v0, r.params.d)));
  CHECK(check.N0 == 4);
  const TestPotentialResult again = find_test_potential(4);
  CHECK(again.params.v0 == r.params.v0);
  CHECK(again.params.d == r.params.d);
  CHECK_THROWS_AS(find_test_potential(1), ValidationError);
  PotentialScan tiny;
  tiny.v0_lo = 0.5;
  tiny.v0_hi = 0.6;
  tiny.d_max = 1;
  CHECK_THROWS_AS(find_test_potential(4, tiny), NumericalError);
}

TEST_CASE("scan never returns a nonresonant configuration") {
  PotentialScan s;
  s.d_max = 2;
  for (int N0 : {2, 3}) {
    try {
      const TestPotentialResult r = find_test_potential(N0, s);
      CHECK(r.e1 < r.e2);
      CHECK(r.e2 < 0.0);
      CHECK(r.omega_star > 0.0);
      CHECK(r.omega_star < 4.0);
    } catch (const NumericalError&) {
    }
  }
}
