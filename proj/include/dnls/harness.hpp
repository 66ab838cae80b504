#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnls/lattice.hpp"

namespace dnls {

inline constexpr const char* kSoftwareVersion = "0.1.0";
inline constexpr int kManifestSchema = 1;

struct TwoSiteParameters {
  double v0 = 0.0;
  int d = 1;
};

/// Output of find_test_potential(4) with the default scan, frozen so
/// acceptance runs need no scan.
inline constexpr TwoSiteParameters kDefaultTestPotential{2.73, 1};

struct PotentialScan {
  double v0_lo = 0.5;
  double v0_hi = 8.0;
  double v0_step = 0.01;
  int d_max = 6;
  int half_width = 200;
  double edge_margin = 0.1;  // every tabulated omega_n at least this far from {0,4}
};

struct TestPotentialResult {
  TwoSiteParameters params;
  double e1 = 0.0;
  double e2 = 0.0;
  int N0 = 0;
  double omega_star = 0.0;
  double xi_star = 0.0;
  int candidates = 0;
};

/// Two-site wells with exactly two eigenvalues and first resonance N0 ==
/// target_N0, minimizing |omega_{N0} - 2|; ties keep the first hit in (d, v0) order.
TestPotentialResult find_test_potential(int target_N0, const PotentialScan& scan = {});

Potential default_test_potential(const LatticeGrid& grid);

struct PotentialSpec {
  std::string kind = "default";  // default | zero | single_site | two_site | custom
  double v0 = 0.0;
  int d = 1;
  std::vector<double> values;    // custom: sites -M..M, zero-padded onto the grid
};

Potential build_potential(const PotentialSpec& spec, const LatticeGrid& grid);

enum class ExperimentKind {
  spectrum,
  bound_state,
  gamma,
  decay,
  simulate,
  equipartition,
  instability,
  reduced,
  rate_fit,
  find_potential
};

const char* to_string(ExperimentKind k);
std::optional<ExperimentKind> experiment_from_string(const std::string& s);
std::vector<std::string> experiment_names();

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::spectrum;
  int N = 1000;
  PotentialSpec potential;
  std::vector<double> lambda;
  nlohmann::json params = nlohmann::json::object();
  std::string output;
  std::uint64_t seed = 0;
  nlohmann::json raw;
};

/// Schema validation: unknown keys, wrong types and out-of-range values raise
/// ValidationError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::filesystem::path out;            // overrides config.output when set
  std::optional<std::uint64_t> seed;    // overrides config.seed
  int threads = 1;
};

/// Runs the experiment, writes CSVs and manifest.json under the output
/// directory and returns the manifest.
nlohmann::json run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace dnls
