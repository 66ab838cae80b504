#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "dnls/errors.hpp"
#include "dnls/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitValidation = 2;

struct Flags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 1;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice NLS experiments: spectra, bound states, resonance, dynamics."};
  app.set_version_flag("--version", dnls::kSoftwareVersion);
  app.require_subcommand(1);

  std::map<std::string, Flags> flags;
  for (const auto& name : dnls::experiment_names()) {
    auto* sub = app.add_subcommand(name, "Run the " + name + " experiment");
    Flags& f = flags[name];
    sub->add_option("--config", f.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "Output directory (overrides config.output)");
    sub->add_option("--seed", f.seed, "RNG seed for perturbations (overrides config.seed)");
    sub->add_option("--threads", f.threads, "Worker threads for parameter sweeps")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const Flags& f = flags.at(name);

  try {
    dnls::ExperimentConfig config = dnls::load_config(f.config);
    if (dnls::to_string(config.experiment) != name) {
      throw dnls::ValidationError("config.experiment is '" + std::string(dnls::to_string(config.experiment)) +
                                  "' but the subcommand is '" + name + "'");
    }
    dnls::RunOptions options;
    if (!f.out.empty()) options.out = f.out;
    if (sub->count("--seed")) options.seed = f.seed;
    options.threads = f.threads;
    const auto manifest = dnls::run_experiment(config, options);

    int failed = 0;
    for (const auto& c : manifest.at("criteria")) {
      std::printf("%s %s measured=%.6g tolerance=%s\n", c.at("passed").get<bool>() ? "PASS" : "FAIL",
                  c.at("name").get<std::string>().c_str(), c.at("measured").get<double>(),
                  c.at("tolerance").get<std::string>().c_str());
      failed += !c.at("passed").get<bool>();
    }
    std::printf("%s finished in %.2f s (%d of %zu checks failed)\n", name.c_str(),
                manifest.at("wall_time_s").get<double>(), failed, manifest.at("criteria").size());
    return kExitOk;
  } catch (const dnls::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const dnls::GridMismatch& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const dnls::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
