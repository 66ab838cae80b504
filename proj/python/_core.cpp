#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dnls/bound_states.hpp"
#include "dnls/dynamics.hpp"
#include "dnls/harness.hpp"
#include "dnls/modulation.hpp"
#include "dnls/reduced_model.hpp"
#include "dnls/resonance.hpp"
#include "dnls/spectral.hpp"

namespace py = pybind11;
using namespace dnls;

namespace {

// Potentials cross the boundary as arrays of length 2N+1 over sites -N..N.
Potential to_potential(const Eigen::VectorXd& v) {
  if (v.size() < 3 || v.size() % 2 == 0) throw ValidationError("potential must have odd length 2N+1 >= 3");
  return Potential(LatticeGrid(static_cast<int>(v.size() / 2)), v);
}

LatticeField to_field(const Eigen::VectorXcd& u, const LatticeGrid& grid) {
  if (u.size() != grid.size()) throw GridMismatch("field length does not match the potential");
  return LatticeField(grid, u);
}

py::dict spectrum_dict(const SpectralData& s) {
  Eigen::MatrixXd phi(s.grid.size(), static_cast<Eigen::Index>(s.count()));
  for (std::size_t j = 0; j < s.count(); ++j) phi.col(static_cast<Eigen::Index>(j)) = s.eigenfunctions[j];
  py::dict d;
  d["eigenvalues"] = s.eigenvalues;
  d["eigenfunctions"] = phi;
  d["residuals"] = s.residuals;
  d["decay_rates"] = s.decay_rates;
  d["band_margin"] = s.band_margin;
  d["warnings"] = s.warnings;
  return d;
}

py::dict resonance_dict(const ResonanceReport& r) {
  py::dict d;
  d["e1"] = r.e1;
  d["e2"] = r.e2;
  d["resonant"] = r.resonant();
  d["N0"] = r.N0;
  d["omega_star"] = r.omega_star;
  d["xi_star"] = r.xi_star;
  d["omega_table"] = r.omega_table;
  return d;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Lattice NLS core bindings";
  m.attr("__version__") = kSoftwareVersion;

  static py::exception<ValidationError> validation(m, "ValidationError", PyExc_ValueError);
  static py::exception<NumericalError> numerical(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      PyErr_SetString(validation.ptr(), e.what());
    } catch (const GridMismatch& e) {
      PyErr_SetString(validation.ptr(), e.what());
    } catch (const NumericalError& e) {
      PyErr_SetString(numerical.ptr(), e.what());
    }
  });

  m.def("single_site_potential", [](int N, double v0) { return Potential::single_site(LatticeGrid(N), v0).values(); },
        py::arg("N"), py::arg("v0"), "V = -v0 delta_0 on sites -N..N.");
  m.def("two_site_potential",
        [](int N, double v0, int d) { return Potential::two_site(LatticeGrid(N), v0, d).values(); }, py::arg("N"),
        py::arg("v0"), py::arg("d"), "V = -v0 (delta_{-d} + delta_d) on sites -N..N.");
  m.def("default_test_potential", [](int N) { return default_test_potential(LatticeGrid(N)).values(); },
        py::arg("N"));

  m.def("discrete_spectrum", [](const Eigen::VectorXd& v) { return spectrum_dict(discrete_spectrum(to_potential(v))); },
        py::arg("potential"));

  m.def("classify_resonance",
        [](double e1, double e2, std::pair<int, int> n_range) { return resonance_dict(classify_resonance(e1, e2, n_range)); },
        py::arg("e1"), py::arg("e2"), py::arg("n_range") = std::pair<int, int>{-10, 10});

  m.def(
      "gamma",
      [](const Eigen::VectorXd& v) {
        const Potential V = to_potential(v);
        const SpectralData s = discrete_spectrum(V);
        const ResonanceReport r = classify_resonance(s);
        if (!r.resonant()) throw ValidationError("gamma: nonresonant potential");
        const InteractionProfile G = leading_G(s, r.N0);
        const GammaOracle o = gamma_oracle(G, r, V);
        py::dict d = resonance_dict(r);
        d["closed_form"] = gamma_closed_form(G, r, V);
        d["oracle"] = o.gamma;
        d["oracle_error_estimate"] = o.error_estimate;
        return d;
      },
      py::arg("potential"), "Closed-form and limiting-absorption Gamma for the leading G.");

  m.def(
      "continue_branch",
      [](int j, double rho_max, int n_steps, const Eigen::VectorXd& v, std::vector<double> lambda) {
        const Potential V = to_potential(v);
        const BoundStateBranch b =
            continue_branch(j, rho_max, n_steps, V, NonlinearityCoefficients(std::move(lambda)), discrete_spectrum(V));
        std::vector<double> qn;
        for (const auto& q : b.q_profiles) qn.push_back(q.norm());
        py::dict d;
        d["rho"] = b.rho_samples;
        d["e_shift"] = b.e_shift;
        d["q_norm"] = qn;
        d["residuals"] = b.residuals;
        d["truncated"] = b.truncated;
        d["truncation_reason"] = b.truncation_reason;
        return d;
      },
      py::arg("j"), py::arg("rho_max"), py::arg("n_steps"), py::arg("potential"),
      py::arg("lam") = std::vector<double>{});

  m.def(
      "evolve",
      [](const Eigen::VectorXcd& u0, const Eigen::VectorXd& v, double dt, double t_max, int record_stride,
         std::vector<double> lambda, int absorber_width, double absorber_strength) {
        const Potential V = to_potential(v);
        IntegratorConfig c;
        c.dt = dt;
        c.t_max = t_max;
        c.record_stride = record_stride;
        if (absorber_width > 0) c.absorber = Absorber{absorber_width, absorber_strength};
        TrajectoryRecord rec;
        {
          py::gil_scoped_release release;
          rec = run(to_field(u0, V.grid()), c, V, NonlinearityCoefficients(std::move(lambda)));
        }
        Eigen::MatrixXcd snaps(V.grid().size(), static_cast<Eigen::Index>(rec.snapshots.size()));
        for (std::size_t k = 0; k < rec.snapshots.size(); ++k) snaps.col(static_cast<Eigen::Index>(k)) = rec.snapshots[k].values();
        py::dict d;
        d["times"] = rec.times;
        d["snapshots"] = snaps;
        d["mass"] = rec.mass_series;
        d["energy"] = rec.energy_series;
        d["max_mass_drift"] = rec.max_mass_drift;
        d["max_energy_drift"] = rec.max_energy_drift;
        return d;
      },
      py::arg("u0"), py::arg("potential"), py::arg("dt"), py::arg("t_max"), py::arg("record_stride") = 200,
      py::arg("lam") = std::vector<double>{}, py::arg("absorber_width") = 0, py::arg("absorber_strength") = 0.5,
      "Strang split-step evolution; snapshots are columns.");

  m.def(
      "propagate_linear",
      [](const Eigen::VectorXcd& u0, double t, const Eigen::VectorXd& v) {
        const Potential V = to_potential(v);
        return propagate_linear(to_field(u0, V.grid()), t, V).values();
      },
      py::arg("u0"), py::arg("t"), py::arg("potential"));

  m.def(
      "decompose",
      [](const Eigen::VectorXcd& u, const Eigen::VectorXd& v, double rho_max) {
        const Potential V = to_potential(v);
        const SpectralData s = discrete_spectrum(V);
        const BranchPair br{continue_branch(1, rho_max, 25, V, {}, s), continue_branch(2, rho_max, 25, V, {}, s)};
        const ModulationState st = decompose(to_field(u, V.grid()), br, s);
        py::dict d;
        d["z1"] = st.z1;
        d["z2"] = st.z2;
        d["eta"] = st.eta.values();
        return d;
      },
      py::arg("u"), py::arg("potential"), py::arg("rho_max") = 1e-2,
      "Splits u into phi_1(z1) + phi_2(z2) + eta with cubic nonlinearity.");

  m.def(
      "mass", [](const Eigen::VectorXcd& u) { return u.squaredNorm(); }, py::arg("u"));
  m.def(
      "energy",
      [](const Eigen::VectorXcd& u, const Eigen::VectorXd& v, std::vector<double> lambda) {
        const Potential V = to_potential(v);
        return energy(to_field(u, V.grid()), V, NonlinearityCoefficients(std::move(lambda)));
      },
      py::arg("u"), py::arg("potential"), py::arg("lam") = std::vector<double>{});

  m.def("rate_equations_rhs", &rate_equations_rhs, py::arg("z1"), py::arg("z2"), py::arg("gamma"), py::arg("N0"));

  m.def(
      "find_test_potential",
      [](int target_N0) {
        const TestPotentialResult r = find_test_potential(target_N0);
        py::dict d;
        d["v0"] = r.params.v0;
        d["d"] = r.params.d;
        d["e1"] = r.e1;
        d["e2"] = r.e2;
        d["N0"] = r.N0;
        d["omega_star"] = r.omega_star;
        d["xi_star"] = r.xi_star;
        return d;
      },
      py::arg("target_N0") = 4);

  m.def(
      "run_experiment",
      [](const py::object& config, const std::string& out, std::optional<std::uint64_t> seed, int threads) {
        const ExperimentConfig c = parse_config(py_to_json(config));
        RunOptions o;
        o.out = out;
        o.seed = seed;
        o.threads = threads;
        nlohmann::json manifest;
        {
          py::gil_scoped_release release;
          manifest = run_experiment(c, o);
        }
        return json_to_py(manifest);
      },
      py::arg("config"), py::arg("out") = "", py::arg("seed") = py::none(), py::arg("threads") = 1,
      "Runs a config dict as the CLI would and returns the manifest.");
}
