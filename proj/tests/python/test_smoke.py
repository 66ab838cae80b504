import json
import math

import numpy as np
import pytest

import dnls_lab as d


@pytest.fixture(scope="module")
def potential():
    return d.default_test_potential(300)


def test_single_site_eigenvalue():
    v = d.single_site_potential(400, 1.0)
    s = d.discrete_spectrum(v)
    expected = 2.0 - math.sqrt(5.0)
    assert len(s["eigenvalues"]) == 1
    assert abs(s["eigenvalues"][0] - expected) < 1e-9


def test_default_potential_spectrum(potential):
    s = d.discrete_spectrum(potential)
    assert len(s["eigenvalues"]) == 2
    phi = s["eigenfunctions"]
    assert np.allclose(phi.T @ phi, np.eye(2), atol=1e-12)
    assert max(s["residuals"]) < 1e-10


def test_classify_resonance_examples():
    assert d.classify_resonance(-3.0, -2.0)["N0"] == 4
    with pytest.raises(d.ValidationError):
        d.classify_resonance(-6.0, -1.0)
    assert not d.classify_resonance(-10.0, -5.2)["resonant"]


def test_gamma_routes_agree():
    g = d.gamma(d.default_test_potential(1000))
    assert g["N0"] == 4
    assert g["closed_form"] > 0
    assert abs(g["closed_form"] - g["oracle"]) <= 1e-3 * g["closed_form"]


def test_branch_shift_is_small(potential):
    b = d.continue_branch(1, 1e-2, 5, potential)
    assert not b["truncated"]
    assert abs(b["e_shift"][-1]) < 1e-6


def test_evolve_conserves_mass(potential):
    s = d.discrete_spectrum(potential)
    u0 = 0.1 * (s["eigenfunctions"][:, 0] + 0.5j * s["eigenfunctions"][:, 1])
    r = d.evolve(u0, potential, 0.01, 5.0, 100)
    assert r["max_mass_drift"] < 1e-11
    assert r["snapshots"].shape[0] == potential.size
    assert abs(d.mass(r["snapshots"][:, -1]) - d.mass(u0)) < 1e-11


def test_linear_propagation_is_unitary(potential):
    rng = np.random.default_rng(3)
    u0 = rng.normal(size=potential.size) + 1j * rng.normal(size=potential.size)
    u1 = d.propagate_linear(u0, 2.5, potential)
    assert abs(np.linalg.norm(u1) - np.linalg.norm(u0)) < 1e-10


def test_rate_rhs_balance():
    r1, r2 = d.rate_equations_rhs(0.07, 0.03, 2.5e-4, 4)
    assert r1 > 0 and r2 < 0
    assert abs(4 * r1 + 3 * r2) <= 1e-15 * abs(r1)


def test_decompose_recovers_amplitude(potential):
    s = d.discrete_spectrum(potential)
    u = 0.01 * s["eigenfunctions"][:, 0].astype(complex)
    st = d.decompose(u, potential)
    assert abs(st["z1"] - 0.01) < 1e-6
    assert abs(st["z2"]) < 1e-6


def test_find_test_potential():
    r = d.find_test_potential(4)
    assert r["N0"] == 4
    assert (r["v0"], r["d"]) == (2.73, 1)


def test_run_experiment_writes_manifest(tmp_path):
    cfg = {"experiment": "spectrum", "grid": {"N": 200}, "potential": {"kind": "single_site", "v0": 1.0}}
    m = d.run_experiment(cfg, str(tmp_path / "spec"))
    assert all(c["passed"] for c in m["criteria"])
    on_disk = json.loads((tmp_path / "spec" / "manifest.json").read_text())
    assert on_disk["experiment"] == "spectrum"


def test_run_experiment_rejects_bad_params(tmp_path):
    cfg = {"experiment": "simulate", "grid": {"N": 100}, "params": {"t_max": 1.0, "dt": -0.1}}
    with pytest.raises(d.ValidationError, match="dt"):
        d.run_experiment(cfg, str(tmp_path / "bad"))
    assert not (tmp_path / "bad").exists()
