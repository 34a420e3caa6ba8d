import cmath
import json

import pytest

import pyslg


def test_conformal_map_basics():
    m = pyslg.ConformalMap(1.5, [(0.02 + 0.01j, 0.3 - 0.2j)])
    assert m.radius == 1.5
    w = 2.0 + 0.5j
    z = m.z(w)
    # finite-difference derivative agrees with dz
    h = 1e-6
    fd = (m.z(w + h) - m.z(w - h)) / (2 * h)
    assert abs(fd - m.dz(w)) < 1e-6
    assert abs(pyslg.invert_map(m, z) - w) < 1e-10


def test_map_rejects_singularity_outside_disk():
    with pytest.raises(pyslg.SlgError):
        pyslg.ConformalMap(1.0, [(0.1, 1.2 + 0j)])


def test_green_function_symmetry():
    m = pyslg.ConformalMap(1.1, [(0.02 + 0.01j, 0.3 - 0.1j)])
    z1, z2 = m.z(1.8), m.z(2.0 + 1.0j)
    g12 = pyslg.green_function(m, z1, z2)
    g21 = pyslg.green_function(m, z2, z1)
    assert abs(g12 - g21) < 1e-12
    assert g12 < 0.0


def test_harmonic_moments_circle():
    m = pyslg.ConformalMap(2.0, [])
    t0, tk, vk = pyslg.harmonic_moments(m, 512, 3)
    assert abs(t0 - 4.0) < 1e-12  # area / pi = r^2
    assert all(abs(t) < 1e-12 for t in tk)


def test_config_roundtrip_is_stable():
    cfg = json.dumps({
        "Q": 6.283185307179586, "nu": 1.0, "kappa": 6.0, "n_drivers": 1,
        "alphas": [0.3], "mode": "stochastic", "dt": 1e-5, "steps": 2,
        "grid_m": 64, "seed": 3,
    })
    once = pyslg.config_roundtrip(cfg)
    assert pyslg.config_roundtrip(once) == once


def test_run_simulation_deterministic_circle():
    cfg = json.dumps({
        "Q": 6.283185307179586, "nu": 1.0, "kappa": 0.0, "n_drivers": 0,
        "mode": "deterministic", "dt": 1e-2, "steps": 10, "grid_m": 64,
        "seed": 1,
    })
    out = pyslg.run_simulation(cfg)
    assert not out["aborted"]
    assert out["steps_completed"] == 10
    # exact law r(t) = sqrt(1 + Q t / pi) with Q = 2 pi
    assert abs(out["final_radius"] - (1.0 + 2 * out["final_t"]) ** 0.5) < 1e-10


def test_ensemble_verify_small():
    cfg = json.dumps({
        "Q": 6.283185307179586, "nu": 1.0, "kappa": 6.0, "n_drivers": 1,
        "alphas": [0.3],
        "initial_drivers": [[0.4330127018922193, 0.25]],
        "mode": "stochastic", "driver_mode": "literal_double", "seed": 7,
        "mcheck": {"n_paths": 8, "steps": 2, "dt": 4e-6, "grid_m": 64},
    })
    out = pyslg.ensemble_verify(cfg, "mean_M", 8)
    assert out["n_paths"] == 8
    assert out["max_abs_z"] < 10.0
    assert abs(out["mean"] - 1.0) < 0.5
