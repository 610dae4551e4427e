import math

import numpy as np
import pytest

from parosc import oracles


def test_laplace_residues_vs_matrix_exponential():
    s = np.linspace(0, 8, 33)
    a = oracles.laplace_drude_solution(s, 1.0, 0.2, 10.0)
    b = oracles._companion_solution(s, 1.0, 0.2, 10.0)
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-12)


def test_laplace_approaches_markov_for_large_cutoff():
    s = np.linspace(0, 5, 21)
    phi1, _, phi2, _ = oracles.laplace_drude_solution(s, 1.0, 0.1, 1e4)
    m1, m2 = oracles.markov_solution(s, 1.0, 0.1)
    assert np.abs(phi1 - m1).max() < 1e-3
    # the memory kernel's initial slip leaves r'(0+) = -gamma in the Markov limit
    assert np.abs(phi2 - (m2 - 0.1 * m1)).max() < 1e-3


def test_driven_response_steady_amplitude():
    E0, wd, g = 0.5, 0.8, 0.5
    t = np.linspace(60, 60 + 2 * math.pi / wd, 40)
    q = oracles.classical_driven_response(t, lambda s: E0 * math.sin(wd * s), 1.0, 1.0, g)
    assert np.abs(q).max() == pytest.approx(oracles.steady_amplitude(E0, 1.0, 1.0, g, wd), rel=1e-2)


def test_fdt_weak_coupling_limit():
    qq, pp = oracles.fdt_equilibrium_variance(1.0, 1.0, 1e-5, 10.0, 1.0)
    u = oracles.undamped_variance(1.0, 1.0, 1.0)
    assert qq == pytest.approx(u[0], rel=1e-5)
    assert pp == pytest.approx(u[1], rel=1e-4)


def test_floquet_without_drive_is_damping():
    mu = oracles.floquet_multiplier(1.0, 0.1, 0.0, 2.0)
    assert mu == pytest.approx(math.exp(-0.1 * math.pi / 2), rel=1e-9)


def test_tongue_boundary_near_small_damping_estimate():
    # first tongue of w^2 = 1 + A sin(2 s): threshold A ~ 2 gamma
    assert oracles.tongue_boundary(1.0, 0.05, 2.0, tol=1e-5) == pytest.approx(0.1, rel=0.05)


def test_report_line():
    r = oracles.compare("x", [1.0], [1.0 + 1e-9], 1e-6)
    assert r.passed and r.line().startswith("PASS")
