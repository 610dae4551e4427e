import math

import numpy as np
import pytest

from parosc.model import DriveSpec, GaussianPulse, Harmonic, NumericalError, PhysicalParams, TimeGrid
from parosc.oracles import laplace_drude_solution, markov_solution
from parosc.propagator import (XSolutions, assemble_vu, solve_r_fundamental, solve_x_fundamental)
from parosc.spectral import gamma_kernel


def _sols(p, d, n, tMax):
    grid = TimeGrid(tMax, n)
    return grid, solve_r_fundamental(p, d, gamma_kernel("total", p), grid)


def test_markov_second_order():
    p = PhysicalParams(gammaTB=0.2, OmegaCutTB=math.inf)
    errs = []
    for n in (200, 400, 800):
        grid, s = _sols(p, DriveSpec(), n, 10.0)
        errs.append(np.abs(s.phi1 - markov_solution(grid.s, 1.0, 0.2)[0]).max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(orders - 2) < 0.1)


def test_drude_vs_laplace():
    p = PhysicalParams(gammaTB=0.3, OmegaCutTB=5.0)
    grid, s = _sols(p, DriveSpec(), 2000, 10.0)
    ref = laplace_drude_solution(grid.s, 1.0, 0.3, 5.0)
    for got, want in zip((s.phi1, s.dphi1, s.phi2, s.dphi2), ref):
        assert np.abs(got - want).max() < 1e-4 * np.abs(want).max()


def test_wronskian_sign():
    p = PhysicalParams(gammaTB=0.1, OmegaCutTB=math.inf)
    grid, s = _sols(p, DriveSpec(omegaP2=Harmonic(0.3, 2.0, -math.pi / 2)), 4000, 10.0)
    W = s.dphi1 * s.phi2 - s.phi1 * s.dphi2
    assert W[0] == 1.0
    assert np.allclose(W, np.exp(-0.1 * grid.s), rtol=1e-5)


def test_halving_check_raises_on_coarse_grid():
    p = PhysicalParams(gammaTB=0.2, OmegaCutTB=10.0)
    grid = TimeGrid(10.0, 20)
    with pytest.raises(NumericalError):
        solve_r_fundamental(p, DriveSpec(), gamma_kernel("total", p), grid, check=True)


def test_x_solution_reuse_matches_direct_solve():
    p = PhysicalParams(gammaTB=0.2, OmegaCutTB=10.0)
    kern = gamma_kernel("total", p)
    grid, s = _sols(p, DriveSpec(), 400, 4.0)
    direct = solve_x_fundamental(300, p, DriveSpec(), kern, grid)
    reuse = XSolutions(300, s.phi2, s.dphi2, s.phi1, s.dphi1)
    a, b = assemble_vu(s, direct), assemble_vu(s, reuse)
    assert np.allclose(a.v1, b.v1, atol=1e-13) and np.allclose(a.v2, b.v2, atol=1e-13)


def test_vu_boundary_values():
    p = PhysicalParams(gammaTB=0.1, OmegaCutTB=10.0)
    d = DriveSpec(omegaP2=GaussianPulse(0.2, 2.0, 0.5))
    grid, s = _sols(p, d, 400, 4.0)
    xs = solve_x_fundamental(250, p, d, gamma_kernel("total", p), grid)
    vu = assemble_vu(s, xs)
    assert (vu.v1[0], vu.v1[-1], vu.v2[0], vu.v2[-1]) == pytest.approx((1, 0, 0, 1))
    assert (vu.u1[0], vu.u1[-1], vu.u2[0], vu.u2[-1]) == pytest.approx((1, 0, 0, 1))
    assert vu.du2_0 == pytest.approx(1.0 / vu.phi1_t)


def test_undamped_v_closed_form():
    p = PhysicalParams(gammaTB=0.0)
    grid, s = _sols(p, DriveSpec(), 2000, 2.0)
    vu = assemble_vu(s, XSolutions(2000, s.phi2, s.dphi2, s.phi1, s.dphi1))
    t = 2.0
    ref = np.cos(grid.s) - math.cos(t) / math.sin(t) * np.sin(grid.s)
    assert np.abs(vu.v1 - ref).max() < 1e-6


def test_caustic_named():
    p = PhysicalParams(gammaTB=0.0)
    grid, s = _sols(p, DriveSpec(), 1000, math.pi)
    with pytest.raises(NumericalError, match="caustic"):
        assemble_vu(s, XSolutions(1000, s.phi2, s.dphi2, s.phi1, s.dphi1), caustic_tol=1e-5)
