import math

import numpy as np
import pytest
from scipy import integrate

from parosc.model import DriveSpec, Harmonic, PhysicalParams, Tabulated, TimeGrid
from parosc.moments import (GaussianState, MomentFunctionals, density_matrix, exp_moments,
                            functionals, marginalize, mean_trajectory, quadratic_form,
                            simulate)
from parosc.noise_kernels import build_noise_table, build_r
from parosc.propagator import XSolutions, assemble_vu, solve_r_fundamental
from parosc.spectral import build_matsubara, gamma_kernel

P = PhysicalParams(gammaTB=0.1, OmegaCutTB=10.0, betaTB=1.0)


def _vu(p, d, grid, k):
    s = solve_r_fundamental(p, d, gamma_kernel("total", p), grid)
    return assemble_vu(s, XSolutions(k, s.phi2, s.dphi2, s.phi1, s.dphi1))


@pytest.mark.parametrize("lam", [0.0, 1e-4, 3.0, 250.0])
def test_exp_moments_exact_for_linear_pieces(lam):
    s = np.linspace(0, 2, 21)
    v = np.cos(3 * s)
    got = exp_moments(v, s[1], [lam])[0]
    ref, _ = integrate.quad(lambda x: math.exp(-lam * x) * np.interp(x, s, v), 0, 2,
                            points=s[1:-1], limit=200, epsabs=1e-14)
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_r_tb_factored_matches_dense():
    grid = TimeGrid(2.0, 400)
    tab = build_matsubara(P, grid)
    vu = _vu(P, DriveSpec(), grid, 400)
    w = np.full(401, grid.h)
    w[[0, -1]] *= 0.5
    Rd = build_r(tab, P, grid, kernel=np.zeros(401))
    fn = functionals(vu, grid, P, DriveSpec(), tab, None)
    Rf = [[fn.r11, fn.r12], [fn.r12, fn.r22]]
    assert fn.c1p == pytest.approx(float((w * tab.c1) @ vu.v1), rel=1e-3)
    dense = [[(w * a) @ Rd @ (w * b) for b in (vu.v1, vu.v2)] for a in (vu.v1, vu.v2)]
    assert np.allclose(Rf, dense, rtol=1e-3, atol=1e-6)


def test_laser_functional_undamped_closed_form():
    p = PhysicalParams(gammaTB=0.0)
    E0, wd, t = 0.7, 1.6, 2.5
    grid = TimeGrid(t, 2500)
    d = DriveSpec(eLaser=Harmonic(E0, wd, 0.0))
    fn = functionals(_vu(p, d, grid, 2500), grid, p, d, None, None)
    ref, _ = integrate.quad(lambda s: E0 * math.cos(wd * s) * (
        math.cos(s) - math.cos(t) / math.sin(t) * math.sin(s)), 0, t, epsabs=1e-13)
    assert fn.eLp == pytest.approx(ref, abs=1e-6)


def test_all_functionals_vanish_without_coupling():
    p = PhysicalParams(gammaTB=0.0)
    grid = TimeGrid(2.0, 200)
    fn = functionals(_vu(p, DriveSpec(), grid, 200), grid, p, DriveSpec(),
                     build_matsubara(p), build_noise_table(p, grid))
    vals = [fn.c1p, fn.c1m, fn.c2p, fn.c2m, fn.c1tp, fn.c1tm, fn.eLp, fn.eLm,
            fn.r11, fn.r12, fn.r22]
    assert vals == [0.0] * len(vals)


def test_quadratic_form_symmetric():
    grid = TimeGrid(2.0, 200)
    tab = build_matsubara(P, grid)
    vu = _vu(P, DriveSpec(), grid, 150)
    fn = functionals(vu, grid, P, DriveSpec(), tab, build_noise_table(P, grid))
    A, _ = quadratic_form(vu, fn, P, tab)
    assert np.array_equal(A, A.T)


def test_read_off_roundtrip_at_zero_time_limit():
    # a factorised run returns to its initial state as t -> 0+
    g0 = GaussianState(0.3, -0.2, 0.7, 0.1, 0.6)
    tr = simulate(P, DriveSpec(), TimeGrid(0.05, 50, (1, 5, 50)), initial=g0)
    s = tr.states[0]
    for name in ("meanQ", "meanP", "sqq", "sqp", "spp"):
        assert getattr(s, name) == pytest.approx(getattr(g0, name), abs=5e-3)


def test_linear_response_scaling():
    grid = TimeGrid.every(3.0, 300, 100)
    runs = [simulate(P, DriveSpec(eLaser=Harmonic(a, 0.9, -math.pi / 2)), grid)
            for a in (0.1, 0.3)]
    for s1, s3 in zip(*(r.states for r in runs)):
        assert s3.meanQ == pytest.approx(3 * s1.meanQ, rel=1e-12, abs=1e-15)
        assert s3.meanP == pytest.approx(3 * s1.meanP, rel=1e-12, abs=1e-15)
        for name in ("sqq", "sqp", "spp"):
            assert getattr(s3, name) == pytest.approx(getattr(s1, name), rel=1e-12, abs=1e-15)


def test_mean_momentum_is_m_dq_dt():
    g = 0.2
    p = PhysicalParams(gammaTB=g, OmegaCutTB=math.inf)
    E = Harmonic(0.5, 0.8, -math.pi / 2)
    tr = mean_trajectory(p, DriveSpec(eLaser=E), TimeGrid.every(10.0, 10000, 1000))
    w1 = math.sqrt(1 - g * g / 4)

    def dgreen(x):
        return math.exp(-g * x / 2) * (math.cos(w1 * x) - g / (2 * w1) * math.sin(w1 * x))

    ref = [integrate.quad(lambda s: dgreen(t - s) * float(E(s)), 0, t, epsabs=1e-13)[0]
           for t in tr[:, 0]]
    assert np.abs(tr[:, 2] - ref).max() < 1e-4


def test_constant_force_steady_state():
    g, E0 = 0.5, 0.4
    p = PhysicalParams(gammaTB=g, OmegaCutTB=math.inf)
    ramp = Tabulated((0.0, 1e-3, 1e3), (0.0, E0, E0))
    tr = mean_trajectory(p, DriveSpec(eLaser=ramp), TimeGrid(20 / g, 4000, (4000,)))
    assert tr[-1, 1] == pytest.approx(E0, rel=1e-2)
    assert abs(tr[-1, 2]) < 1e-2 * E0


def test_first_moments_zero_without_laser():
    tr = simulate(P, DriveSpec(), TimeGrid.every(2.0, 200, 100))
    assert all(s.meanQ == 0 and s.meanP == 0 for s in tr.states)


def test_conventions_differ():
    grid = TimeGrid.every(2.0, 200, 200)
    a = simulate(P, DriveSpec(), grid).states[-1]
    b = simulate(P, DriveSpec(), grid, convention="printed").states[-1]
    assert abs(a.spp - b.spp) > 1e-3


def test_threads_do_not_change_output():
    grid = TimeGrid.every(2.0, 200, 20)
    d = DriveSpec(eLaser=Harmonic(0.2, 1.1, -math.pi / 2))
    a = simulate(P, d, grid)
    b = simulate(P, d, grid, workers=4)
    assert [vars(s) for s in a.states] == [vars(s) for s in b.states]


def test_turn_on_continuity():
    grid = TimeGrid(10.0, 1000, tuple(range(0, 11)))
    tr = simulate(P, DriveSpec(), grid)
    s0 = tr.states[0]
    for s in tr.states[1:]:
        assert abs(s.sqq / s0.sqq - 1) < 10 * grid.h
        assert abs(s.spp / s0.spp - 1) < 10 * grid.h


def test_marginalize_plain_gaussian():
    # a real 4d Gaussian with no coupling to (x', r') reduces to its own block
    A = np.diag([2.0, 3.0, 4.0, 5.0]).astype(complex)
    At, bt = marginalize(A, np.array([1.0, 0.5, 0, 0], dtype=complex))
    assert np.allclose(At, np.diag([2.0, 3.0])) and np.allclose(bt, [1.0, 0.5])


@pytest.fixture
def state():
    return GaussianState(0.4, -0.3, 0.8, 0.15, 0.9)


def test_density_matrix_normalised(state):
    r = state.meanQ + np.linspace(-6, 6, 2001) * math.sqrt(state.sqq)
    rho = density_matrix(state, r, [0.0])[:, 0]
    assert np.allclose(rho.imag, 0)
    assert np.trapezoid(rho.real, r) == pytest.approx(1.0, abs=1e-6)


def test_density_matrix_symmetric_about_mean(state):
    d = np.array([0.1, 0.5, 1.3])
    up = density_matrix(state, state.meanQ + d, [0.0])
    dn = density_matrix(state, state.meanQ - d, [0.0])
    assert np.allclose(up, dn, rtol=1e-14)


def test_density_matrix_coherence_width(state):
    x = np.linspace(0, 3, 31)
    rho = np.abs(density_matrix(state, [state.meanQ], x)[0])
    slope = np.polyfit(x ** 2, np.log(rho), 1)[0]
    width = 1.0 / math.sqrt(state.spp - state.sqp ** 2 / state.sqq)
    assert slope == pytest.approx(-0.5 / width ** 2, rel=1e-10)


def test_density_matrix_rejects_bad_state():
    with pytest.raises(ValueError):
        density_matrix(GaussianState(0, 0, -1.0, 0, 1.0), [0.0], [0.0])


def test_empty_functionals_default():
    assert MomentFunctionals(t=1.0).r12 == 0.0
