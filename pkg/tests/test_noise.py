import math

import numpy as np
import pytest

from parosc.model import PhysicalParams, PhysicsError, TimeGrid
from parosc.noise_kernels import (Regularization, build_noise_table, build_r, k_bb, k_tb_re,
                                  k_tb_re_quadrature, kernel_cell_average, noise_spectrum,
                                  noise_weights)
from parosc.spectral import build_matsubara

P = PhysicalParams(gammaTB=0.1, OmegaCutTB=10.0, betaTB=1.0)


def _dense(x, y, t, K, m=3001):
    f = np.linspace(0, t, m)
    s = np.linspace(0, t, x.size)
    xf, yf = np.interp(f, s, x), np.interp(f, s, y)
    w = np.full(m, f[1])
    w[[0, -1]] *= 0.5
    return (w * xf) @ K(f[:, None] - f[None, :]) @ (w * yf)


def test_weights_exact_for_smooth_kernel():
    grid = TimeGrid(3.0, 20)
    W = noise_weights(P, grid, spectrum=lambda w: np.exp(-np.asarray(w) ** 2))
    x, y = np.sin(grid.s) + grid.s, np.cos(2 * grid.s)
    ref = _dense(x, y, 3.0, lambda s: np.exp(-s ** 2 / 4) / (2 * math.sqrt(math.pi)))
    assert W.bilinear(x, y) == pytest.approx(ref, rel=1e-6)
    assert W.bilinear(x, y) == pytest.approx(W.bilinear(y, x), rel=1e-13)


def test_bilinear_is_linear():
    grid = TimeGrid(2.0, 50)
    W = noise_weights(P, grid, "TB")
    rng = np.random.default_rng(0)
    x, y, z = rng.normal(size=(3, 31))
    assert W.bilinear(x + 2 * z, y) == pytest.approx(W.bilinear(x, y) + 2 * W.bilinear(z, y))


def test_noise_form_positive():
    grid = TimeGrid(2.0, 80)
    W = noise_weights(P, grid, "TB")
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = rng.normal(size=81)
        assert W.bilinear(x, x) > 0


def test_k_tb_matsubara_vs_quadrature():
    tab = build_matsubara(P)
    s = np.array([0.02, 0.3, 1.5])
    got = k_tb_re(s, tab)
    ref = [k_tb_re_quadrature(x, P) for x in s]
    assert np.allclose(got, ref, rtol=1e-6)
    assert np.isinf(k_tb_re(0.0, tab)[0])


def test_weights_against_sampled_kernel():
    # two hat functions 2 apart: K smoothed by the hat autocorrelation
    grid = TimeGrid(4.0, 40)
    h = grid.h
    tab = build_matsubara(P)
    W = noise_weights(P, grid, "TB")
    x = np.zeros(41)
    y = np.zeros(41)
    x[30], y[10] = 1.0, 1.0
    sig = np.linspace(-2 * h, 2 * h, 801)
    a = np.abs(sig) / h
    spline = np.where(a < 1, 2 / 3 - a ** 2 + a ** 3 / 2, (2 - a) ** 3 / 6)  # hat * hat / h
    ref = h * np.trapezoid(k_tb_re(2.0 + sig, tab) * spline, sig)
    assert W.bilinear(x, y) == pytest.approx(ref, rel=1e-5)


def test_dense_r_converges_to_weights():
    # the sampled kernel is first order at the log-singular diagonal; the weights are exact
    gaps = []
    for n in (100, 200):
        grid = TimeGrid(2.0, n)
        tab = build_matsubara(P, grid)
        K = kernel_cell_average(P, grid, part="TB")
        R = build_r(tab, P, grid, kernel=K) - build_r(tab, P, grid, kernel=np.zeros_like(K))
        assert np.allclose(R, R.T)
        v = np.cos(grid.s)
        w = np.full(n + 1, grid.h)
        w[[0, -1]] *= 0.5
        gaps.append(build_noise_table(P, grid).r_k(v, v) - (w * v) @ R @ (w * v))
    assert 0 < gaps[1] < 0.6 * gaps[0]
    assert abs(gaps[1]) < 0.03


def test_bb_zero_point():
    p = PhysicalParams(gammaTB=0.0, bbEnabled=True, tauBB=1e-3, OmegaCutBB=10.0,
                       betaBB=math.inf)
    v = k_bb(0.0, p)
    assert v.thermal == 0.0 and v.vacuum > 0
    hot = k_bb(0.0, PhysicalParams(gammaTB=0.0, bbEnabled=True, tauBB=1e-3, betaBB=0.5))
    assert hot.thermal > 0


def test_bb_vacuum_grows_with_window():
    p = PhysicalParams(bbEnabled=True, tauBB=1e-3)
    a = noise_spectrum(50.0, p, "BBvac", Regularization(5.0))
    b = noise_spectrum(50.0, p, "BBvac", Regularization(10.0))
    assert b > a > 0


def test_markovian_noise_rejected():
    with pytest.raises(PhysicsError):
        build_noise_table(PhysicalParams(gammaTB=0.1, OmegaCutTB=math.inf), TimeGrid(1.0, 10))


def test_no_bath_no_noise():
    t = build_noise_table(PhysicalParams(gammaTB=0.0), TimeGrid(1.0, 10))
    assert t.weights == {} and t.r_k(np.ones(11), np.ones(11)) == 0
