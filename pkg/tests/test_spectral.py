import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parosc.model import PhysicalParams, PhysicsError
from parosc.oracles import fdt_equilibrium_variance
from parosc.spectral import (build_matsubara, c_sums, f_drude, gamma_kernel, j_bb, j_tb,
                             matsubara_freq, zeta_drude, zeta_quadrature)


def test_drude_density_value():
    p = PhysicalParams(gammaTB=0.1, OmegaCutTB=10.0)
    assert float(j_tb(1.0, p)) == pytest.approx(0.1 * 100 / 101, rel=1e-12)


def test_bb_density_uses_renormalised_mass():
    p = PhysicalParams(bbEnabled=True, tauBB=0.01, OmegaCutBB=10.0)
    w = 3.0
    assert float(j_bb(w, p)) == pytest.approx(p.M * 0.01 * 100 * w ** 3 / (100 + w * w))


def test_kernel_split():
    tb = gamma_kernel("TB", PhysicalParams(gammaTB=0.2, OmegaCutTB=math.inf))
    assert tb.localCoeff == 0.2 and tb.is_zero is False
    drude = gamma_kernel("TB", PhysicalParams(gammaTB=0.2, OmegaCutTB=5.0))
    assert drude.localCoeff == 0.0
    assert drude.smooth_integral() == pytest.approx(0.2)
    bb = gamma_kernel("BB", PhysicalParams(bbEnabled=True, tauBB=0.01, OmegaCutBB=10.0))
    assert bb.localCoeff == pytest.approx(0.01 * 100)


@pytest.mark.parametrize("s", [0.0, 0.05, 0.3, 1.0])
def test_zeta_closed_form_matches_quadrature(s):
    p = PhysicalParams(gammaTB=0.1, OmegaCutTB=10.0, betaTB=1.0)
    nu = float(matsubara_freq(1, p))
    assert zeta_drude(s, nu, 0.1, 10.0) == pytest.approx(zeta_quadrature(s, nu, p), rel=1e-9)


def test_zeta_continuous_through_degenerate_point():
    W = 10.0
    s = np.linspace(0, 2, 9)
    a = zeta_drude(s, W, 0.1, W)
    b = zeta_drude(s, W * (1 + 1e-7), 0.1, W)
    assert np.allclose(a, b, rtol=1e-6)
    assert np.all(np.isfinite(f_drude(s, W, 0.1, W)))


def test_zeta_large_nu_finite():
    assert np.isfinite(zeta_drude(np.array([0.0, 1.0, 50.0]), 1e6, 0.1, 10.0)).all()


def test_undamped_lambda():
    tab = build_matsubara(PhysicalParams(gammaTB=0.0, betaTB=2.0))
    assert tab.LambdaTB == pytest.approx(0.5 / math.tanh(1.0), rel=1e-9)
    assert tab.OmegaEq == pytest.approx(0.5 / math.tanh(1.0), rel=1e-9)


@settings(max_examples=8, deadline=None)
@given(gamma=st.floats(0.01, 0.5), Omega=st.floats(3.0, 20.0), beta=st.floats(0.1, 5.0))
def test_matsubara_matches_fdt(gamma, Omega, beta):
    p = PhysicalParams(gammaTB=gamma, OmegaCutTB=Omega, betaTB=beta)
    tab = build_matsubara(p)
    qq, pp = fdt_equilibrium_variance(1.0, 1.0, gamma, Omega, beta)
    assert tab.LambdaTB == pytest.approx(qq, rel=1e-7)
    assert tab.OmegaEq == pytest.approx(pp, rel=1e-7)


def test_tail_correction_matters():
    p = PhysicalParams(gammaTB=0.1, OmegaCutTB=10.0)
    ref = build_matsubara(p).LambdaTB
    raw = build_matsubara(p, nTerms=512, tail=False).LambdaTB
    tailed = build_matsubara(p, nTerms=512).LambdaTB
    assert abs(tailed - ref) < 1e-3 * abs(raw - ref)


def test_c_functions_doubling():
    p = PhysicalParams(gammaTB=0.1, OmegaCutTB=10.0)
    s = np.linspace(0, 5, 51)
    t1 = build_matsubara(p)
    t2 = build_matsubara(p, nTerms=2 * t1.nTerms)
    for a, b in zip(c_sums(t1, s), c_sums(t2, s)):
        assert np.abs(a - b).max() < 1e-7 * np.abs(a).max()


def test_c1_at_zero_normalisation():
    # C_1(0) Lambda hbar beta = u0 gamma Omega + 2 sum u_n g_n(0)
    p = PhysicalParams(gammaTB=0.0)
    c1, c2 = c_sums(build_matsubara(p), np.array([0.0, 1.0]))
    assert np.all(c1 == 0) and np.all(c2 == 0)


def test_markovian_matsubara_rejected():
    with pytest.raises(PhysicsError):
        build_matsubara(PhysicalParams(gammaTB=0.1, OmegaCutTB=math.inf))
