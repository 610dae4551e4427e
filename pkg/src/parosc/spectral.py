"""Spectral densities, damping kernels and Matsubara coefficients.

The thermal bath is Drude-regularised Ohmic,
``J_TB(w) = m gamma w Omega^2 / (Omega^2 + w^2)``, with damping kernel
``gamma(s) = gamma Omega exp(-Omega |s|)``.  All Matsubara quantities are
closed-form in that case; ``zeta_quadrature`` evaluates the defining
frequency integral for any spectral density and is used as a cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .model import NumericalError, PhysicalParams, PhysicsError, TimeGrid

_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def j_tb(omega, p: PhysicalParams):
    w = np.asarray(omega, dtype=float)
    if p.markovian:
        return p.m * p.gammaTB * w
    W2 = p.OmegaCutTB ** 2
    return p.m * p.gammaTB * w * W2 / (W2 + w * w)


def bb_mass(p: PhysicalParams) -> float:
    x = p.tauBB * p.OmegaCutBB
    if x >= 1.0:
        raise PhysicsError("tauBB*OmegaCutBB >= 1: bare mass negative / causality bound violated")
    return p.m / (1.0 - x)


def j_bb(omega, p: PhysicalParams):
    w = np.asarray(omega, dtype=float)
    M = bb_mass(p)
    W2 = p.OmegaCutBB ** 2
    return M * p.tauBB * w ** 3 * W2 / (W2 + w * w)


@dataclass(frozen=True)
class DampingKernelSplit:
    """``gamma(s) = 2 localCoeff delta(s) + sum_k amp_k exp(-rate_k |s|)``."""

    localCoeff: float = 0.0
    amps: tuple = ()
    rates: tuple = ()

    def smooth(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        out = np.zeros_like(s)
        for a, r in zip(self.amps, self.rates):
            out = out + a * np.exp(-r * s)
        return out

    def smooth_integral(self) -> float:
        """Integral of the smooth part over (0, inf)."""
        return float(sum(a / r for a, r in zip(self.amps, self.rates)))

    def __add__(self, other: "DampingKernelSplit") -> "DampingKernelSplit":
        return DampingKernelSplit(self.localCoeff + other.localCoeff,
                                  self.amps + other.amps, self.rates + other.rates)

    @property
    def is_zero(self) -> bool:
        return self.localCoeff == 0.0 and not any(self.amps)


def gamma_kernel(which: str, p: PhysicalParams) -> DampingKernelSplit:
    """Closed-form damping kernel split for ``which`` in {"TB", "BB", "total"}."""
    which = which.upper()
    if which == "TOTAL":
        return gamma_kernel("TB", p) + gamma_kernel("BB", p)
    if which == "TB":
        if p.gammaTB == 0.0:
            return DampingKernelSplit()
        if p.markovian:
            return DampingKernelSplit(localCoeff=p.gammaTB)
        W = p.OmegaCutTB
        return DampingKernelSplit(0.0, (p.gammaTB * W,), (W,))
    if which == "BB":
        if not p.bb_active:
            return DampingKernelSplit()
        W = p.OmegaCutBB
        return DampingKernelSplit(p.tauBB * W * W, (-p.tauBB * W ** 3,), (W,))
    raise ValueError(f"unknown kernel {which!r}")


# --- Drude Matsubara closed forms -------------------------------------------------

def _ediff(nu, W, s):
    """(exp(-W s) - exp(-nu s)) / (W - nu), finite at nu = W."""
    nu, s = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(s, dtype=float))
    d = W - nu
    small = np.abs(d * s) < 1e-6
    safe_d = np.where(small, 1.0, d)
    direct = (np.exp(-W * s) - np.exp(-nu * s)) / safe_d
    series = np.exp(-nu * s) * (-s + 0.5 * d * s * s)
    return np.where(small, series, direct)


def zeta_drude(s, nu, gamma, Omega):
    """zeta_n(s) for the Drude bath, ``nu = |nu_n|``; broadcasts over s and nu."""
    s = np.abs(np.asarray(s, dtype=float))
    nu = np.abs(np.asarray(nu, dtype=float))
    pref = gamma * Omega * Omega * nu / (Omega + nu)
    return pref * (np.exp(-nu * s) / Omega - (nu / Omega) * _ediff(nu, Omega, s))


def f_drude(s, nu, gamma, Omega):
    """f_n(s) = -(1/nu_n) d zeta_n/ds for nu_n > 0."""
    s = np.asarray(s, dtype=float)
    nu = np.asarray(nu, dtype=float)
    pref = gamma * Omega * Omega * nu / (Omega + nu)
    return -pref * _ediff(nu, Omega, np.abs(s)) * np.sign(s)


def zeta_quadrature(s: float, nu: float, p: PhysicalParams, jfun=j_tb) -> float:
    """Direct quadrature of (1/m) int dw/pi J(w)/w * 2 nu^2/(w^2+nu^2) cos(w s)."""
    def g(w):
        return jfun(w, p) / w / p.m * 2 * nu * nu / (w * w + nu * nu) / math.pi if w > 0 else \
            p.gammaTB * 2 / math.pi

    if s == 0.0:
        val, _ = integrate.quad(g, 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500)
        return val
    val, _ = integrate.quad(g, 0, np.inf, weight="cos", wvar=s, epsabs=1e-13, limit=500,
                            limlst=200)
    return val


def matsubara_freq(n, p: PhysicalParams):
    return 2.0 * math.pi * np.asarray(n, dtype=float) / (p.hbar * p.betaTB)


def _tail(fun, N: int):
    """Euler-Maclaurin estimate of sum_{n>N} fun(n) for a smooth decaying summand.

    ``fun`` accepts a 1-D array of real n and returns an array whose first axis
    is n.  Midpoint-integral form with the first derivative correction; the
    integral runs over y = 1/n with Gauss-Legendre nodes.
    """
    X = N + 0.5
    y = 0.5 * (_GL_X + 1.0) / X
    w = 0.5 * _GL_W / X
    vals = fun(1.0 / y)
    vals = vals / (y * y).reshape((-1,) + (1,) * (vals.ndim - 1))
    integral = np.tensordot(w, vals, axes=(0, 0))
    d = 0.25
    ends = fun(np.array([X - d, X + d]))
    deriv = (ends[1] - ends[0]) / (2 * d)
    return integral - deriv / 24.0


@dataclass
class MatsubaraTable:
    """Matsubara data for the non-factorised thermal initial state.

    Arrays over n run from 1 to ``nTerms``; the n = 0 term (nu_0 = 0,
    zeta_0 = 0, u_0 = 1/omega0^2) and the symmetric negative-n terms are
    folded into every sum.
    """

    p: PhysicalParams
    nu: np.ndarray
    zeta0: np.ndarray
    uN: np.ndarray
    LambdaTB: float
    OmegaEq: float
    nTerms: int
    tailApplied: bool
    tol: float
    s: np.ndarray = field(repr=False, default=None)
    c1: np.ndarray = field(repr=False, default=None)
    c2: np.ndarray = field(repr=False, default=None)

    @property
    def u0(self) -> float:
        return 1.0 / self.p.omega0 ** 2

    def zeta(self, s, n):
        p = self.p
        return zeta_drude(s, matsubara_freq(n, p), p.gammaTB, p.OmegaCutTB)

    def g(self, s, n):
        p = self.p
        gs = p.gammaTB * p.OmegaCutTB * np.exp(-p.OmegaCutTB * np.abs(np.asarray(s, float)))
        return gs - self.zeta(s, n)

    def f(self, s, n):
        p = self.p
        return f_drude(s, matsubara_freq(n, p), p.gammaTB, p.OmegaCutTB)

    @property
    def zetaS(self):
        return self.zeta(self.s[None, :], np.arange(1, self.nTerms + 1)[:, None])

    @property
    def gS(self):
        return self.g(self.s[None, :], np.arange(1, self.nTerms + 1)[:, None])

    @property
    def fS(self):
        return self.f(self.s[None, :], np.arange(1, self.nTerms + 1)[:, None])

    def g_coeffs(self):
        """g_n(s) = alpha_n exp(-Omega s) + beta_n exp(-nu_n s) for s >= 0, n >= 1."""
        p = self.p
        g, W, nu = p.gammaTB, p.OmegaCutTB, self.nu
        # zeta_n = A (e^{-nu s} - (nu/W) e^{-W s}) with A = g W^2 nu /(W^2 - nu^2);
        # the degenerate n (nu ~ W) is handled by the caller via exact sampling.
        A = g * W * W * nu / (W * W - nu * nu)
        alpha = g * W + A * nu / W
        beta = -A
        return alpha, beta

    def f_coeffs(self):
        """f_n(s) = a_n (exp(-nu_n s) - exp(-Omega s)) for s >= 0."""
        p = self.p
        g, W, nu = p.gammaTB, p.OmegaCutTB, self.nu
        return g * W * W * nu / (W * W - nu * nu)


def _u_of(x, p: PhysicalParams):
    nu = matsubara_freq(x, p)
    return 1.0 / (p.omega0 ** 2 + nu * nu + zeta_drude(0.0, nu, p.gammaTB, p.OmegaCutTB))


def _sums(N: int, p: PhysicalParams, tail: bool):
    n = np.arange(1, N + 1)
    u = _u_of(n, p)
    w2 = p.omega0 ** 2
    zeta0 = zeta_drude(0.0, matsubara_freq(n, p), p.gammaTB, p.OmegaCutTB)
    su = u.sum()
    sp = (u * (w2 + zeta0)).sum()
    tu = tp = 0.0
    if tail:
        tu = float(_tail(lambda x: _u_of(x, p), N))
        tp = float(_tail(lambda x: _u_of(x, p) * (
            w2 + zeta_drude(0.0, matsubara_freq(x, p), p.gammaTB, p.OmegaCutTB)), N))
    hb = p.hbar * p.betaTB
    Lam = (1.0 / w2 + 2.0 * (su + tu)) / hb
    Om = (1.0 + 2.0 * (sp + tp)) / hb
    return n, u, zeta0, Lam, Om, tu


def build_matsubara(p: PhysicalParams, grid: TimeGrid | None = None, tol: float = 1e-10,
                    nTerms: int | None = None, tail: bool = True,
                    n_max: int = 100_000) -> MatsubaraTable:
    """Build the Matsubara table, choosing N adaptively unless ``nTerms`` is given.

    N grows until the size of the Euler-Maclaurin derivative correction (the
    leading error of the tail estimate) is below ``tol * Lambda_TB``, and
    until nu_N exceeds 50 max(omega0, Omega_TB).
    """
    if p.markovian and p.gammaTB > 0:
        raise PhysicsError("Matsubara machinery needs a finite Drude cutoff OmegaCutTB")
    if nTerms is None:
        scale = max(p.omega0, p.OmegaCutTB if p.gammaTB > 0 else p.omega0)
        N = max(256, int(math.ceil(50 * scale * p.hbar * p.betaTB / (2 * math.pi))))
        while True:
            if N > n_max:
                raise NumericalError(f"Matsubara sum not converged at N={n_max} (tol={tol:g})")
            _, _, _, Lam, _, _ = _sums(N, p, tail)
            X = N + 0.5
            # derivative correction ~ u'(X)/24 with u ~ (hbar beta / 2 pi X)^2
            est = 2.0 * (p.hbar * p.betaTB / (2 * math.pi)) ** 2 / (12 * X ** 3) / (p.hbar * p.betaTB)
            if not tail:
                est = 2.0 * (p.hbar * p.betaTB / (2 * math.pi)) ** 2 / X / (p.hbar * p.betaTB)
            if est < tol * Lam:
                break
            N *= 2
    else:
        N = int(nTerms)
    n, u, zeta0, Lam, Om, _ = _sums(N, p, tail)
    tab = MatsubaraTable(p=p, nu=matsubara_freq(n, p), zeta0=zeta0, uN=u, LambdaTB=Lam,
                         OmegaEq=Om, nTerms=N, tailApplied=tail, tol=tol)
    if grid is not None:
        tab.s = grid.s
        tab.c1, tab.c2 = c_sums(tab, grid.s)
    return tab


def c_sums(tab: MatsubaraTable, s: np.ndarray, tail: bool | None = None):
    """C_1(s) and C_2(s) with the table's truncation and tail policy."""
    p = tab.p
    tail = tab.tailApplied if tail is None else tail
    s = np.asarray(s, dtype=float)
    hb = p.hbar * p.betaTB
    if p.gammaTB == 0.0:
        return np.zeros_like(s), np.zeros_like(s)
    g0 = p.gammaTB * p.OmegaCutTB * np.exp(-p.OmegaCutTB * np.abs(s))
    s1 = np.zeros_like(s)
    s2 = np.zeros_like(s)
    chunk = max(1, 2_000_000 // max(s.size, 1))
    for lo in range(1, tab.nTerms + 1, chunk):
        n = np.arange(lo, min(lo + chunk, tab.nTerms + 1))[:, None]
        u = tab.uN[n[:, 0] - 1][:, None]
        nu = tab.nu[n[:, 0] - 1][:, None]
        s1 += (u * tab.g(s[None, :], n)).sum(axis=0)
        s2 += (u * nu * tab.f(s[None, :], n)).sum(axis=0)
    if tail:
        def h1(x):
            x = x[:, None]
            return _u_of(x, p) * (g0[None, :] - zeta_drude(s[None, :], matsubara_freq(x, p),
                                                           p.gammaTB, p.OmegaCutTB))

        def h2(x):
            x = x[:, None]
            nu = matsubara_freq(x, p)
            return _u_of(x, p) * nu * f_drude(s[None, :], nu, p.gammaTB, p.OmegaCutTB)

        s1 = s1 + _tail(h1, tab.nTerms)
        s2 = s2 + _tail(h2, tab.nTerms)
    c1 = (tab.u0 * g0 + 2.0 * s1) / (hb * tab.LambdaTB)
    c2 = 2.0 * s2 / hb
    return c1, c2


def equilibrium_moments(tab: MatsubaraTable):
    """Static equilibrium <q^2> = (hbar/m) Lambda_TB and <p^2> = hbar m Omega_eq."""
    p = tab.p
    return p.hbar / p.m * tab.LambdaTB, p.hbar * p.m * tab.OmegaEq
