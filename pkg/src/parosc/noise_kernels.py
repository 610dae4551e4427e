"""Real-time noise kernels and the quadratic noise functionals built from them.

The symmetrised noise kernel is ``K(s) = int_0^inf dw/pi S(w) cos(w s)`` with
``S = J_TB coth(beta_TB hbar w/2) + J_BB coth(beta_BB hbar w/2)``.  For the
Drude bath ``K_TB^re`` has a logarithmic singularity at s = 0 and the
blackbody vacuum part is only defined under a frequency window, so the double
integrals ``int int K(s-u) x(s) y(u)`` are evaluated with exact weights for
the piecewise-linear interpolants of x and y rather than from sampled K.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .model import PhysicalParams, PhysicsError, TimeGrid
from .spectral import MatsubaraTable, _tail, j_bb, matsubara_freq, zeta_drude


@dataclass(frozen=True)
class Regularization:
    """Exponential window exp(-w/w_w), w_w = windowFactor * OmegaCutBB, on the BB vacuum part."""

    windowFactor: float = 10.0


def _wcoth(w, beta, hbar):
    """w coth(beta hbar w / 2), even in w, finite at w = 0."""
    x = 0.5 * beta * hbar * np.abs(w)
    small = x < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 2.0 / (beta * hbar), np.abs(w) / np.tanh(safe))


def _coth_minus_one(w, beta, hbar):
    x = beta * hbar * np.abs(np.asarray(w, dtype=float))
    return 2.0 / np.expm1(np.maximum(x, 1e-300))


def noise_spectrum(w, p: PhysicalParams, part: str = "all",
                   reg: Regularization = Regularization()):
    """S(w) for ``part`` in {all, TB, BB, BBth, BBvac}; even in w."""
    w = np.abs(np.asarray(w, dtype=float))
    out = np.zeros_like(w)
    if part in ("all", "TB") and p.gammaTB > 0:
        # J_TB(w)/w is finite at 0
        jw = p.m * p.gammaTB * (1.0 if p.markovian else
                                p.OmegaCutTB ** 2 / (p.OmegaCutTB ** 2 + w * w))
        out = out + jw * _wcoth(w, p.betaTB, p.hbar)
    if part in ("all", "BB", "BBth", "BBvac") and p.bb_active:
        jb = j_bb(w, p)
        if part in ("all", "BB", "BBth") and math.isfinite(p.betaBB):
            with np.errstate(over="ignore"):
                out = out + jb * np.where(w > 0, _coth_minus_one(w, p.betaBB, p.hbar), 0.0)
        if part in ("all", "BB", "BBvac"):
            out = out + jb * np.exp(-w / (reg.windowFactor * p.OmegaCutBB))
    return out


# --- point evaluations ------------------------------------------------------------

def k_tb_re(s, tab: MatsubaraTable):
    """K_TB^re(s) from the Matsubara representation (m/hbar beta) sum_n g_n(s).

    Logarithmically divergent at s = 0 for the Drude bath (returns inf there).
    """
    p = tab.p
    s = np.abs(np.atleast_1d(np.asarray(s, dtype=float)))
    if p.gammaTB == 0.0:
        return np.zeros_like(s)
    g0 = p.gammaTB * p.OmegaCutTB * np.exp(-p.OmegaCutTB * s)
    n = np.arange(1, tab.nTerms + 1)[:, None]
    body = tab.g(s[None, :], n).sum(axis=0)

    def h(x):
        x = x[:, None]
        return g0[None, :] - zeta_drude(s[None, :], matsubara_freq(x, p), p.gammaTB, p.OmegaCutTB)

    with np.errstate(divide="ignore", invalid="ignore"):
        total = g0 + 2.0 * (body + _tail(h, tab.nTerms))
    out = p.m / (p.hbar * p.betaTB) * total
    return np.where(s == 0.0, np.inf, out)


def k_tb_re_quadrature(s: float, p: PhysicalParams) -> float:
    """Oracle: int_0^inf dw/pi J_TB(w) coth(beta hbar w/2) cos(w s) by adaptive quadrature."""
    def f(w):
        return float(noise_spectrum(w, p, "TB")) / math.pi

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, 0, np.inf, weight="cos", wvar=abs(s), limit=500, limlst=200,
                                epsabs=1e-13)
    return val


@dataclass
class KBBValue:
    thermal: float
    vacuum: float
    error: float

    @property
    def total(self) -> float:
        return self.thermal + self.vacuum


def k_bb(s: float, p: PhysicalParams, reg: Regularization = Regularization()) -> KBBValue:
    """K_BB(s) split into the thermal (coth - 1) and windowed vacuum parts."""
    if not p.bb_active:
        return KBBValue(0.0, 0.0, 0.0)
    s = abs(float(s))
    ww = reg.windowFactor * p.OmegaCutBB
    opts = dict(limit=1000, epsabs=1e-14, epsrel=1e-10)

    def th(w):
        return float(noise_spectrum(w, p, "BBth")) / math.pi

    def vac(w):
        return float(j_bb(w, p)) * math.exp(-w / ww) / math.pi

    # finite range: both integrands are below 1e-16 of their peak beyond wMax
    wMax = 40.0 * max(ww, 1.0 / p.betaBB if math.isfinite(p.betaBB) else 0.0, p.OmegaCutBB)
    if s == 0.0:
        edges = np.concatenate(([0.0], np.geomspace(1e-3 * p.OmegaCutBB, wMax, 64)))
    else:
        nChunk = int(min(4000, max(16, wMax * s / (2 * math.pi))))
        edges = np.linspace(0.0, wMax, nChunk + 1)
    res = []
    for f in (th, vac):
        v = e = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if s == 0.0:
                vi, ei = integrate.quad(f, a, b, **opts)
            else:
                vi, ei = integrate.quad(f, a, b, weight="cos", wvar=s, limit=200,
                                        epsabs=1e-15, epsrel=1e-11)
            v += vi
            e += ei
        res.append((v, e))
    (tv, te), (vv, ve) = res
    err = te + ve
    scale = max(abs(tv) + abs(vv), 1e-10 * p.OmegaCutBB * p.tauBB, 1e-300)
    if err > 1e-4 * scale:
        raise ArithmeticError(f"K_BB quadrature error {err:.2e} too large at s={s}")
    return KBBValue(tv, vv, err)


# --- exact product-integration weights ----------------------------------------------

def _sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


def _t_minus_sin(t):
    t = np.asarray(t, dtype=float)
    small = np.abs(t) < 1e-2
    t2 = t * t
    series = t * t2 / 6.0 * (1 - t2 / 20.0 * (1 - t2 / 42.0 * (1 - t2 / 72.0)))
    return np.where(small, series, t - np.sin(t))


def _profiles(theta, S):
    """Fw, Fe, Fg at theta given S(theta/h) values."""
    th = np.asarray(theta, dtype=float)
    safe = np.where(th == 0.0, 1.0, th)
    sc2 = _sinc(0.5 * th) ** 2
    r3 = np.where(th == 0.0, 1.0 / 6.0, _t_minus_sin(th) / safe ** 3)  # (t - sin t)/t^3
    fw = S * sc2 * sc2
    fe = S * sc2 * 2.0 * r3 * th
    fg = S * 4.0 * (r3 * th) ** 2
    return fw, fe, fg


@dataclass
class NoiseWeights:
    """Toeplitz weights for int int K(s-u) x(s) y(u) ds du with piecewise-linear x, y.

    ``w[k]``, ``e[k]``, ``g[k]`` are stored for k = -n..n at offset n.
    """

    h: float
    n: int
    w: np.ndarray
    e: np.ndarray
    g: np.ndarray
    part: str

    def bilinear(self, x, y) -> float:
        """int int K(s-u) x(s) y(u) over [0, t]^2, t = (len(x)-1) h."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        k = x.size - 1
        if k == 0:
            return 0.0
        cx = x.copy()
        cy = y.copy()
        cx[[0, -1]] *= 0.5
        cy[[0, -1]] *= 0.5
        n = self.n
        wseg = self.w[n - k:n + k + 1]
        ty = fftconvolve(cy, wseg)[k:2 * k + 1]      # (T y)_a = sum_b w_{a-b} y_b
        main = float(cx @ ty)
        e_a = self.e[n:n + k + 1]                    # e_{a}, a = 0..k
        e_an = self.e[n - k:n + 1]                   # e_{a-k}
        edge = (cx @ (0.5 * y[0] * e_a - 0.5 * y[-1] * e_an)
                + cy @ (0.5 * x[0] * e_a - 0.5 * x[-1] * e_an))
        g0 = self.g[n]
        gk = self.g[n + k]
        corner = 0.25 * (x[0] * y[0] * g0 - x[0] * y[-1] * gk - x[-1] * y[0] * gk
                         + x[-1] * y[-1] * g0)
        return main + float(edge) + corner


def noise_weights(p: PhysicalParams, grid: TimeGrid, part: str = "all",
                  reg: Regularization = Regularization(), spectrum=None) -> NoiseWeights:
    """Weights from the periodised frequency integrals, evaluated with an FFT.

    With theta = w h, each weight is (h / 2 pi) int F(theta) exp(i k theta) over
    the real line; folding F onto one period gives a smooth periodic function
    whose discrete Fourier coefficients are the weights.  Folded terms beyond
    |j| > J are added with an Euler-Maclaurin integral (the periodic numerators
    sin^2(theta/2) and sin(theta) are factored out first).
    """
    h, n = grid.h, grid.nSteps
    S = spectrum if spectrum is not None else (lambda w: noise_spectrum(w, p, part, reg))
    fmax = p.omega0
    if p.gammaTB > 0:
        fmax = max(fmax, p.OmegaCutTB if not p.markovian else 0.0)
    if p.bb_active:
        fmax = max(fmax, 40 * reg.windowFactor * p.OmegaCutBB)
    J = int(math.ceil(50 * h * fmax / (2 * math.pi))) + 8
    M = 1 << max(14, int(math.ceil(math.log2(4 * n + 8))))
    theta = 2 * math.pi * (np.arange(M) - M // 2) / M
    Pw = np.zeros(M)
    Pe = np.zeros(M)
    Pg = np.zeros(M)
    for j in range(-J, J + 1):
        th = theta + 2 * math.pi * j
        fw, fe, fg = _profiles(th, S(th / h))
        Pw += fw
        Pe += fe
        Pg += fg
    # tails, both signs of j
    s2 = np.sin(0.5 * theta) ** 2
    sn = np.sin(theta)
    for sign in (1.0, -1.0):
        def q(jj, _sign=sign):
            x = theta[None, :] + _sign * 2 * math.pi * jj[:, None]
            Sx = S(x / h)
            return np.stack([Sx / x ** 4, Sx / x ** 3, Sx / x ** 2, Sx * sn / x ** 4,
                             Sx * sn / x ** 3, Sx * sn ** 2 / x ** 4], axis=1)

        T = _tail(q, J)
        Pw += 16.0 * s2 * s2 * T[0]
        Pe += 8.0 * s2 * (T[1] - T[3])
        Pg += 4.0 * (T[2] - 2.0 * T[4] + T[5])
    ks = np.arange(-n, n + 1)
    # c_k = (1/M) sum_m P(theta_m) exp(i k theta_m); ifftshift puts theta = 0 first
    cw, ce, cg = (np.fft.ifft(np.fft.ifftshift(P))[ks % M] for P in (Pw, Pe, Pg))
    return NoiseWeights(h, n, h * cw.real, h * ce.imag, h * cg.real, part)


# --- correlation functions and R ----------------------------------------------------

@dataclass
class CFunctions:
    """C_1, C_2 on the grid, their Matsubara-tail parts, and C~_1 = C_1 + smooth gamma_BB."""

    s: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    c1Tilde: np.ndarray
    localBB: float
    c1tail: np.ndarray
    c2tail: np.ndarray


def c_functions(tab: MatsubaraTable, p: PhysicalParams, grid: TimeGrid) -> CFunctions:
    from .spectral import c_sums, gamma_kernel

    s = grid.s
    if tab.c1 is not None and tab.s is not None and tab.s.size == s.size:
        c1, c2 = tab.c1, tab.c2
    else:
        c1, c2 = c_sums(tab, s)
    if tab.tailApplied:
        r1, r2 = c_sums(tab, s, tail=False)
        t1, t2 = c1 - r1, c2 - r2
    else:
        t1, t2 = np.zeros_like(s), np.zeros_like(s)
    gbb = gamma_kernel("BB", p)
    return CFunctions(s, c1, c2, c1 + gbb.smooth(s), gbb.localCoeff, t1, t2)


def kernel_cell_average(p: PhysicalParams, grid: TimeGrid, reg: Regularization = Regularization(),
                        part: str = "all"):
    """K(k h) for k = 0..n, with K(0) replaced by its average over |s| < h/2.

    Computed as (1/pi) int S(w) cos(w k h) [sinc(w h/2) at k = 0] dw through
    the same folding used for the weights.
    """
    h, n = grid.h, grid.nSteps

    def S(w):
        return noise_spectrum(w, p, part, reg)

    out = np.empty(n + 1)
    ww = reg.windowFactor * p.OmegaCutBB if p.bb_active else 0.0
    hi = max(50 * p.omega0, 200 * (p.OmegaCutTB if p.gammaTB > 0 and not p.markovian else 0),
             60 * ww, 400 / h)
    for k in range(n + 1):
        if k == 0:
            f = lambda w: float(S(w)) * float(_sinc(0.5 * w * h)) / math.pi
            v, _ = integrate.quad(f, 0, hi, limit=2000)
        else:
            f = lambda w: float(S(w)) / math.pi
            v, _ = integrate.quad(f, 0, hi, weight="cos", wvar=k * h, limit=4000)
        out[k] = v
    return out


def build_r(tab: MatsubaraTable, p: PhysicalParams, grid: TimeGrid,
            reg: Regularization = Regularization(), kernel=None) -> np.ndarray:
    """Dense symmetric R(s_i, u_j) = R_TB(s_i, u_j) + K(s_i - u_j)/m.

    Memory O(n^2); intended for inspection and cross-checks on modest grids.
    ``kernel`` may supply K(k h), k = 0..n (defaults to the cell-averaged kernel).
    """
    s = grid.s
    n = s.size
    R = np.zeros((n, n))
    if p.gammaTB > 0:
        cf = c_functions(tab, p, grid)
        hb = p.hbar * p.betaTB
        g0 = p.gammaTB * p.OmegaCutTB * np.exp(-p.OmegaCutTB * s)
        idx = np.arange(1, tab.nTerms + 1)[:, None]
        G = tab.g(s[None, :], idx)
        F = tab.f(s[None, :], idx)
        u = tab.uN[:, None]
        R += (tab.u0 * np.outer(g0, g0) + 2.0 * ((G * u).T @ G - (F * u).T @ F)) / hb
        R -= tab.LambdaTB * np.outer(cf.c1, cf.c1)
    if kernel is None:
        kernel = kernel_cell_average(p, grid, reg)
    kk = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    R += kernel[kk] / p.m
    return 0.5 * (R + R.T)


@dataclass
class NoiseTable:
    """Per-bath noise weights; R^K_ij = sum over parts of bilinear(v_i, v_j) / m."""

    m: float
    weights: dict
    reg: Regularization

    def r_k(self, x, y, parts=None) -> float:
        keys = self.weights.keys() if parts is None else [k for k in parts if k in self.weights]
        return sum(self.weights[k].bilinear(x, y) for k in keys) / self.m


def build_noise_table(p: PhysicalParams, grid: TimeGrid,
                      reg: Regularization = Regularization()) -> NoiseTable:
    weights = {}
    if p.gammaTB > 0 and p.markovian:
        raise PhysicsError("Ohmic noise without a cutoff has divergent momentum dispersion; "
                           "use a finite OmegaCutTB")
    if p.gammaTB > 0:
        weights["TB"] = noise_weights(p, grid, "TB", reg)
    if p.bb_active:
        weights["BB"] = noise_weights(p, grid, "BB", reg)
    return NoiseTable(p.m, weights, reg)
