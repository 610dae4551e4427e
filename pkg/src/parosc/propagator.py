"""Fundamental solutions of the forward (r) and time-reversed (x) equations of motion.

Both equations are integrated in generalized-Langevin form

    r'' + c r' + int_0^s k(s-u) r'(u) du + k(s) r(0) + w^2(s) r = 0,

where ``c`` is the local friction coefficient and ``k`` the smooth memory
kernel.  This is the d/ds-of-convolution form with the derivative moved
onto ``r`` by parts, so the kernel is never differentiated at its kink.
The scheme is implicit trapezoidal for the ODE and trapezoidal product
integration for the memory term (second order).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DriveSpec, NumericalError, PhysicalParams, TimeGrid
from .spectral import DampingKernelSplit


def solve_gle(kernel: DampingKernelSplit, omega2: np.ndarray, h: float, init: np.ndarray):
    """Integrate the homogeneous GLE on a uniform grid.

    Parameters
    ----------
    kernel : DampingKernelSplit
    omega2 : ndarray, shape (n+1,)
        Squared frequency sampled on the grid.
    h : float
        Step.
    init : ndarray, shape (2, k)
        Initial (value, derivative) for k independent solutions.

    Returns
    -------
    r, dr : ndarray, shape (n+1, k)
    """
    omega2 = np.asarray(omega2, dtype=float)
    n = omega2.size - 1
    init = np.atleast_2d(np.asarray(init, dtype=float))
    k = init.shape[1]
    r = np.empty((n + 1, k))
    v = np.empty((n + 1, k))
    r[0], v[0] = init
    c = kernel.localCoeff
    kap = kernel.smooth(np.arange(n + 1) * h)
    memory = bool(np.any(kap))
    kap_rev = kap[::-1]
    r0 = r[0]

    def force(i, ri, vi, conv):
        return -c * vi - conv - kap[i] * r0 - omega2[i] * ri

    F_prev = force(0, r[0], v[0], 0.0)
    diag = 1.0 + 0.5 * h * (c + 0.5 * h * kap[0])
    for i in range(1, n + 1):
        if memory:
            # h * [k_i v_0 / 2 + sum_{j=1}^{i-1} k_{i-j} v_j]; the k_0 v_i / 2 part is implicit
            known = h * (0.5 * kap[i] * v[0] + kap_rev[n - i + 1:n] @ v[1:i]) if i > 1 else \
                h * 0.5 * kap[i] * v[0]
        else:
            known = 0.0
        rhs = v[i - 1] + 0.5 * h * F_prev - 0.5 * h * (
            known + kap[i] * r0 + omega2[i] * (r[i - 1] + 0.5 * h * v[i - 1]))
        v[i] = rhs / (diag + 0.25 * h * h * omega2[i])
        r[i] = r[i - 1] + 0.5 * h * (v[i - 1] + v[i])
        F_prev = force(i, r[i], v[i], known + 0.5 * h * kap[0] * v[i])
    return r, v


@dataclass
class FundamentalSolutions:
    """phi1 (r(0)=0, r'(0)=1) and phi2 (r(0)=1, r'(0)=0) with derivatives on the grid."""

    s: np.ndarray
    phi1: np.ndarray
    dphi1: np.ndarray
    phi2: np.ndarray
    dphi2: np.ndarray


@dataclass
class XSolutions:
    """Time-reversed solutions y(sigma) = x(t - sigma) for one final time t.

    ``ya`` starts with (1, 0) and ``yb`` with (0, 1) at sigma = 0, i.e. at s = t.
    """

    tIndex: int
    ya: np.ndarray
    dya: np.ndarray
    yb: np.ndarray
    dyb: np.ndarray

    def phiX(self):
        """phi^x_1, phi^x_2 and their s-derivatives on s_0..s_t."""
        k = self.tIndex
        Ya = self.ya[k::-1]
        Yb = self.yb[k::-1]
        dYa = -self.dya[k::-1]
        dYb = -self.dyb[k::-1]
        mat = np.array([[Ya[0], Yb[0]], [dYa[0], dYb[0]]])
        det = np.linalg.det(mat)
        scale = np.abs(mat).max() ** 2
        if abs(det) < 1e-10 * scale:
            raise NumericalError(f"x-solution combination ill-conditioned at index {k}")
        coef = np.linalg.solve(mat, np.eye(2))
        (a1, a2), (b1, b2) = coef
        x1 = a1 * Ya + b1 * Yb
        x2 = a2 * Ya + b2 * Yb
        return x1, a1 * dYa + b1 * dYb, x2, a2 * dYa + b2 * dYb


def omega2_on_grid(p: PhysicalParams, d: DriveSpec, s: np.ndarray) -> np.ndarray:
    return p.omega0 ** 2 + np.asarray(d.omegaP2(s), dtype=float)


def solve_r_fundamental(p: PhysicalParams, d: DriveSpec, gamma: DampingKernelSplit,
                        grid: TimeGrid, check: bool = False) -> FundamentalSolutions:
    s = grid.s
    w2 = omega2_on_grid(p, d, s)
    r, dr = solve_gle(gamma, w2, grid.h, np.array([[0.0, 1.0], [1.0, 0.0]]))
    if check:
        _halving_check(gamma, w2, grid.h, r)
    return FundamentalSolutions(s, r[:, 0], dr[:, 0], r[:, 1], dr[:, 1])


def _halving_check(gamma, w2, h, r, tol=1e-3):
    """Compare against the same solve on the doubled step; raise on large change."""
    if w2.size < 5:
        return
    coarse, _ = solve_gle(gamma, w2[::2], 2 * h, np.array([[0.0, 1.0], [1.0, 0.0]]))
    fine = r[::2][: coarse.shape[0]]
    rel = np.abs(coarse - fine).max() / max(np.abs(fine).max(), 1e-300)
    if rel > tol:
        raise NumericalError(f"step-halving change {rel:.2e} exceeds {tol:g}; refine the grid")
    return rel


def solve_x_fundamental(tIndex: int, p: PhysicalParams, d: DriveSpec,
                        gamma: DampingKernelSplit, grid: TimeGrid) -> XSolutions:
    """Solve the anti-friction x-equation for final time s_tIndex by time reversal."""
    s = grid.s[: tIndex + 1]
    t = s[-1]
    w2 = omega2_on_grid(p, d, t - s)
    y, dy = solve_gle(gamma, w2, grid.h, np.array([[1.0, 0.0], [0.0, 1.0]]))
    return XSolutions(tIndex, y[:, 0], dy[:, 0], y[:, 1], dy[:, 1])


@dataclass
class VU:
    """v_1, v_2, u_1, u_2 on s_0..s_t and the derivative scalars used by the moments."""

    tIndex: int
    t: float
    v1: np.ndarray
    v2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    du2_0: float
    du2_t: float
    du1_0: float
    du1_t: float
    phi1_t: float


def assemble_vu(sols: FundamentalSolutions, xs: XSolutions, caustic_tol: float = 1e-8) -> VU:
    k = xs.tIndex
    t = sols.s[k]
    f1, f2 = sols.phi1, sols.phi2
    f1t = f1[k]
    if abs(f1t) < caustic_tol * np.abs(f1[: k + 1]).max() or f1t == 0.0:
        raise NumericalError(f"caustic: phi1(t) ~ 0 at t = {t:.6g}")
    ybt = xs.yb[k]
    if abs(ybt) < caustic_tol * np.abs(xs.yb[: k + 1]).max() or ybt == 0.0:
        raise NumericalError(f"caustic: x-equation phi1(t) ~ 0 at t = {t:.6g}")
    yb_rev = xs.yb[k::-1]
    ya_rev = xs.ya[k::-1]
    v1 = yb_rev / ybt
    v2 = ya_rev - (xs.ya[k] / ybt) * yb_rev
    v1[-1] = 0.0
    v2[0] = 0.0
    u2 = f1[: k + 1] / f1t
    u1 = f2[: k + 1] - (f2[k] / f1t) * f1[: k + 1]
    return VU(
        tIndex=k, t=t, v1=v1, v2=v2, u1=u1, u2=u2,
        du2_0=sols.dphi1[0] / f1t,
        du2_t=sols.dphi1[k] / f1t,
        du1_0=sols.dphi2[0] - f2[k] / f1t * sols.dphi1[0],
        du1_t=sols.dphi2[k] - f2[k] / f1t * sols.dphi1[k],
        phi1_t=f1t,
    )
