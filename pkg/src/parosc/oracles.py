"""Independent reference solutions.

Nothing here imports the solver, the Matsubara table or the moment code;
each oracle is a separate route (Laplace inversion, quadrature, dense ODE
integration) to a quantity the pipeline also computes.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg


@dataclass
class OracleReport:
    name: str
    maxAbsError: float
    maxRelError: float
    tolerance: float
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.maxRelError <= self.tolerance)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag}  {self.name:<44s} abs={self.maxAbsError:.3e} "
                f"rel={self.maxRelError:.3e} tol={self.tolerance:.1e} ({self.runtime:.2f}s)")


def compare(name: str, got, ref, tol: float, t0: float | None = None) -> OracleReport:
    got = np.asarray(got, dtype=float)
    ref = np.asarray(ref, dtype=float)
    err = np.abs(got - ref).max()
    scale = max(np.abs(ref).max(), 1e-300)
    return OracleReport(name, float(err), float(err / scale), tol,
                        0.0 if t0 is None else time.perf_counter() - t0)


# --- Laplace inversion for the Drude bath -----------------------------------------

def _drude_companion(omega0, gamma, Omega):
    # r' = v ; v' = -w0^2 r - gamma Omega r + Omega z ; z' = gamma Omega r - Omega z
    return np.array([[0.0, 1.0, 0.0],
                     [-omega0 ** 2 - gamma * Omega, 0.0, Omega],
                     [gamma * Omega, 0.0, -Omega]])


def laplace_drude_solution(s, omega0: float, gamma: float, Omega: float):
    """phi1, dphi1, phi2, dphi2 for the unmodulated Drude equation of motion.

    Inverts phi1_hat = (z + Omega)/P(z), phi2_hat = z (z + Omega)/P(z) with
    P(z) = z^3 + Omega z^2 + (omega0^2 + gamma Omega) z + Omega omega0^2 by
    residues.  Near-coincident roots (critical damping) fall back to the
    equivalent three-dimensional linear system's matrix exponential.
    """
    s = np.asarray(s, dtype=float)
    if gamma == 0.0:
        w = omega0
        return (np.sin(w * s) / w, np.cos(w * s), np.cos(w * s), -w * np.sin(w * s))
    P = np.array([1.0, Omega, omega0 ** 2 + gamma * Omega, Omega * omega0 ** 2])
    roots = np.roots(P)
    gaps = [abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1:]]
    if min(gaps) < 1e-5 * max(1.0, np.abs(roots).max()):
        return _companion_solution(s, omega0, gamma, Omega)
    dP = np.polyval(np.polyder(P), roots)
    e = np.exp(np.outer(s, roots))
    a1 = (roots + Omega) / dP
    a2 = roots * (roots + Omega) / dP
    phi1 = (e @ a1).real
    dphi1 = (e @ (a1 * roots)).real
    phi2 = (e @ a2).real
    dphi2 = (e @ (a2 * roots)).real
    return phi1, dphi1, phi2, dphi2


def laplace_residues(omega0, gamma, Omega):
    P = np.array([1.0, Omega, omega0 ** 2 + gamma * Omega, Omega * omega0 ** 2])
    roots = np.roots(P)
    dP = np.polyval(np.polyder(P), roots)
    return roots, (roots + Omega) / dP


def _companion_solution(s, omega0, gamma, Omega):
    A = _drude_companion(omega0, gamma, Omega)
    out = np.empty((s.size, 4))
    for i, si in enumerate(s):
        E = linalg.expm(A * si)
        # phi1: (r, v, z) = (0, 1, 0); phi2: (1, 0, 0)
        out[i] = E[0, 1], E[1, 1], E[0, 0], E[1, 0]
    return out[:, 0], out[:, 1], out[:, 2], out[:, 3]


def markov_solution(s, omega0: float, gamma: float):
    """phi1, phi2 for r'' + gamma r' + omega0^2 r = 0 (underdamped)."""
    s = np.asarray(s, dtype=float)
    w1 = math.sqrt(omega0 ** 2 - 0.25 * gamma ** 2)
    e = np.exp(-0.5 * gamma * s)
    phi1 = e * np.sin(w1 * s) / w1
    phi2 = e * (np.cos(w1 * s) + 0.5 * gamma / w1 * np.sin(w1 * s))
    return phi1, phi2


# --- classical Markovian response -------------------------------------------------

def classical_driven_response(t, force, m: float, omega0: float, gamma: float,
                              points=None):
    """<q(t)> = (1/m) int_0^t G(t-s) F(s) ds with the damped Green function.

    ``force`` is a scalar callable.  Adaptive quadrature at tight tolerance.
    """
    w1 = math.sqrt(omega0 ** 2 - 0.25 * gamma ** 2)

    def green(tau):
        return math.exp(-0.5 * gamma * tau) * math.sin(w1 * tau) / w1

    out = []
    for ti in np.atleast_1d(t):
        if ti <= 0:
            out.append(0.0)
            continue
        val, _ = integrate.quad(lambda s: green(ti - s) * force(s), 0.0, ti,
                                epsabs=1e-13, epsrel=1e-12, limit=2000, points=points)
        out.append(val / m)
    return np.array(out)


def steady_amplitude(E0, m, omega0, gamma, wd):
    return E0 / m / math.sqrt((omega0 ** 2 - wd ** 2) ** 2 + gamma ** 2 * wd ** 2)


# --- fluctuation-dissipation quadrature ---------------------------------------------

def _susceptibility(w, m, omega0, gamma, Omega):
    ghat = gamma * Omega / (Omega - 1j * w) if math.isfinite(Omega) else gamma
    return 1.0 / (m * (omega0 ** 2 - w * w - 1j * w * ghat))


def fdt_equilibrium_variance(m, omega0, gamma, Omega, beta, hbar=1.0):
    """(<q^2>, <p^2>) from (hbar/pi) int coth(beta hbar w/2) Im chi(w) dw."""
    def wcoth(w):
        x = 0.5 * beta * hbar * w
        return 1.0 / (0.5 * beta * hbar) if x < 1e-8 else w / math.tanh(x)

    def iq(w):
        if w == 0.0:
            # Im chi / w at w -> 0 is gamma_hat(0)/(m omega0^4)
            return gamma / (m * omega0 ** 4) * (2.0 / (beta * hbar))
        return (_susceptibility(w, m, omega0, gamma, Omega).imag / w) * wcoth(w)

    def ip(w):
        return iq(w) * w * w

    # cluster breakpoints around the resonance, whose width is ~gamma
    brk = {omega0, Omega if math.isfinite(Omega) else 10 * omega0}
    for k in (1.0, 10.0, 100.0):
        brk |= {omega0 * (1 - k * gamma), omega0 * (1 + k * gamma)}
    brk = sorted(b for b in brk if b > 0)
    opts = dict(epsabs=1e-14, epsrel=1e-11, limit=2000)
    if gamma == 0.0:
        c = 1.0 / math.tanh(0.5 * beta * hbar * omega0)
        return hbar / (2 * m * omega0) * c, hbar * m * omega0 / 2 * c
    qq = sum(integrate.quad(iq, a, b, **opts)[0] for a, b in
             zip([0.0] + brk, brk + [np.inf]))
    pp = sum(integrate.quad(ip, a, b, **opts)[0] for a, b in
             zip([0.0] + brk, brk + [np.inf]))
    return hbar / math.pi * qq, hbar * m * m / math.pi * pp


def undamped_variance(m, omega0, beta, hbar=1.0):
    c = 1.0 / math.tanh(0.5 * beta * hbar * omega0)
    return hbar / (2 * m * omega0) * c, hbar * m * omega0 / 2 * c


# --- Floquet analysis for the parametric regime ------------------------------------

def floquet_multiplier(omega0, gamma, amp, wd):
    """Largest |Floquet multiplier| of r'' + gamma r' + (omega0^2 + amp sin(wd s)) r = 0."""
    T = 2 * math.pi / wd

    def rhs(s, y):
        return [y[1], -gamma * y[1] - (omega0 ** 2 + amp * math.sin(wd * s)) * y[0]]

    cols = []
    for y0 in ([1.0, 0.0], [0.0, 1.0]):
        sol = integrate.solve_ivp(rhs, (0, T), y0, method="DOP853", rtol=1e-12, atol=1e-14)
        cols.append(sol.y[:, -1])
    mono = np.array(cols).T
    return float(np.abs(np.linalg.eigvals(mono)).max())


def tongue_boundary(omega0, gamma, wd, lo=0.0, hi=None, tol=1e-8):
    """Smallest modulation amplitude with |multiplier| = 1 (bisection)."""
    hi = hi if hi is not None else 2.0 * omega0 ** 2
    if floquet_multiplier(omega0, gamma, hi, wd) <= 1.0:
        raise ValueError("no instability below the bracket's upper end")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if floquet_multiplier(omega0, gamma, mid, wd) > 1.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
