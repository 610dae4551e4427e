"""Coefficient functionals, Gaussian moments and the reduced density matrix.

The reduced density matrix at time t is a Gaussian in (x'', r'') obtained by
integrating the initial state against the propagating function.  All of its
data sit in one complex quadratic form over y = (x'', r'', x', r'),

    exp(-y^T A y / 2 + b^T y),

and the moments are read off after integrating out the initial coordinates
(x', r') with a Schur complement.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import DriveSpec, NumericalError, PhysicalParams, TimeGrid, check
from .noise_kernels import NoiseTable, Regularization, build_noise_table, c_functions
from .propagator import (VU, XSolutions, assemble_vu, solve_r_fundamental,
                         solve_x_fundamental)
from .spectral import MatsubaraTable, build_matsubara, gamma_kernel

X2, R2, X1, R1 = range(4)
CONVENTIONS = ("derived", "printed")
QQ_FORMS = ("schur", "printed")


@dataclass
class MomentFunctionals:
    """C_j^{+-}, C~_1^{+-}, E_L^{+-} and R_ij at one time; '+' pairs with v_1, '-' with v_2."""

    t: float
    c1p: float = 0.0
    c1m: float = 0.0
    c2p: float = 0.0
    c2m: float = 0.0
    c1tp: float = 0.0
    c1tm: float = 0.0
    eLp: float = 0.0
    eLm: float = 0.0
    r11: float = 0.0
    r12: float = 0.0
    r22: float = 0.0
    rBB: tuple = (0.0, 0.0, 0.0)


@dataclass
class GaussianState:
    meanQ: float
    meanP: float
    sqq: float
    sqp: float
    spp: float
    time: float = 0.0
    flags: list = field(default_factory=list)

    @property
    def uncertainty(self) -> float:
        """sigma_qq sigma_pp - sigma_qp^2."""
        return self.sqq * self.spp - self.sqp ** 2

    def purity(self, hbar: float = 1.0) -> float:
        return hbar / (2.0 * math.sqrt(self.uncertainty))


@dataclass
class CovarianceTrajectory:
    states: list
    functionals: list
    meta: dict

    @property
    def t(self):
        return np.array([s.time for s in self.states])

    def column(self, name: str):
        return np.array([getattr(s, name) for s in self.states])


# --- quadratures ----------------------------------------------------------------

def _trap(f, v, h):
    return h * (float(f @ v) - 0.5 * (f[0] * v[0] + f[-1] * v[-1]))


def exp_moments(v, h, lam):
    """int_0^t exp(-lam s) v(s) ds for the piecewise-linear interpolant of v, exactly."""
    v = np.asarray(v, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    k = v.size - 1
    E = np.exp(-np.outer(lam, h * np.arange(k)))
    x = lam * h
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    em = np.exp(-xs)
    a = np.where(small, 0.5 - x / 6.0 + x * x / 24.0, (xs - 1.0 + em) / xs ** 2)
    b = np.where(small, 0.5 - x / 3.0 + x * x / 8.0, (1.0 - em - xs * em) / xs ** 2)
    return h * (a * (E @ v[:-1]) + b * (E @ v[1:]))


def matsubara_moments(tab: MatsubaraTable, v, h):
    """(G_0, G_n, F_n): integrals of g_0, g_n, f_n against v, n = 1..N, exactly."""
    p = tab.p
    W, nu = p.OmegaCutTB, tab.nu
    alpha, beta = tab.g_coeffs()
    A = tab.f_coeffs()
    XW = exp_moments(v, h, [W])[0]
    Xn = exp_moments(v, h, nu)
    with np.errstate(invalid="ignore", over="ignore"):
        g = alpha * XW + beta * Xn
        f = A * (Xn - XW)
    deg = np.abs(W - nu) < 1e-3 * W
    if deg.any():
        s = h * np.arange(v.size)
        for i in np.flatnonzero(deg):
            g[i] = _trap(tab.g(s, i + 1), v, h)
            f[i] = _trap(tab.f(s, i + 1), v, h)
    return p.gammaTB * W * XW, g, f


def r_tb(tab: MatsubaraTable, m1, m2, c1pm) -> np.ndarray:
    """Initial-correlation noise R_TB,ij in factored Matsubara form (2x2).

    ``m1``, ``m2`` are the ``matsubara_moments`` of v_1 and v_2.
    """
    p = tab.p
    hb = p.hbar * p.betaTB
    R = np.empty((2, 2))
    for i, (G0i, Gi, Fi) in enumerate((m1, m2)):
        for j, (G0j, Gj, Fj) in enumerate((m1, m2)):
            R[i, j] = (-tab.LambdaTB * c1pm[i] * c1pm[j]
                       + (tab.u0 * G0i * G0j + 2.0 * np.sum(tab.uN * (Gi * Gj - Fi * Fj))) / hb)
    return R


def functionals(vu: VU, grid: TimeGrid, p: PhysicalParams, d: DriveSpec,
                tab: MatsubaraTable | None, noise: NoiseTable | None,
                cfun=None, factorized: bool = False) -> MomentFunctionals:
    """Quadrature functionals for the snapshot held in ``vu``.

    ``factorized`` drops the initial-correlation pieces (C_1, C_2, R_TB).
    """
    k, h = vu.tIndex, grid.h
    s = grid.s[: k + 1]
    v1, v2 = vu.v1, vu.v2
    out = MomentFunctionals(t=vu.t)
    if not d.eLaser.is_zero:
        E = np.asarray(d.eLaser(s), dtype=float)
        out.eLp, out.eLm = _trap(E, v1, h), _trap(E, v2, h)
    thermal = not factorized and tab is not None and p.gammaTB > 0
    if thermal:
        # C_j^{+-} from the same exact moments as R_TB (they cancel against each other);
        # only the Matsubara tail is integrated from samples
        cf = cfun if cfun is not None else c_functions(tab, p, grid)
        t1, t2 = cf.c1tail[: k + 1], cf.c2tail[: k + 1]
        mom = [matsubara_moments(tab, v, h) for v in (v1, v2)]
        hb = p.hbar * p.betaTB
        c1 = [(tab.u0 * G0 + 2.0 * tab.uN @ G) / (hb * tab.LambdaTB) for G0, G, _ in mom]
        c2 = [2.0 * (tab.uN * tab.nu) @ F / hb for _, _, F in mom]
        out.c1p, out.c1m = c1[0] + _trap(t1, v1, h), c1[1] + _trap(t1, v2, h)
        out.c2p, out.c2m = c2[0] + _trap(t2, v1, h), c2[1] + _trap(t2, v2, h)
    gbb = gamma_kernel("BB", p)
    sb = gbb.smooth(s)
    out.c1tp = out.c1p + _trap(sb, v1, h)
    out.c1tm = out.c1m + _trap(sb, v2, h)
    R = np.zeros((2, 2))
    if thermal:
        R += r_tb(tab, mom[0], mom[1], (out.c1p, out.c1m))
    if noise is not None and noise.weights:
        r11 = noise.r_k(v1, v1)
        r12 = noise.r_k(v1, v2)
        r22 = noise.r_k(v2, v2)
        R += np.array([[r11, r12], [r12, r22]])
        if "BB" in noise.weights:
            out.rBB = (noise.r_k(v1, v1, ["BB"]), noise.r_k(v1, v2, ["BB"]),
                       noise.r_k(v2, v2, ["BB"]))
    out.r11, out.r12, out.r22 = R[0, 0], 0.5 * (R[0, 1] + R[1, 0]), R[1, 1]
    return out


# --- quadratic form and read-off ------------------------------------------------

def quadratic_form(vu: VU, fn: MomentFunctionals, p: PhysicalParams,
                   tab: MatsubaraTable | None = None, initial: GaussianState | None = None,
                   convention: str = "derived"):
    """A (4x4 complex symmetric) and b over (x'', r'', x', r').

    ``initial=None`` selects the correlated thermal initial state (needs ``tab``);
    otherwise ``initial`` is a product-state Gaussian of the oscillator.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    hb = p.hbar
    k = p.m / hb
    sd = -1.0 if convention == "derived" else 1.0
    A = np.zeros((4, 4), dtype=complex)
    b = np.zeros(4, dtype=complex)
    A[X2, X2] = k * fn.r22
    A[X1, X1] = k * (fn.r11 - 2.0 * fn.c2p)
    A[X2, X1] = k * (fn.r12 - fn.c2m)
    A[X2, R2] = -1j * k * vu.du2_t
    A[X2, R1] = -1j * k * (vu.du1_t + fn.c1tm)
    A[X1, R2] = 1j * k * vu.du2_0
    A[X1, R1] = -1j * k * (sd * vu.du1_0 + fn.c1tp)
    if initial is None:
        if tab is None:
            raise ValueError("thermal initial state needs a Matsubara table")
        A[X1, X1] += k * tab.OmegaEq
        A[R1, R1] = k / tab.LambdaTB
    else:
        g = initial
        A[R1, R1] = 1.0 / g.sqq
        A[X1, X1] += (g.spp - g.sqp ** 2 / g.sqq) / hb ** 2
        A[X1, R1] += -1j / hb * g.sqp / g.sqq
        b[R1] = g.meanQ / g.sqq
        b[X1] += 1j / hb * (g.meanP - g.sqp * g.meanQ / g.sqq)
    b[X2] += 1j / hb * fn.eLm
    b[X1] += 1j / hb * fn.eLp
    A = np.where(A != 0, A, A.T)
    return A, b


def marginalize(A, b):
    """Integrate out (x', r'); returns the 2x2 form and vector over (x'', r'')."""
    f, i = [X2, R2], [X1, R1]
    Aii = A[np.ix_(i, i)]
    Afi = A[np.ix_(f, i)]
    sol = np.linalg.solve(Aii, np.column_stack([A[np.ix_(i, f)], b[i]]))
    At = A[np.ix_(f, f)] - Afi @ sol[:, :2]
    bt = b[f] - Afi @ sol[:, 2]
    return At, bt


def read_off(At, bt, hbar: float, tol: float = 1e-8):
    """(meanQ, meanP, sqq, sqp, spp) from the reduced Gaussian; imaginary parts checked."""
    sqq = 1.0 / At[1, 1]
    sqp = 1j * hbar * At[0, 1] * sqq
    spp = hbar ** 2 * At[0, 0] + sqp ** 2 / sqq
    q = bt[1] * sqq
    pm = -1j * hbar * bt[0] + sqp * q / sqq
    vals = [q, pm, sqq, sqp, spp]
    scale = max(abs(sqq), abs(spp), 1e-300)
    for z in vals:
        if abs(z.imag) > tol * max(abs(z.real), scale * 1e-6):
            raise NumericalError(f"moment read-off not real: {z}")
    return tuple(float(z.real) for z in vals)


def second_moments(vu: VU, fn: MomentFunctionals, p: PhysicalParams,
                   tab: MatsubaraTable | None = None, initial: GaussianState | None = None,
                   convention: str = "derived", qq_form: str = "schur") -> GaussianState:
    """Gaussian state at the snapshot time.

    ``qq_form='printed'`` replaces sigma_qq by the literal single-term variant
    M11 - (hbar/m) M12^2 (thermal initial state only); all other entries come
    from the full marginalisation.
    """
    if qq_form not in QQ_FORMS:
        raise ValueError(f"qq_form must be one of {QQ_FORMS}")
    A, b = quadratic_form(vu, fn, p, tab, initial, convention)
    At, bt = marginalize(A, b)
    q, pm, sqq, sqp, spp = read_off(At, bt, p.hbar)
    if qq_form == "printed" and initial is None:
        sd = -1.0 if convention == "derived" else 1.0
        m11 = tab.OmegaEq - 2.0 * fn.c2p + fn.r11
        m12sq = (fn.c1tp + sd * vu.du1_0) ** 2
        sqq = p.hbar / (p.m * vu.du2_0 ** 2) * (m11 + p.hbar / p.m * m12sq)
    gs = GaussianState(q, pm, sqq, sqp, spp, vu.t)
    if not (sqq > 0 and spp > 0) or gs.uncertainty < 0.25 * p.hbar ** 2 * (1 - 1e-6):
        gs.flags.append("uncertainty")
        warnings.warn(f"uncertainty relation violated at t={vu.t:.6g}", stacklevel=2)
    return gs


_UNIT = GaussianState(0.0, 0.0, 1.0, 0.0, 1.0)


def first_moments(vu: VU, fn: MomentFunctionals, p: PhysicalParams):
    """(<q>, <p>) for an initial state with zero means; independent of the noise."""
    zero = MomentFunctionals(t=fn.t, eLp=fn.eLp, eLm=fn.eLm)
    A, b = quadratic_form(vu, zero, p, initial=_UNIT)
    q, pm, *_ = read_off(*marginalize(A, b), p.hbar)
    return q, pm


def density_matrix(gs: GaussianState, r, x, hbar: float = 1.0):
    """rho(r'', x'') on the outer grid r x x (rows r, columns x)."""
    if not gs.sqq > 0:
        raise ValueError("sigma_qq must be positive")
    r = np.asarray(r, dtype=float)[:, None]
    x = np.asarray(x, dtype=float)[None, :]
    dq = r - gs.meanQ
    width = gs.spp - gs.sqp ** 2 / gs.sqq
    expo = (-dq ** 2 / (2 * gs.sqq) - width * x ** 2 / (2 * hbar ** 2)
            + 1j / hbar * x * (gs.meanP + gs.sqp / gs.sqq * dq))
    return np.exp(expo) / math.sqrt(2 * math.pi * gs.sqq)


# --- pipeline -------------------------------------------------------------------

def equilibrium_state(tab: MatsubaraTable) -> GaussianState:
    p = tab.p
    return GaussianState(0.0, 0.0, p.hbar / p.m * tab.LambdaTB, 0.0,
                         p.hbar * p.m * tab.OmegaEq, 0.0)


def params_hash(p: PhysicalParams, d: DriveSpec, grid: TimeGrid) -> str:
    blob = json.dumps({"p": asdict(p), "omegaP2": d.omegaP2.describe(),
                       "eLaser": d.eLaser.describe(), "tMax": grid.tMax,
                       "nSteps": grid.nSteps}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def mean_trajectory(p: PhysicalParams, d: DriveSpec, grid: TimeGrid):
    """(t, <q>, <p>) at the snapshots for zero initial means; no noise tables needed."""
    check(p, d, grid)
    kern = gamma_kernel("total", p)
    sols = solve_r_fundamental(p, d, kern, grid)
    reuse = d.omegaP2.is_zero
    out = []
    for k in grid.snapshot_indices():
        k = int(k)
        if k == 0:
            out.append((0.0, 0.0, 0.0))
            continue
        xs = (XSolutions(k, sols.phi2, sols.dphi2, sols.phi1, sols.dphi1) if reuse
              else solve_x_fundamental(k, p, d, kern, grid))
        vu = assemble_vu(sols, xs)
        fn = functionals(vu, grid, p, d, None, None, factorized=True)
        out.append((vu.t, *first_moments(vu, fn, p)))
    return np.array(out)


def simulate(p: PhysicalParams, d: DriveSpec, grid: TimeGrid, *,
             initial: GaussianState | None = None, convention: str = "derived",
             qq_form: str = "schur", reg: Regularization = Regularization(),
             tab: MatsubaraTable | None = None, noise: NoiseTable | None = None,
             step_check: bool = False, workers: int = 1) -> CovarianceTrajectory:
    """Run the full pipeline and return the states at the grid's snapshot indices.

    ``initial=None`` starts from the correlated thermal equilibrium of the
    oscillator and the thermal bath; a ``GaussianState`` starts from a
    product state.  A caustic at a snapshot yields a NaN state flagged
    'caustic' rather than aborting the run.  Snapshots are independent and
    are evaluated on ``workers`` threads; output order is the snapshot order.
    """
    check(p, d, grid)
    factorized = initial is not None
    if tab is None and (not factorized or p.gammaTB > 0) and not (factorized and p.markovian):
        tab = build_matsubara(p, grid)
    elif tab is not None and tab.c1 is None:
        from .spectral import c_sums
        tab.s = grid.s
        tab.c1, tab.c2 = c_sums(tab, grid.s)
    if noise is None:
        noise = build_noise_table(p, grid, reg)
    kern = gamma_kernel("total", p)
    sols = solve_r_fundamental(p, d, kern, grid, check=step_check)
    cf = c_functions(tab, p, grid) if (tab is not None and not factorized) else None
    reuse = d.omegaP2.is_zero
    start = initial if factorized else equilibrium_state(tab)
    def one(k):
        k = int(k)
        if k == 0:
            return (GaussianState(start.meanQ, start.meanP, start.sqq, start.sqp, start.spp, 0.0),
                    MomentFunctionals(t=0.0))
        if reuse:
            xs = XSolutions(k, sols.phi2, sols.dphi2, sols.phi1, sols.dphi1)
        else:
            xs = solve_x_fundamental(k, p, d, kern, grid)
        try:
            vu = assemble_vu(sols, xs)
        except NumericalError as exc:
            if "caustic" not in str(exc):
                raise
            nan = math.nan
            tk = float(grid.s[k])
            return (GaussianState(nan, nan, nan, nan, nan, tk, ["caustic"]),
                    MomentFunctionals(t=tk))
        fn = functionals(vu, grid, p, d, tab, noise, cf, factorized)
        return second_moments(vu, fn, p, tab, initial, convention, qq_form), fn

    idx = list(grid.snapshot_indices())
    if workers > 1 and len(idx) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(one, idx))
    else:
        pairs = [one(k) for k in idx]
    states = [a for a, _ in pairs]
    fns = [b for _, b in pairs]
    meta = {"paramsHash": params_hash(p, d, grid), "h": grid.h, "nSteps": grid.nSteps,
            "tMax": grid.tMax, "convention": convention, "qqForm": qq_form,
            "initial": "factorized" if factorized else "thermal",
            "nMatsubara": None if tab is None else tab.nTerms,
            "windowFactor": reg.windowFactor}
    return CovarianceTrajectory(states, fns, meta)
