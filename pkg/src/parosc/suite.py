"""Oracle checks and the acceptance criteria, shared by ``validate`` and the tests."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import oracles
from .model import DriveSpec, Harmonic, PhysicalParams, TimeGrid
from .moments import GaussianState, mean_trajectory, simulate
from .noise_kernels import (Regularization, build_noise_table, k_bb, k_tb_re,
                            k_tb_re_quadrature, noise_weights)
from .propagator import solve_r_fundamental
from .spectral import build_matsubara, c_sums, gamma_kernel, zeta_drude, zeta_quadrature


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    runtime: float = 0.0
    states: list = field(default_factory=list, repr=False)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<40s} {self.detail} ({self.runtime:.1f}s)"


def _timed(fn):
    def wrap(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.runtime = time.perf_counter() - t0
        return res
    wrap.__name__ = fn.__name__
    wrap.__doc__ = fn.__doc__
    return wrap


# --- acceptance criteria ----------------------------------------------------------

EQ_PARAMS = PhysicalParams(gammaTB=0.1, OmegaCutTB=10.0, betaTB=1.0)


@_timed
def criterion_equilibrium(nSteps: int = 1000, convention: str = "derived",
                          qq_form: str = "schur", tol: float = 1e-3) -> CheckResult:
    """1. Thermal initial state stays at (hbar/m) Lambda, 0, hbar m Omega_eq on [0, 10]."""
    p = EQ_PARAMS
    tab = build_matsubara(p)
    tr = simulate(p, DriveSpec(), TimeGrid.every(10.0, nSteps, max(1, nSteps // 100)),
                  convention=convention, qq_form=qq_form, tab=tab)
    qq0, pp0 = p.hbar / p.m * tab.LambdaTB, p.hbar * p.m * tab.OmegaEq
    dq = np.nanmax(np.abs(tr.column("sqq") / qq0 - 1))
    dp = np.nanmax(np.abs(tr.column("spp") / pp0 - 1))
    dqp = np.nanmax(np.abs(tr.column("sqp"))) / math.sqrt(qq0 * pp0)
    worst = max(dq, dp, dqp)
    ok = bool(worst < tol) and not np.isnan(tr.column("sqq")).any()
    return CheckResult("1 equilibrium stationarity", ok,
                       f"drift qq={dq:.2e} pp={dp:.2e} qp={dqp:.2e} tol={tol:g}",
                       states=tr.states)


@_timed
def criterion_factorized(tol: float = 1e-2) -> CheckResult:
    """2. Product initial state relaxes to the correlated equilibrium by t = 20/gamma."""
    p = PhysicalParams(gammaTB=0.2, OmegaCutTB=10.0, betaTB=1.0)
    tEnd = 20.0 / p.gammaTB
    tab = build_matsubara(p)
    g0 = GaussianState(1.0, 0.5, 0.5, 0.0, 0.5)
    tr = simulate(p, DriveSpec(), TimeGrid.every(tEnd, 5000, 250), initial=g0, tab=tab)
    qq0, pp0 = p.hbar / p.m * tab.LambdaTB, p.hbar * p.m * tab.OmegaEq
    eq = np.abs(tr.column("sqq") / qq0 - 1)
    ep = np.abs(tr.column("spp") / pp0 - 1)
    final = max(eq[-1], ep[-1], abs(tr.states[-1].meanQ) / math.sqrt(qq0),
                abs(tr.states[-1].meanP) / math.sqrt(pp0))
    late = tr.t >= 0.5 * tEnd
    mono = bool(np.all(np.diff(eq[late]) <= 1e-6) and np.all(np.diff(ep[late]) <= 1e-6))
    ok = bool(final < tol) and mono
    return CheckResult("2 factorized relaxation", ok,
                       f"final err={final:.2e} tol={tol:g} monotone late={mono}",
                       states=tr.states)


@_timed
def criterion_driven_mean(nSteps: int = 10000, tol: float = 1e-4) -> CheckResult:
    """3. <q(t)> under a sinusoidal force vs the classical Green-function convolution."""
    p = PhysicalParams(gammaTB=0.1, OmegaCutTB=math.inf)
    E = Harmonic(0.5, 0.8, -0.5 * math.pi)
    tr = mean_trajectory(p, DriveSpec(eLaser=E), TimeGrid.every(50.0, nSteps, nSteps // 100))
    ref = oracles.classical_driven_response(tr[:, 0], lambda s: float(E(s)), p.m, p.omega0,
                                            p.gammaTB)
    err = float(np.abs(tr[:, 1] - ref).max())
    return CheckResult("3 driven mean vs classical", err < tol, f"max abs err={err:.2e} tol={tol:g}")


def _laplace_error(n, p, tMax):
    grid = TimeGrid(tMax, n)
    sol = solve_r_fundamental(p, DriveSpec(), gamma_kernel("total", p), grid)
    ref = oracles.laplace_drude_solution(grid.s, p.omega0, p.gammaTB, p.OmegaCutTB)
    e1 = np.abs(sol.phi1 - ref[0]).max() / np.abs(ref[0]).max()
    e2 = np.abs(sol.phi2 - ref[2]).max() / np.abs(ref[2]).max()
    return max(e1, e2)


@_timed
def criterion_fundamental(nSteps: int = 4000, tol: float = 1e-4) -> CheckResult:
    """4. Volterra phi1, phi2 vs Laplace inversion; order 2 under step halving."""
    p = PhysicalParams(gammaTB=0.2, OmegaCutTB=10.0)
    ns = [nSteps // 4, nSteps // 2, nSteps]
    errs = [_laplace_error(n, p, 10.0) for n in ns]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    ok = errs[-1] < tol and all(abs(o - 2.0) <= 0.2 for o in orders)
    return CheckResult("4 fundamental solutions (Laplace)", bool(ok),
                       f"rel err={errs[-1]:.2e} tol={tol:g} orders={orders[0]:.3f},{orders[1]:.3f}")


def _growth(p, amp, wd, tMax, n, window):
    d = DriveSpec(omegaP2=Harmonic(amp, wd, -0.5 * math.pi))
    grid = TimeGrid(tMax, n)
    sol = solve_r_fundamental(p, d, gamma_kernel("total", p), grid)
    env = np.maximum(np.abs(sol.phi1), np.abs(sol.phi2))
    w = int(window / grid.h)
    return env[-w:].max() / env[:w].max()


@_timed
def criterion_parametric(tol: float = 1e-6) -> CheckResult:
    """5. Mathieu regime: Wronskian exp(-gamma s) and a boundedness flip across the tongue."""
    gam, wd = 0.1, 2.0
    p = PhysicalParams(gammaTB=gam, OmegaCutTB=math.inf)
    amp = 0.15
    grid = TimeGrid(20.0, 20000)
    d = DriveSpec(omegaP2=Harmonic(amp, wd, -0.5 * math.pi))
    sol = solve_r_fundamental(p, d, gamma_kernel("total", p), grid)
    W = sol.dphi1 * sol.phi2 - sol.phi1 * sol.dphi2
    werr = float(np.abs(W * np.exp(gam * grid.s) - 1.0).max())
    Ac = oracles.tongue_boundary(p.omega0, gam, wd, tol=1e-6)
    below = _growth(p, 0.8 * Ac, wd, 300.0, 30000, 20.0)
    above = _growth(p, 1.2 * Ac, wd, 300.0, 30000, 20.0)
    ok = werr < tol and below < 1.0 < above
    return CheckResult("5 parametric (Wronskian, tongue)", bool(ok),
                       f"wronskian err={werr:.2e} tol={tol:g} A_c={Ac:.4f} "
                       f"growth below={below:.3g} above={above:.3g}")


def _state_vector(tr):
    return np.array([[s.meanQ, s.meanP, s.sqq, s.sqp, s.spp] for s in tr.states])


@_timed
def criterion_blackbody(tol_equal: float = 1e-8, tol_window: float = 1e-2) -> CheckResult:
    """6. tauBB -> 0 reproduces the bb-off run; R^BB insensitive to doubling the window."""
    base = dict(gammaTB=0.1, OmegaCutTB=10.0, betaTB=1.0, betaBB=1.0, OmegaCutBB=10.0)
    d = DriveSpec(eLaser=Harmonic(0.2, 0.7, -0.5 * math.pi))
    grid = TimeGrid.every(5.0, 500, 50)
    off = simulate(PhysicalParams(**base), d, grid)
    on = simulate(PhysicalParams(**base, bbEnabled=True, tauBB=1e-12), d, grid)
    diff = float(np.abs(_state_vector(on) - _state_vector(off)).max())
    p = PhysicalParams(**base, bbEnabled=True, tauBB=1e-3)
    g2 = TimeGrid.every(10.0, 2000, 500)
    rb = []
    states = list(on.states)
    for wf in (10.0, 20.0):
        tr = simulate(p, DriveSpec(), g2, reg=Regularization(wf))
        rb.append(np.array([f.rBB for f in tr.functionals[1:]]))
        states += tr.states
    rel = np.abs(rb[1] - rb[0]) / np.abs(rb[0])
    sens = float(rel.max())
    off_diag = float(rel[:, 1].max())
    ok = diff < tol_equal and sens < tol_window
    return CheckResult("6 blackbody decoupling", bool(ok),
                       f"tau->0 diff={diff:.2e} tol={tol_equal:g}; window-doubling "
                       f"max rel={sens:.2e} (R12 {off_diag:.2e}) tol={tol_window:g}",
                       states=states)


@_timed
def criterion_zero_point() -> CheckResult:
    """7. At T_BB = 0 the vacuum kernel and R^BB survive."""
    p = PhysicalParams(gammaTB=0.0, betaTB=1.0, bbEnabled=True, tauBB=1e-3, OmegaCutBB=10.0,
                       betaBB=math.inf)
    kv = k_bb(0.0, p)
    tr = simulate(p, DriveSpec(), TimeGrid.every(2.0, 400, 100))
    r = np.array([f.rBB for f in tr.functionals[1:]])
    ok = kv.vacuum > 0 and kv.thermal == 0.0 and np.all(r[:, 0] > 0) and np.all(r[:, 2] > 0)
    return CheckResult("7 zero-point persistence", bool(ok),
                       f"K_BB vac(0)={kv.vacuum:.4g} thermal={kv.thermal:g} "
                       f"min R11^BB={r[:, 0].min():.3e}", states=tr.states)


def uncertainty_ok(states, hbar: float = 1.0) -> tuple[bool, float]:
    worst = math.inf
    for s in states:
        if math.isnan(s.sqq):
            continue
        worst = min(worst, s.uncertainty / (0.25 * hbar ** 2))
    return bool(worst >= 1.0 - 1e-6), worst


def criterion_uncertainty(results) -> CheckResult:
    """8. sigma_qq sigma_pp - sigma_qp^2 >= hbar^2/4 over every collected snapshot."""
    states = [s for r in results for s in r.states]
    ok, worst = uncertainty_ok(states)
    return CheckResult("8 uncertainty and purity", ok and bool(states),
                       f"{len(states)} states, min 4 det/hbar^2={worst:.6f}")


@_timed
def criterion_matsubara(tol: float = 1e-6) -> CheckResult:
    """9. Doubling N with the tail on changes Lambda, Omega_eq, C1, C2 by < tol."""
    p = EQ_PARAMS
    s = np.linspace(0.0, 10.0, 401)
    t1 = build_matsubara(p)
    t2 = build_matsubara(p, nTerms=2 * t1.nTerms)
    c1a, c2a = c_sums(t1, s)
    c1b, c2b = c_sums(t2, s)
    ch = [abs(t2.LambdaTB / t1.LambdaTB - 1), abs(t2.OmegaEq / t1.OmegaEq - 1),
          np.abs(c1b - c1a).max() / np.abs(c1a).max(), np.abs(c2b - c2a).max() / np.abs(c2a).max()]
    return CheckResult("9 Matsubara robustness", max(ch) < tol,
                       "N=%d rel changes " % t1.nTerms + " ".join(f"{c:.1e}" for c in ch))


@_timed
def criterion_classical(tol: float = 1e-2) -> CheckResult:
    """10. hbar beta omega0 = 0.01: equipartition for position and momentum."""
    p = PhysicalParams(gammaTB=0.01, OmegaCutTB=10.0, betaTB=0.01)
    tr = simulate(p, DriveSpec(), TimeGrid.every(2.0, 200, 50))
    kT = 1.0 / p.betaTB
    eq = np.abs(tr.column("sqq") / (kT / (p.m * p.omega0 ** 2)) - 1).max()
    ep = np.abs(tr.column("spp") / (p.m * kT) - 1).max()
    return CheckResult("10 high-temperature limit", bool(max(eq, ep) < tol),
                       f"qq rel={eq:.2e} pp rel={ep:.2e} tol={tol:g}", states=tr.states)


def acceptance(nSteps: int | None = None, convention: str = "derived", qq_form: str = "schur"):
    """All ten criteria in order; ``nSteps`` overrides the fundamental-solution grid."""
    out = [criterion_equilibrium(convention=convention, qq_form=qq_form),
           criterion_factorized(), criterion_driven_mean(),
           criterion_fundamental(**({} if nSteps is None else {"nSteps": nSteps})),
           criterion_parametric(), criterion_blackbody(), criterion_zero_point()]
    out.append(criterion_uncertainty([out[0], out[1], out[5], out[6]]))
    out += [criterion_matsubara(), criterion_classical()]
    out[7].states.clear()
    return out


# --- fast closed-form corners ------------------------------------------------------

def fast_checks():
    """Cheap oracle comparisons (seconds)."""
    reps = []
    t0 = time.perf_counter()
    p0 = PhysicalParams(gammaTB=0.0, betaTB=1.0)
    tab0 = build_matsubara(p0)
    reps.append(oracles.compare("Lambda at gamma=0 vs coth", tab0.LambdaTB,
                                0.5 / math.tanh(0.5), 1e-9, t0))
    t0 = time.perf_counter()
    p = EQ_PARAMS
    nu = 2 * math.pi / (p.hbar * p.betaTB)
    ss = np.array([0.0, 0.05, 0.3, 1.0])
    reps.append(oracles.compare("zeta_1(s) closed form vs quadrature",
                                zeta_drude(ss, nu, p.gammaTB, p.OmegaCutTB),
                                [zeta_quadrature(s, nu, p) for s in ss], 1e-8, t0))
    t0 = time.perf_counter()
    tab = build_matsubara(p)
    qq, pp = oracles.fdt_equilibrium_variance(p.m, p.omega0, p.gammaTB, p.OmegaCutTB, p.betaTB)
    reps.append(oracles.compare("equilibrium (Matsubara vs FDT)",
                                [tab.LambdaTB, tab.OmegaEq], [qq, pp], 1e-8, t0))
    t0 = time.perf_counter()
    ss = np.array([0.1, 0.5, 2.0])
    reps.append(oracles.compare("K_TB Matsubara vs frequency quadrature", k_tb_re(ss, tab),
                                [k_tb_re_quadrature(s, p) for s in ss], 1e-6, t0))
    t0 = time.perf_counter()
    err = _laplace_error(500, PhysicalParams(gammaTB=0.2, OmegaCutTB=10.0), 5.0)
    reps.append(oracles.OracleReport("phi Volterra vs Laplace (n=500)", err, err, 2e-3,
                                     time.perf_counter() - t0))
    t0 = time.perf_counter()
    grid = TimeGrid(3.0, 20)
    W = noise_weights(p, grid, spectrum=lambda w: np.exp(-np.asarray(w) ** 2))
    x, y = np.sin(grid.s) + grid.s, np.cos(2 * grid.s)
    f = np.linspace(0.0, 3.0, 3001)
    xf, yf = np.interp(f, grid.s, x), np.interp(f, grid.s, y)
    K = np.exp(-(f[:, None] - f[None, :]) ** 2 / 4) / (2 * math.sqrt(math.pi))
    wt = np.full(f.size, f[1])
    wt[[0, -1]] *= 0.5
    reps.append(oracles.compare("noise weights vs dense double integral", W.bilinear(x, y),
                                (wt * xf) @ K @ (wt * yf), 1e-6, t0))
    t0 = time.perf_counter()
    tr = simulate(p0, DriveSpec(), TimeGrid.every(3.0, 300, 30))
    ref = oracles.undamped_variance(p0.m, p0.omega0, p0.betaTB)
    reps.append(oracles.compare("undamped covariances constant", tr.column("sqq"),
                                np.full(len(tr.states), ref[0]), 1e-9, t0))
    return reps


__all__ = ["CheckResult", "acceptance", "fast_checks", "uncertainty_ok", "build_noise_table"]
