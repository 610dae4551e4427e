"""Command-line front end: ``simulate``, ``validate``, ``kernels``, ``equilibrium``.

Configs are flat ``key = value`` files (``#`` starts a comment)::

    bath.gamma = 0.1
    bath.Omega = 10
    bath.beta = 1
    grid.tMax = 10
    grid.nSteps = 1000
    drive.laser.kind = harmonic
    drive.laser.amplitude = 0.2
    drive.laser.frequency = 0.9
    drive.laser.phase = -1.5707963267948966

Exit codes: 0 ok, 2 config error, 3 physics violation, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (ZERO, DriveSpec, GaussianPulse, Harmonic, NumericalError, PhysicalParams,
                    PhysicsError, Tabulated, TimeGrid, validate_params)
from .moments import GaussianState, density_matrix, equilibrium_state, simulate
from .noise_kernels import Regularization, k_bb, k_tb_re
from .spectral import build_matsubara, c_sums, gamma_kernel

log = logging.getLogger("parosc")

THREADS_ENV = "PAROSC_THREADS"


class ConfigError(ValueError):
    pass


# key -> (type, default); a default of REQUIRED must be supplied
REQUIRED = object()
SCHEMA = {
    "osc.m": (float, 1.0),
    "osc.omega0": (float, 1.0),
    "units.hbar": (float, 1.0),
    "units.kB": (float, 1.0),
    "bath.gamma": (float, REQUIRED),
    "bath.Omega": (float, 10.0),
    "bath.beta": (float, REQUIRED),
    "bb.enabled": (bool, False),
    "bb.tau": (float, 0.0),
    "bb.Omega": (float, 10.0),
    "bb.beta": (float, 1.0),
    "bb.windowFactor": (float, 10.0),
    "grid.tMax": (float, REQUIRED),
    "grid.nSteps": (int, REQUIRED),
    "grid.stride": (int, 1),
    "initial.kind": (str, "thermal"),
    "initial.q": (float, 0.0),
    "initial.p": (float, 0.0),
    "initial.sqq": (float, 0.5),
    "initial.sqp": (float, 0.0),
    "initial.spp": (float, 0.5),
    "solver.convention": (str, "derived"),
    "solver.qqForm": (str, "schur"),
    "solver.stepCheck": (bool, False),
    "output.dir": (str, "."),
    "output.prefix": (str, "run"),
    "output.density": (bool, False),
    "output.densityPoints": (int, 41),
}
PROFILE_KEYS = {"kind": str, "amplitude": float, "frequency": float, "phase": float,
                "center": float, "width": float, "carrier": float, "file": str}
PROFILE_ROOTS = ("drive.omegaP2", "drive.laser")


def _to_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _convert(typ, raw: str):
    if typ is bool:
        return _to_bool(raw)
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)  # accepts inf
    return raw


def _lookup(key):
    if key in SCHEMA:
        return SCHEMA[key][0]
    for root in PROFILE_ROOTS:
        if key.startswith(root + "."):
            sub = key[len(root) + 1:]
            if sub in PROFILE_KEYS:
                return PROFILE_KEYS[sub]
    return None


def parse_config(text: str, source: str = "<config>") -> dict:
    """Flat dotted keys -> typed values; errors carry the line number."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (x.strip() for x in body.split("=", 1))
        typ = _lookup(key)
        if typ is None:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        try:
            raw[key] = _convert(typ, val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for '{key}': {exc}") from None
    for key, (_, default) in SCHEMA.items():
        if key not in raw:
            if default is REQUIRED:
                raise ConfigError(f"{source}: missing required key '{key}'")
    return raw


@dataclass
class RunConfig:
    params: PhysicalParams
    drive: DriveSpec
    grid: TimeGrid
    reg: Regularization
    initial: GaussianState | None
    convention: str
    qqForm: str
    stepCheck: bool
    outDir: Path
    prefix: str
    density: bool
    densityPoints: int
    used: dict = field(default_factory=dict)


def _profile(cfg: dict, root: str, used: dict, base: Path):
    def get(k, default=REQUIRED):
        key = f"{root}.{k}"
        if key in cfg:
            used[key] = cfg[key]
            return cfg[key]
        if default is REQUIRED:
            raise ConfigError(f"missing required key '{key}'")
        used[key] = default
        return default

    kind = get("kind", "none")
    if kind == "none":
        return ZERO
    if kind == "harmonic":
        return Harmonic(get("amplitude"), get("frequency"), get("phase", 0.0))
    if kind == "gaussian":
        return GaussianPulse(get("amplitude"), get("center"), get("width"),
                             get("carrier", 0.0), get("phase", 0.0))
    if kind == "table":
        path = Path(get("file"))
        path = path if path.is_absolute() else base / path
        try:
            return Tabulated.from_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{root}.file: {exc}") from None
    raise ConfigError(f"{root}.kind must be none, harmonic, gaussian or table (got {kind!r})")


def build_run(cfg: dict, base: Path = Path(".")) -> RunConfig:
    used = {}

    def get(key):
        val = cfg.get(key, SCHEMA[key][1])
        used[key] = val
        return val

    p = PhysicalParams(m=get("osc.m"), omega0=get("osc.omega0"), hbar=get("units.hbar"),
                       kB=get("units.kB"), betaTB=get("bath.beta"), betaBB=get("bb.beta"),
                       gammaTB=get("bath.gamma"), OmegaCutTB=get("bath.Omega"),
                       tauBB=get("bb.tau"), OmegaCutBB=get("bb.Omega"),
                       bbEnabled=get("bb.enabled"))
    d = DriveSpec(_profile(cfg, "drive.omegaP2", used, base),
                  _profile(cfg, "drive.laser", used, base))
    n, stride = get("grid.nSteps"), get("grid.stride")
    if stride < 1:
        raise ConfigError("grid.stride must be >= 1")
    grid = TimeGrid(get("grid.tMax"), n, tuple(range(0, n + 1, stride)))
    kind = get("initial.kind")
    if kind == "thermal":
        initial = None
    elif kind == "factorized":
        initial = GaussianState(get("initial.q"), get("initial.p"), get("initial.sqq"),
                                get("initial.sqp"), get("initial.spp"))
    else:
        raise ConfigError("initial.kind must be thermal or factorized")
    conv, qq = get("solver.convention"), get("solver.qqForm")
    if conv not in ("derived", "printed") or qq not in ("schur", "printed"):
        raise ConfigError("solver.convention in {derived, printed}, solver.qqForm in {schur, printed}")
    return RunConfig(p, d, grid, Regularization(get("bb.windowFactor")), initial, conv, qq,
                     get("solver.stepCheck"), Path(get("output.dir")), get("output.prefix"),
                     get("output.density"), get("output.densityPoints"), used)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return build_run(parse_config(text, str(path)), path.parent)


# --- output -----------------------------------------------------------------------

def _g(x) -> str:
    return format(float(x), ".17g")


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([c if isinstance(c, str) else _g(c) for c in r])
    return buf.getvalue()


MOMENT_COLUMNS = ["t", "meanQ", "meanP", "sqq", "sqp", "spp", "uncertaintyProduct", "flags"]


def moments_csv(traj) -> str:
    rows = [[s.time, s.meanQ, s.meanP, s.sqq, s.sqp, s.spp, s.uncertainty,
             ";".join(s.flags)] for s in traj.states]
    return _csv(MOMENT_COLUMNS, rows)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _physics_gate(rc: RunConfig):
    res = validate_params(rc.params, rc.drive, rc.grid)
    for w in res.warnings:
        log.warning(w)
    if not res.ok:
        raise PhysicsError("; ".join(res.violations))


def run_simulate(rc: RunConfig, dump_fundamentals: bool = False) -> dict:
    _physics_gate(rc)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        traj = simulate(rc.params, rc.drive, rc.grid, initial=rc.initial,
                        convention=rc.convention, qq_form=rc.qqForm, reg=rc.reg,
                        step_check=rc.stepCheck, workers=_threads())
    out = rc.outDir
    files = {"moments": out / f"{rc.prefix}_moments.csv"}
    atomic_write(files["moments"], moments_csv(traj))
    flagged = [s.time for s in traj.states if s.flags]
    if rc.density:
        last = next((s for s in reversed(traj.states) if not s.flags), None)
        if last is not None:
            npts = rc.densityPoints
            r = last.meanQ + np.linspace(-5, 5, npts) * math.sqrt(last.sqq)
            wx = rc.params.hbar / math.sqrt(max(last.spp - last.sqp ** 2 / last.sqq, 1e-300))
            x = np.linspace(-5, 5, npts) * wx
            rho = density_matrix(last, r, x, rc.params.hbar)
            rows = [[ri, xj, rho[i, j].real, rho[i, j].imag]
                    for i, ri in enumerate(r) for j, xj in enumerate(x)]
            files["density"] = out / f"{rc.prefix}_density.csv"
            atomic_write(files["density"], _csv(["r", "x", "re", "im"], rows))
    if dump_fundamentals:
        from .propagator import solve_r_fundamental
        sols = solve_r_fundamental(rc.params, rc.drive, gamma_kernel("total", rc.params), rc.grid)
        files["fundamentals"] = out / f"{rc.prefix}_fundamentals.csv"
        atomic_write(files["fundamentals"], _csv(
            ["s", "phi1", "dphi1", "phi2", "dphi2"],
            zip(sols.s, sols.phi1, sols.dphi1, sols.phi2, sols.dphi2)))
    summary = {"config": rc.used, "meta": traj.meta, "snapshots": len(traj.states),
               "flaggedTimes": flagged, "files": {k: str(v) for k, v in files.items()}}
    files["summary"] = out / f"{rc.prefix}_summary.json"
    summary["files"]["summary"] = str(files["summary"])
    atomic_write(files["summary"], json.dumps(summary, indent=2, sort_keys=True, default=_json))
    return summary


def _json(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def run_kernels(rc: RunConfig, points: int = 201) -> dict:
    """Tabulate damping and noise kernels on [0, tMax]."""
    _physics_gate(rc)
    p = rc.params
    s = np.linspace(0.0, rc.grid.tMax, points)
    gtb = gamma_kernel("TB", p)
    gbb = gamma_kernel("BB", p)
    cols = {"s": s, "gammaTB": gtb.smooth(s), "gammaBB": gbb.smooth(s)}
    if p.gammaTB > 0 and not p.markovian:
        tab = build_matsubara(p)
        cols["C1"], cols["C2"] = c_sums(tab, s)
        cols["K_TB"] = k_tb_re(s, tab)
    if p.bb_active:
        vals = [k_bb(si, p, rc.reg) for si in s]
        cols["K_BB_thermal"] = np.array([v.thermal for v in vals])
        cols["K_BB_vacuum"] = np.array([v.vacuum for v in vals])
    path = rc.outDir / f"{rc.prefix}_kernels.csv"
    atomic_write(path, _csv(list(cols), zip(*cols.values())))
    return {"file": str(path), "columns": list(cols),
            "localTB": gtb.localCoeff, "localBB": gbb.localCoeff}


def run_equilibrium(rc: RunConfig) -> dict:
    from .oracles import fdt_equilibrium_variance
    _physics_gate(rc)
    p = rc.params
    tab = build_matsubara(p)
    st = equilibrium_state(tab)
    qq, pp = fdt_equilibrium_variance(p.m, p.omega0, p.gammaTB, p.OmegaCutTB, p.betaTB, p.hbar)
    return {"LambdaTB": tab.LambdaTB, "OmegaEq": tab.OmegaEq, "sqq": st.sqq, "spp": st.spp,
            "nMatsubara": tab.nTerms, "fdt": {"sqq": qq, "spp": pp},
            "uncertaintyProduct": st.uncertainty}


def run_validate(full: bool, nSteps=None, convention="derived", qq_form="schur") -> bool:
    from .suite import acceptance, fast_checks
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reps = fast_checks()
        ok = True
        for r in reps:
            print(r.line())
            ok &= r.passed
        if full:
            for r in acceptance(nSteps, convention, qq_form):
                print(r.line())
                ok &= r.passed
    print("all passed" if ok else "FAILURES")
    return ok


# --- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parosc", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    s = sub.add_parser("simulate", help="run a configuration and write moments")
    s.add_argument("config")
    s.add_argument("--dump-fundamentals", action="store_true",
                   help="also write phi1, phi2 and derivatives on the grid")
    v = sub.add_parser("validate", help="oracle checks (fast) or all acceptance criteria (--full)")
    v.add_argument("--full", action="store_true")
    v.add_argument("--steps", type=int, default=None,
                   help="override the grid of the fundamental-solution criterion")
    v.add_argument("--convention", choices=("derived", "printed"), default="derived")
    v.add_argument("--qq-form", choices=("schur", "printed"), default="schur")
    k = sub.add_parser("kernels", help="tabulate kernels for a configuration")
    k.add_argument("config")
    k.add_argument("--points", type=int, default=201)
    e = sub.add_parser("equilibrium", help="static equilibrium moments for a configuration")
    e.add_argument("config")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.cmd == "validate":
            return 0 if run_validate(args.full, args.steps, args.convention, args.qq_form) else 1
        rc = load_config(args.config)
        if args.cmd == "simulate":
            res = run_simulate(rc, args.dump_fundamentals)
        elif args.cmd == "kernels":
            res = run_kernels(rc, args.points)
        else:
            res = run_equilibrium(rc)
        print(json.dumps(res, indent=2, sort_keys=True, default=_json))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PhysicsError as exc:
        print(f"physics violation: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
