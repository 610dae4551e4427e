"""Physical parameters, drive profiles and time grids."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    """Oscillator, thermal-bath and radiation constants.

    ``OmegaCutTB = inf`` selects the Markovian (purely local) Ohmic bath.
    """

    m: float = 1.0
    omega0: float = 1.0
    hbar: float = 1.0
    kB: float = 1.0
    betaTB: float = 1.0
    betaBB: float = 1.0
    gammaTB: float = 0.1
    OmegaCutTB: float = 10.0
    tauBB: float = 0.0
    OmegaCutBB: float = 10.0
    bbEnabled: bool = False

    @property
    def markovian(self) -> bool:
        return math.isinf(self.OmegaCutTB)

    @property
    def bb_active(self) -> bool:
        return self.bbEnabled and self.tauBB > 0.0

    @property
    def M(self) -> float:
        """Renormalised mass m / (1 - tauBB * OmegaCutBB)."""
        if not self.bbEnabled:
            return self.m
        x = self.tauBB * self.OmegaCutBB
        if x >= 1.0:
            return math.nan
        return self.m / (1.0 - x)


class Profile:
    """A scalar time profile s -> value; subclasses are pure functions."""

    kind = "zero"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.zeros_like(s)

    @property
    def is_zero(self) -> bool:
        return True

    def carrier(self) -> float:
        return 0.0

    def describe(self) -> dict:
        return {"kind": self.kind}


ZERO = Profile()


@dataclass(frozen=True, eq=False)
class Harmonic(Profile):
    amplitude: float
    frequency: float
    phase: float = 0.0
    kind = "harmonic"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.amplitude * np.cos(self.frequency * s + self.phase)

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0.0

    def carrier(self) -> float:
        return abs(self.frequency)

    def describe(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude,
                "frequency": self.frequency, "phase": self.phase}


@dataclass(frozen=True, eq=False)
class GaussianPulse(Profile):
    amplitude: float
    center: float
    width: float
    carrier_freq: float = 0.0
    phase: float = 0.0
    kind = "gaussian"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        env = np.exp(-0.5 * ((s - self.center) / self.width) ** 2)
        return self.amplitude * env * np.cos(self.carrier_freq * (s - self.center) + self.phase)

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0.0

    def carrier(self) -> float:
        return abs(self.carrier_freq) + 1.0 / self.width

    def describe(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude, "center": self.center,
                "width": self.width, "carrier": self.carrier_freq, "phase": self.phase}


@dataclass(frozen=True, eq=False)
class Tabulated(Profile):
    """Linear interpolation through (s, value) knots; constant beyond the ends."""

    knots: tuple
    values: tuple
    source: str = ""
    kind = "tabulated"

    def __post_init__(self):
        if len(self.knots) != len(self.values) or len(self.knots) < 2:
            raise ValueError("tabulated profile needs >= 2 matching (s, value) pairs")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("tabulated knots must be strictly increasing")

    def __call__(self, s):
        return np.interp(np.asarray(s, dtype=float), self.knots, self.values)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def carrier(self) -> float:
        return 0.0

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        s, v = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    a, b = float(row[0]), float(row[1])
                except ValueError:
                    continue  # header
                s.append(a)
                v.append(b)
        return cls(tuple(s), tuple(v), source=str(Path(path)))

    def describe(self) -> dict:
        return {"kind": self.kind, "source": self.source, "n": len(self.knots)}


@dataclass(frozen=True)
class DriveSpec:
    """Parametric modulation omega_P^2(s) and laser force E_L(s)."""

    omegaP2: Profile = ZERO
    eLaser: Profile = ZERO


@dataclass(frozen=True)
class TimeGrid:
    tMax: float
    nSteps: int
    snapshots: Sequence[int] | None = None

    @property
    def h(self) -> float:
        return self.tMax / self.nSteps

    @property
    def s(self) -> np.ndarray:
        return np.linspace(0.0, self.tMax, self.nSteps + 1)

    def snapshot_indices(self) -> np.ndarray:
        if self.snapshots is None:
            return np.arange(1, self.nSteps + 1)
        idx = np.asarray(self.snapshots, dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() > self.nSteps):
            raise ValueError("snapshot index outside the grid")
        return idx

    @classmethod
    def every(cls, tMax: float, nSteps: int, stride: int) -> "TimeGrid":
        return cls(tMax, nSteps, tuple(range(stride, nSteps + 1, stride)))


@dataclass
class Validation:
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    M: float = math.nan

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_params(p: PhysicalParams, d: DriveSpec | None = None,
                    grid: TimeGrid | None = None) -> Validation:
    """Check physical admissibility; returns every violated invariant."""
    out = Validation(M=p.M)
    v = out.violations
    for name in ("m", "omega0", "betaTB", "betaBB", "hbar", "kB"):
        if not getattr(p, name) > 0:
            v.append(f"{name} must be > 0")
    if p.gammaTB < 0:
        v.append("gammaTB must be >= 0")
    if not p.OmegaCutTB > 0:
        v.append("OmegaCutTB must be > 0")
    if p.tauBB < 0:
        v.append("tauBB must be >= 0")
    if p.bbEnabled:
        if not p.OmegaCutBB > 0:
            v.append("OmegaCutBB must be > 0")
        if p.tauBB * p.OmegaCutBB >= 1.0:
            v.append("tauBB*OmegaCutBB >= 1: bare mass negative / causality bound violated")
    if d is not None:
        if abs(float(d.omegaP2(0.0))) > 1e-12:
            v.append("omegaP2 drive must vanish at t=0")
        if abs(float(d.eLaser(0.0))) > 1e-12:
            v.append("laser drive must vanish at t=0")
    if grid is not None:
        if grid.nSteps < 2 or not grid.tMax > 0:
            v.append("time grid needs tMax > 0 and nSteps >= 2")
        else:
            fast = [p.omega0]
            if not p.markovian:
                fast.append(p.OmegaCutTB)
            if p.bb_active:
                fast.append(p.OmegaCutBB)
            if d is not None:
                fast += [d.omegaP2.carrier(), d.eLaser.carrier()]
            if grid.h * max(fast) > 0.2:
                out.warnings.append(
                    f"coarse grid: h*max frequency = {grid.h * max(fast):.3g} > 0.2")
            if max(fast) > 1e3 * p.omega0:
                v.append("cutoff above 1e3*omega0; rescale units")
    return out


def check(p: PhysicalParams, d: DriveSpec | None = None, grid: TimeGrid | None = None) -> None:
    """Raise ``PhysicsError`` on any violation; emit warnings for soft ones."""
    res = validate_params(p, d, grid)
    for w in res.warnings:
        warnings.warn(w, stacklevel=2)
    if not res.ok:
        raise PhysicsError("; ".join(res.violations))


class PhysicsError(ValueError):
    """Inadmissible physical parameters."""


class NumericalError(RuntimeError):
    """Numerical breakdown (caustic, non-convergence, ill conditioning)."""
