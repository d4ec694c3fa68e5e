"""Orbits and the additive cocycles living over them.

An orbit segment of length n stores the n+1 points x, f x, ..., f^n x.  Its
trace holds the split log norms evaluated at the first n points, so the
ergodic sum S_n phi = sum_{i<n} phi(f^i x) is a plain prefix sum of the
trace and the additivity S_{n+m} = S_n + S_m o f^n is exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import PreconditionViolated
from .systems import SplitLogNorms, System

_FIELDS = ("phi_cs", "phi_cu", "j_cu")


@dataclass
class OrbitSegment:
    """Points x, f x, ..., f^n x of one forward orbit."""

    kind: str
    points: np.ndarray            # shape (length + 1, dim)

    @property
    def length(self) -> int:
        return self.points.shape[0] - 1

    @property
    def start(self) -> np.ndarray:
        return self.points[0]


@dataclass
class CocycleTrace:
    """Per-step log norms along an orbit; entry i belongs to the point f^i x."""

    phi_cs: np.ndarray
    phi_cu: np.ndarray
    j_cu: np.ndarray

    @property
    def horizon(self) -> int:
        return self.phi_cu.shape[0]

    def field(self, name: str) -> np.ndarray:
        if name not in _FIELDS:
            raise ValueError(f"unknown trace field '{name}'")
        return getattr(self, name)


def generate_orbit(system: System, start, n: int, rng=None) -> OrbitSegment:
    """Forward orbit of length n; start=None draws a uniform start from rng.

    Every visited point is checked against the system's domain, so a state
    that drifts out (a bug, not a feature of any shipped system) raises
    DomainEscape instead of silently corrupting downstream statistics.
    """
    if n < 0:
        raise ValueError("orbit length must be >= 0")
    if start is None:
        if rng is None:
            raise ValueError("need an rng to draw a random start")
        start = system.sample_uniform(rng, 1)[0]
    x = np.asarray(start, dtype=float)
    if x.shape != (system.dim,):
        raise ValueError(f"start must have shape ({system.dim},)")
    system.domain_check(x)
    pts = np.empty((n + 1, system.dim))
    pts[0] = x
    for i in range(n):
        x = system.step(x)
        system.domain_check(x)
        pts[i + 1] = x
    return OrbitSegment(kind=system.kind, points=pts)


def trace(system: System, orbit: OrbitSegment) -> CocycleTrace:
    """Split log norms along an orbit segment; empty for a length-0 orbit."""
    pts = orbit.points[:-1]
    if pts.shape[0] == 0:
        e = np.empty(0)
        return CocycleTrace(e.copy(), e.copy(), e.copy())
    norms = system.log_norms(pts)
    return CocycleTrace(
        phi_cs=np.asarray(norms.phi_cs, dtype=float),
        phi_cu=np.asarray(norms.phi_cu, dtype=float),
        j_cu=np.asarray(norms.j_cu, dtype=float),
    )


def orbit_trace(system: System, start, n: int, rng=None):
    orb = generate_orbit(system, start, n, rng=rng)
    return orb, trace(system, orb)


def partial_sums(values) -> np.ndarray:
    """S with S[0] = 0 and S[k] = sum of the first k entries."""
    values = np.asarray(values, dtype=float)
    out = np.empty(values.shape[0] + 1)
    out[0] = 0.0
    np.cumsum(values, out=out[1:])
    return out


def birkhoff_sum(values, n: Optional[int] = None) -> float:
    values = np.asarray(values, dtype=float)
    n = values.shape[0] if n is None else n
    if not (0 <= n <= values.shape[0]):
        raise ValueError("n out of range")
    return float(np.sum(values[:n]))


def birkhoff_average(values, n: Optional[int] = None) -> float:
    values = np.asarray(values, dtype=float)
    n = values.shape[0] if n is None else n
    if n <= 0:
        raise ValueError("need n >= 1 to average")
    return birkhoff_sum(values, n) / n


@dataclass
class LyapunovEstimate:
    field: str
    value: float
    stderr: float
    horizon: int
    count: int


def lyapunov(traces: Sequence[CocycleTrace], field: str) -> LyapunovEstimate:
    """Exponent estimate from finite-horizon averages across several orbits.

    For the cu field the reported number is -S_n phi_cu / n, the expansion
    exponent; for cs it is S_n phi_cs / n, the (negative) contraction
    exponent.  The spread across orbits gives the standard error.
    """
    if field not in ("phi_cs", "phi_cu"):
        raise ValueError("field must be 'phi_cs' or 'phi_cu'")
    if len(traces) == 0:
        raise PreconditionViolated("need at least one trace")
    horizon = min(t.horizon for t in traces)
    if horizon < 100:
        raise PreconditionViolated(f"horizon {horizon} < 100 is too short to average")
    sign = -1.0 if field == "phi_cu" else 1.0
    vals = np.array([sign * np.sum(t.field(field)[:horizon]) / horizon for t in traces])
    stderr = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return LyapunovEstimate(field=field, value=float(np.mean(vals)), stderr=stderr,
                            horizon=horizon, count=len(vals))


def nue_check(tr: CocycleTrace, c_u: float, n: Optional[int] = None) -> bool:
    """Strict nonuniform-expansion inequality S_n phi_cu < -c_u n at time n."""
    n = tr.horizon if n is None else n
    if not (1 <= n <= tr.horizon):
        raise ValueError("n out of range")
    return bool(np.sum(tr.phi_cu[:n]) < -c_u * n)
