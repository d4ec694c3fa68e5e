"""Coherent schedules, their densities, and the coherent block.

A schedule here is the event set of a named detector (hyperbolic or
inverse-hyperbolic times) along an orbit.  Because detection only looks at
suffix windows of the trace, these schedules satisfy the shift property
(n detected at x implies n - j detected at f^j x) and the concatenation
property exactly; coherence_check re-derives both on concrete orbits and
is expected to find nothing.

The coherent block is the set of points x whose whole backward orbit
realizes the events: j is an event of the schedule at f^(-j) x for every
j >= 0, truncated at J in practice.  Its measure equals the schedule's
asymptotic upper density; block_theorem_check estimates both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .cocycle import CocycleTrace, generate_orbit, trace
from .errors import PreconditionViolated
from .hyptimes import TimeSet, hyperbolic_times, inverse_hyperbolic_times
from .parallel import map_chunked, rng_for
from .systems import System, SystemSpec, build_system

DETECTOR_FIELDS = {"hyperbolic": "phi_cu", "inverse": "phi_cs"}


@dataclass(frozen=True)
class EventDetector:
    """Named detector plus the inequality convention flag."""

    kind: str                      # "hyperbolic" or "inverse"
    strict: bool = False

    def __post_init__(self):
        if self.kind not in DETECTOR_FIELDS:
            raise PreconditionViolated(
                f"detector kind must be one of {sorted(DETECTOR_FIELDS)}")

    @property
    def field(self) -> str:
        return DETECTOR_FIELDS[self.kind]

    def times(self, tr, sigma: float) -> TimeSet:
        if self.kind == "hyperbolic":
            return hyperbolic_times(tr, sigma, strict=self.strict)
        return inverse_hyperbolic_times(tr, sigma, strict=self.strict)


def resolve_detector(detector) -> EventDetector:
    if isinstance(detector, EventDetector):
        return detector
    return EventDetector(kind=str(detector))


@dataclass
class ScheduleMask:
    """Indicator of schedule membership over [0, horizon).

    Index 0 is always a member: the defining inequalities at n = 0 are an
    empty conjunction, and the block convention needs 0 in U.
    """

    horizon: int
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.horizon,):
            raise ValueError("mask must have shape (horizon,)")
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_timeset(cls, ts: TimeSet) -> "ScheduleMask":
        if ts.horizon < 1:
            raise PreconditionViolated("need horizon >= 1")
        mask = np.zeros(ts.horizon, dtype=bool)
        mask[0] = True
        inside = ts.times[(ts.times >= 1) & (ts.times < ts.horizon)]
        mask[inside] = True
        return cls(horizon=ts.horizon, mask=mask)

    def count_before(self, n: int) -> int:
        return int(np.sum(self.mask[:n]))


def density_grid(horizon: int, points: int = 5) -> np.ndarray:
    """Logarithmic grid over the trailing half [horizon/2, horizon].

    The upper density is a limsup; sampling only the trailing half keeps
    early-orbit transients from inflating the proxy.
    """
    if horizon < 1:
        raise PreconditionViolated("need horizon >= 1")
    lo = max(1, (horizon + 1) // 2)
    return np.unique(np.round(np.geomspace(lo, horizon, points)).astype(np.int64))


def density_plus(mask: Union[ScheduleMask, TimeSet], grid=None) -> float:
    """Finite-horizon limsup proxy: max over the grid of (1/n) #(U cap [0, n))."""
    if isinstance(mask, TimeSet):
        mask = ScheduleMask.from_timeset(mask)
    g = density_grid(mask.horizon) if grid is None else np.asarray(grid, dtype=np.int64)
    best = 0.0
    for n in g:
        best = max(best, mask.count_before(int(n)) / int(n))
    return best


# -- coherence -------------------------------------------------------------


@dataclass
class CoherenceReport:
    horizon: int
    shift_checked: int
    concat_checked: int
    shift_violations: List[Tuple[int, int]]       # (j, n) with n - j missing
    concat_violations: List[Tuple[int, int]]      # (n, m) with n + m missing

    @property
    def ok(self) -> bool:
        return not self.shift_violations and not self.concat_violations


def schedule_family_violations(sets: Sequence[Set[int]],
                               horizon: int) -> CoherenceReport:
    """Check shift and concatenation on a family sets[j] = U(f^j x).

    Events are read up to the horizon; sets must cover j in [0, horizon).
    Exposed separately so corrupted families can be fed in as a negative
    control.
    """
    if len(sets) < horizon:
        raise PreconditionViolated("need one event set per shift j < horizon")
    u0 = sorted(t for t in sets[0] if 1 <= t <= horizon)
    shift_checked = concat_checked = 0
    shift_bad: List[Tuple[int, int]] = []
    concat_bad: List[Tuple[int, int]] = []
    for n in u0:
        for j in range(1, n):
            shift_checked += 1
            if (n - j) not in sets[j]:
                shift_bad.append((j, n))
    for n in u0:
        if n >= horizon:
            continue
        for m in sorted(sets[n]):
            if m < 1 or n + m > horizon:
                continue
            concat_checked += 1
            if (n + m) not in sets[0]:
                concat_bad.append((n, m))
    return CoherenceReport(horizon=horizon, shift_checked=shift_checked,
                           concat_checked=concat_checked,
                           shift_violations=shift_bad,
                           concat_violations=concat_bad)


def detector_family(system: System, x, detector, sigma: float,
                    horizon: int) -> List[Set[int]]:
    """U(f^j x) for j in [0, horizon), each computed on a fresh length-horizon
    trace of the shifted orbit, exactly as the definition reads."""
    det = resolve_detector(detector)
    orb = generate_orbit(system, x, 2 * horizon)
    tr = trace(system, orb)
    vals = tr.field(det.field)
    out: List[Set[int]] = []
    for j in range(horizon):
        ts = det.times(vals[j:j + horizon], sigma)
        out.append(set(int(t) for t in ts.times))
    return out


def coherence_check(system: System, x, detector, horizon: int,
                    sigma: float) -> CoherenceReport:
    if horizon < 1:
        raise PreconditionViolated("need horizon >= 1")
    family = detector_family(system, x, detector, sigma, horizon)
    return schedule_family_violations(family, horizon)


# -- block membership ------------------------------------------------------


@dataclass
class BlockMembership:
    member: bool
    truncation: int
    vacuous: bool          # True when J = 0, where membership is by convention


def _backward_prefix_ok(system: System, x: np.ndarray, field: str,
                        log_sigma: float, J: int, strict: bool) -> np.ndarray:
    """For each row x: whether sum_{l<=k} phi(f^(-l) x) <= k log sigma for
    every 1 <= k <= J, streamed over the backward orbit."""
    m = x.shape[0]
    ok = np.ones(m, dtype=bool)
    run = np.zeros(m)
    y = x
    for k in range(1, J + 1):
        y = system.step_inverse(y)
        vals = getattr(system.log_norms(y), field)
        run += np.asarray(vals, dtype=float) - log_sigma
        if strict:
            ok &= run < 0.0
        else:
            ok &= run <= 0.0
    return ok


def block_membership(system: System, x, detector, sigma: float,
                     J: int) -> BlockMembership:
    """j is an event of the schedule at f^(-j) x for every 0 <= j <= J.

    Equivalent, through the suffix form of the detector, to the single
    prefix condition along the backward orbit y_l = f^(-l) x:
    sum_{l<=k} phi(y_l) <= k log sigma for all k <= J.
    """
    det = resolve_detector(detector)
    if J < 0:
        raise PreconditionViolated("J must be >= 0")
    if not (0.0 < sigma < 1.0):
        raise PreconditionViolated("sigma must lie in (0, 1)")
    if J == 0:
        return BlockMembership(member=True, truncation=0, vacuous=True)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ok = _backward_prefix_ok(system, x, det.field, math.log(sigma), J, det.strict)
    return BlockMembership(member=bool(ok[0]), truncation=J, vacuous=False)


@dataclass
class BlockEstimate:
    mu_block: float
    mu_stderr: float
    d_plus: float
    d_plus_stderr: float
    truncation: int
    samples: int
    horizon: int
    sigma: float
    detector: str


def _density_scan(system: System, x: np.ndarray, field: str, log_sigma: float,
                  horizon: int, strict: bool) -> np.ndarray:
    """Per-orbit density_plus of the detector schedule, streamed forward."""
    m = x.shape[0]
    grid = density_grid(horizon)
    s = np.zeros(m)
    runmin = np.zeros(m)
    events = np.zeros(m, dtype=np.int64)
    best = np.zeros(m)
    gi = 0
    for t in range(1, horizon + 1):
        # check a grid point n = t before processing time t, so events
        # counted lie in [1, n)
        while gi < grid.size and grid[gi] == t:
            np.maximum(best, (1 + events) / t, out=best)
            gi += 1
        vals = getattr(system.log_norms(x), field)
        s += np.asarray(vals, dtype=float) - log_sigma
        hit = (s < runmin) if strict else (s <= runmin)
        events += hit
        np.minimum(runmin, s, out=runmin)
        x = system.step(x)
    # the grid lies in [1, horizon], so every checkpoint was consumed
    return best


def _history_prefix_ok(system: System, hist: np.ndarray, end: int, field: str,
                       log_sigma: float, J: int, strict: bool) -> np.ndarray:
    """Backward prefix condition read off a stored forward path.

    hist is a ring buffer of J+1 consecutive orbit points ending at time
    end; walking it backward gives the exact backward orbit, with none of
    the precision loss of inverting a strongly contracting fiber.
    """
    span = hist.shape[0]
    m = hist.shape[1]
    ok = np.ones(m, dtype=bool)
    run = np.zeros(m)
    for l in range(1, J + 1):
        y = hist[(end - l) % span]
        vals = getattr(system.log_norms(y), field)
        run += np.asarray(vals, dtype=float) - log_sigma
        if strict:
            ok &= run < 0.0
        else:
            ok &= run <= 0.0
    return ok


def _block_chunk(idx, start, stop, payload):
    (spec, kind, strict, sigma, J, horizon, burn_in, seed) = payload
    system = build_system(spec)
    m = stop - start
    rng = rng_for(seed, idx)
    x = system.sample_uniform(rng, m)
    hist = np.empty((J + 1, m, system.dim))
    for t in range(burn_in + 1):
        hist[t % (J + 1)] = x
        if t < burn_in:
            x = system.step(x)
    ls = math.log(sigma)
    field = DETECTOR_FIELDS[kind]
    members = _history_prefix_ok(system, hist, burn_in, field, ls, J, strict)
    dens = _density_scan(system, x, field, ls, horizon, strict)
    return (m, int(np.sum(members)), float(np.sum(dens)),
            float(np.sum(dens * dens)))


def block_theorem_check(system: System, detector, sigma: float, M: int,
                        J: int, horizon: int, burn_in: Optional[int] = None,
                        seed=0, workers: int = 1) -> BlockEstimate:
    """Estimate mu(B_U) and the mean upper density d+ from one SRB sample.

    Membership uses the backward orbit truncated at J; burn-in must exceed
    J comfortably so backward iteration stays on the attractor tube.
    """
    det = resolve_detector(detector)
    if not system.invertible:
        raise PreconditionViolated("block membership needs an invertible system")
    if M < 1 or J < 1 or horizon < 1:
        raise PreconditionViolated("need M >= 1, J >= 1, horizon >= 1")
    if not (0.0 < sigma < 1.0):
        raise PreconditionViolated("sigma must lie in (0, 1)")
    if burn_in is None:
        burn_in = J + 16
    if burn_in < J + 8:
        raise PreconditionViolated(
            f"burn_in {burn_in} too small for backward truncation J={J}")
    payload = (system.spec, det.kind, det.strict, sigma, J, horizon,
               burn_in, seed)
    res = map_chunked(_block_chunk, payload, M, workers=workers)
    count = sum(r[0] for r in res)
    members = sum(r[1] for r in res)
    s1 = math.fsum(r[2] for r in res)
    s2 = math.fsum(r[3] for r in res)
    mu = members / count
    mu_se = math.sqrt(max(mu * (1.0 - mu), 0.0) / count)
    dmean = s1 / count
    dvar = max(s2 / count - dmean * dmean, 0.0)
    d_se = math.sqrt(dvar / count)
    return BlockEstimate(mu_block=mu, mu_stderr=mu_se, d_plus=dmean,
                         d_plus_stderr=d_se, truncation=J, samples=count,
                         horizon=horizon, sigma=sigma, detector=det.kind)
