"""Pliss-type time detection along cocycle traces.

All detectors share one running-extremum scan.  Writing S for the partial
sums of the shifted sequence (values - threshold), an index n is detected
exactly when S[n] <= min_{m < n} S[m]; the scan is O(N) and needs no
window recomputation.  Ties sit on the boundary of the defining
inequality and count as detections by default; the strict variant is
available behind a flag so both conventions can be compared.

Index convention: a detected time n in [1, N] certifies every suffix
window ending at n, i.e. sum_{j=n-k}^{n-1} values[j] <= k * threshold for
all 1 <= k <= n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .cocycle import CocycleTrace, partial_sums
from .errors import PreconditionViolated
from .systems import System

ArrayLike = Union[np.ndarray, list, tuple]


@dataclass(frozen=True)
class RateParams:
    """Expansion/contraction rates and the derived detector parameters.

    From a rate c and a uniform bound phibar on the relevant log norm the
    detector threshold is sigma = exp(-7c/8) and the guaranteed density of
    detected times is theta = c / (8 phibar - 7c).
    """

    c_u: float
    c_s: float
    phibar_cu: float
    phibar_cs: float

    def __post_init__(self):
        if not (0.0 < self.c_u <= self.phibar_cu):
            raise PreconditionViolated(
                f"need 0 < c_u <= phibar_cu, got c_u={self.c_u}, phibar_cu={self.phibar_cu}")
        if self.c_s < 0.0 or (self.c_s > 0.0 and self.c_s > self.phibar_cs):
            raise PreconditionViolated(
                f"need 0 <= c_s <= phibar_cs, got c_s={self.c_s}, phibar_cs={self.phibar_cs}")

    @property
    def sigma_u(self) -> float:
        return math.exp(-7.0 * self.c_u / 8.0)

    @property
    def sigma_s(self) -> float:
        return math.exp(-7.0 * self.c_s / 8.0)

    @property
    def theta_u(self) -> float:
        return self.c_u / (8.0 * self.phibar_cu - 7.0 * self.c_u)

    @property
    def theta_s(self) -> float:
        if self.c_s == 0.0:
            return 0.0
        return self.c_s / (8.0 * self.phibar_cs - 7.0 * self.c_s)

    @classmethod
    def from_system(cls, system: System, c_u: float, c_s: float = 0.0) -> "RateParams":
        return cls(c_u=c_u, c_s=c_s,
                   phibar_cu=system.phibar_cu, phibar_cs=system.phibar_cs)


@dataclass
class TimeSet:
    """Sorted detected times within [0, horizon]."""

    horizon: int
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.int64)
        if t.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if t.size and (np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > self.horizon):
            raise ValueError("times must be strictly increasing within [0, horizon]")
        object.__setattr__(self, "times", t)

    @property
    def count(self) -> int:
        return int(self.times.size)

    def __contains__(self, n) -> bool:
        i = np.searchsorted(self.times, n)
        return bool(i < self.times.size and self.times[i] == n)


def frequency(ts: TimeSet) -> float:
    """Fraction of the horizon covered by detected times."""
    if ts.horizon <= 0:
        raise PreconditionViolated("frequency needs horizon >= 1")
    return ts.count / ts.horizon


def _forward_scan(values: np.ndarray, threshold: float, strict: bool) -> np.ndarray:
    """Indices n in [1, N] with S[n] <= (or <) min over S[0..n-1]."""
    s = partial_sums(values - threshold)
    runmin = np.minimum.accumulate(s)
    if strict:
        hit = s[1:] < runmin[:-1]
    else:
        hit = s[1:] <= runmin[:-1]
    return np.nonzero(hit)[0] + 1


def _values_of(trace, field: str) -> np.ndarray:
    if isinstance(trace, CocycleTrace):
        return trace.field(field)
    return np.asarray(trace, dtype=float)


def pliss_times(a: ArrayLike, c1: float, c2: float, L: float) -> Tuple[TimeSet, float]:
    """Times n at which every suffix average of a exceeds c1, plus the
    guaranteed density theta = (c2 - c1)/(L - c1).

    Requires c1 < c2 <= L and a_j <= L throughout.  When the full average
    is at least c2, the detected count is guaranteed to exceed theta * N.
    """
    a = np.asarray(a, dtype=float)
    if not (c1 < c2 <= L):
        raise PreconditionViolated(f"need c1 < c2 <= L, got {c1}, {c2}, {L}")
    if a.size and np.max(a) > L:
        raise PreconditionViolated(f"sequence exceeds the bound L={L}")
    # suffix averages above c1 means partial sums of (c1 - a) stay at a
    # running minimum, which is the shared scan on values = -a
    idx = _forward_scan(-a, -c1, strict=False)
    theta = (c2 - c1) / (L - c1)
    return TimeSet(horizon=a.size, times=idx), theta


def _check_sigma(sigma: float):
    if not (0.0 < sigma < 1.0):
        raise PreconditionViolated(f"sigma must lie in (0, 1), got {sigma}")


def hyperbolic_times(trace, sigma: float, strict: bool = False) -> TimeSet:
    """Times n whose suffix sums of phi_cu all sit below k log sigma.

    At such a time the cu derivative cocycle has grown at rate at least
    1/sigma along every suffix window; raw arrays are taken as phi_cu.
    """
    _check_sigma(sigma)
    v = _values_of(trace, "phi_cu")
    return TimeSet(horizon=v.size, times=_forward_scan(v, math.log(sigma), strict))


def inverse_hyperbolic_times(trace, sigma: float, strict: bool = False) -> TimeSet:
    """Same scan on phi_cs: certified backward contraction along cs."""
    _check_sigma(sigma)
    v = _values_of(trace, "phi_cs")
    return TimeSet(horizon=v.size, times=_forward_scan(v, math.log(sigma), strict))


def reverse_hyperbolic_times(trace, sigma: float, m: int,
                             strict: bool = False) -> TimeSet:
    """Times n in [0, m) whose forward windows up to m contract along cs.

    n is detected when sum_{j=n}^{n+k-1} phi_cs[j] <= k log sigma for all
    1 <= k <= m - n.  Restricting m to a smaller m' in (n, m) only drops
    conditions, so detected times survive truncation (chaining).
    """
    _check_sigma(sigma)
    v = _values_of(trace, "phi_cs")
    if not (0 <= m <= v.size):
        raise PreconditionViolated(f"need 0 <= m <= {v.size}, got m={m}")
    q = partial_sums(v[:m] - math.log(sigma))
    # suffix running maximum of q over [n+1, m]
    sufmax = np.maximum.accumulate(q[::-1])[::-1]
    if strict:
        hit = q[:-1] > sufmax[1:]
    else:
        hit = q[:-1] >= sufmax[1:]
    return TimeSet(horizon=m, times=np.nonzero(hit)[0])


def verify_time_certificate(values: ArrayLike, n: int, sigma: float,
                            strict: bool = False) -> bool:
    """Direct window-by-window check of the defining inequality at time n."""
    _check_sigma(sigma)
    v = np.asarray(values, dtype=float)
    if not (1 <= n <= v.size):
        raise PreconditionViolated("n out of range")
    ls = math.log(sigma)
    for k in range(1, n + 1):
        s = float(np.sum(v[n - k:n]))
        if strict:
            if not s < k * ls:
                return False
        elif not s <= k * ls:
            return False
    return True


@dataclass
class ExpansionTime:
    """First time at which the orbit certifies average expansion.

    value is the least N >= 1 with S_N phi_cu < -N c_u / 2 (strict).  At
    that first crossing every earlier partial sum still sits above the
    line, so all backward windows at N satisfy the same rate: N is
    automatically a sigma-hyperbolic time for sigma = exp(-c_u/2), and
    the survival function of this first passage is the tail that return
    statistics inherit.  exceeds_horizon means no crossing happened
    within the trace, so no finite value can be certified.
    """

    value: Optional[int]
    exceeds_horizon: bool
    horizon: int


def expansion_time(trace, c_u: float) -> ExpansionTime:
    if c_u <= 0.0:
        raise PreconditionViolated("c_u must be positive")
    v = _values_of(trace, "phi_cu")
    n_max = v.size
    if n_max < 1:
        raise PreconditionViolated("need a trace of length >= 1")
    s = np.cumsum(v)
    n = np.arange(1, n_max + 1)
    good = s < -0.5 * c_u * n
    hit = np.nonzero(good)[0]
    if hit.size == 0:
        return ExpansionTime(value=None, exceeds_horizon=True, horizon=n_max)
    return ExpansionTime(value=int(hit[0]) + 1, exceeds_horizon=False,
                         horizon=n_max)
