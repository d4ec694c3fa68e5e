"""Ergodic, geometric, and topological basin tests.

The reference measure is one long orbit: battery averages with batch-means
errors plus a subsampled attractor cloud.  The ergodic test compares
finite-time averages against the reference battery; the geometric test
certifies approach to the cloud (final distance below tolerance and a
non-increasing fitted log-distance over the trailing half); the
topological test asks the whole final quarter to sit near the cloud.
Tolerance defaults derive from the cloud's nearest-neighbor resolution
and the battery standard errors, and all of them are overridable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import PreconditionViolated
from .mixing import observable_battery
from .parallel import map_chunked, rng_for
from .systems import System, build_system

# The geometric factor covers the sparse-region tail of nearest-cloud
# distances (a fresh SRB draw can land an order of magnitude beyond the
# median spacing); the slope tolerance sits above the trailing-window fit
# noise once an orbit is pinned at the resolution floor, yet far below the
# O(0.1) per-step slopes of genuinely escaping orbits.
ERGODIC_FACTOR = 6.0
GEOMETRIC_FACTOR = 12.0
TOPOLOGICAL_FACTOR = 1.5
SLOPE_TOL = 2e-2


@dataclass
class ReferenceMeasure:
    kind: str
    battery_names: List[str]
    means: np.ndarray
    stderrs: np.ndarray
    cloud: np.ndarray              # raw state points
    cloud_embedded: np.ndarray     # embedded for nearest-neighbor queries
    resolution: float              # median nearest-neighbor spacing, embedded
    burn: int
    length: int
    seed: int

    def tree(self) -> cKDTree:
        return cKDTree(self.cloud_embedded)


def build_reference(system: System, burn: int, length: int,
                    battery: Optional[Sequence[str]] = None, seed: int = 0,
                    cloud_size: int = 20000, batches: int = 32) -> ReferenceMeasure:
    """Battery averages and attractor cloud from a single long orbit."""
    if length < 10_000:
        raise PreconditionViolated("reference length must be at least 10^4")
    if burn < 0:
        raise PreconditionViolated("burn must be >= 0")
    batt_all = observable_battery(system)
    names = [n for n in (battery or batt_all) if n != "one"]
    for n in names:
        if n not in batt_all:
            raise PreconditionViolated(f"unknown battery observable '{n}'")
    rng = rng_for(seed)
    x = system.sample_uniform(rng, 1)
    for _ in range(burn):
        x = system.step(x)
    pts = np.empty((length, system.dim))
    for t in range(length):
        pts[t] = x[0]
        x = system.step(x)
    values = np.stack([batt_all[n](pts) for n in names])
    means = values.mean(axis=1)
    # batch means over contiguous blocks absorb short-range correlation
    nb = min(batches, length)
    edges = np.linspace(0, length, nb + 1).astype(int)
    bm = np.stack([values[:, a:b].mean(axis=1) for a, b in zip(edges[:-1], edges[1:])],
                  axis=1)
    stderrs = bm.std(axis=1, ddof=1) / math.sqrt(nb)
    keep = np.linspace(0, length - 1, min(cloud_size, length)).astype(int)
    cloud = pts[np.unique(keep)]
    emb = system.embed(cloud)
    nn = cKDTree(emb).query(emb, k=2)[0][:, 1]
    return ReferenceMeasure(kind=system.kind, battery_names=names, means=means,
                            stderrs=stderrs, cloud=cloud, cloud_embedded=emb,
                            resolution=float(np.median(nn)), burn=burn,
                            length=length, seed=seed)


def default_ergodic_tol(ref: ReferenceMeasure, n: int,
                        factor: float = ERGODIC_FACTOR) -> float:
    """factor * stderr * sqrt(ref length / n): the reference error scaled to
    the shorter test orbit's own fluctuation size."""
    return factor * float(np.max(ref.stderrs)) * math.sqrt(ref.length / n)


def default_geometric_tol(system: System, ref: ReferenceMeasure,
                          n: Optional[int] = None,
                          factor: float = GEOMETRIC_FACTOR) -> float:
    tol = factor * ref.resolution
    if n is not None and system.cs_exponent is not None:
        tol += 2.0 * math.exp(n * system.cs_exponent)
    return tol


@dataclass
class BasinVerdict:
    ergodic: bool
    geometric: bool
    topological: bool
    max_deviation: float
    final_distance: float
    log_dist_slope: float


def _scan_points(system: System, x: np.ndarray, ref: ReferenceMeasure,
                 n: int, tree: Optional[cKDTree] = None):
    """Battery deviations and trailing distance records for a start batch."""
    batt_all = observable_battery(system)
    fns = [batt_all[name] for name in ref.battery_names]
    tree = ref.tree() if tree is None else tree
    m = x.shape[0]
    half = n // 2
    sums = np.zeros((len(fns), m))
    dists = np.empty((m, n - half + 1))
    for t in range(n + 1):
        if t < n:
            for k, fn in enumerate(fns):
                sums[k] += fn(x)
        if t >= half:
            d, _ = tree.query(system.embed(x))
            dists[:, t - half] = d
        if t < n:
            x = system.step(x)
    dev = np.max(np.abs(sums / n - ref.means[:, None]), axis=0)
    return dev, dists


def _slope_fit(dists: np.ndarray) -> np.ndarray:
    """Least-squares slope of log distance against time, per row."""
    y = np.log(np.maximum(dists, 1e-300))
    t = np.arange(y.shape[1], dtype=float)
    tc = t - t.mean()
    denom = float(np.sum(tc * tc))
    return (y - y.mean(axis=1, keepdims=True)) @ tc / denom


def ergodic_basin_test(system: System, y, ref: ReferenceMeasure, n: int,
                       tol: Optional[float] = None):
    """(member, max deviation): battery time averages against the reference."""
    if n < 1000:
        raise PreconditionViolated("ergodic test needs n >= 10^3")
    tol = default_ergodic_tol(ref, n) if tol is None else tol
    x = np.atleast_2d(np.asarray(y, dtype=float))
    dev, _ = _scan_points(system, x, ref, n)
    return bool(dev[0] <= tol), float(dev[0])


def geometric_basin_test(system: System, y, ref: ReferenceMeasure, n: int,
                         tol: Optional[float] = None,
                         slope_tol: float = SLOPE_TOL):
    """(member, final distance): approach to the attractor cloud.

    Membership needs the final distance below tol and the fitted
    log-distance slope over the trailing half non-increasing (up to
    slope_tol, which absorbs the resolution floor)."""
    if ref.cloud.shape[0] == 0:
        raise PreconditionViolated("attractor cloud is empty")
    if n < 2:
        raise PreconditionViolated("need n >= 2")
    tol = default_geometric_tol(system, ref, n) if tol is None else tol
    x = np.atleast_2d(np.asarray(y, dtype=float))
    _, dists = _scan_points(system, x, ref, n)
    slope = float(_slope_fit(dists)[0])
    final = float(dists[0, -1])
    return bool(final <= tol and slope <= slope_tol), final


@dataclass
class AgreementReport:
    samples: int
    n: int
    tol_ergodic: float
    tol_geometric: float
    tol_topological: float
    frac_ergodic: float
    frac_geometric: float
    frac_topological: float
    agree_eg: float
    agree_et: float
    agree_gt: float
    symm_diff_eg: float
    points: np.ndarray
    verdicts: List[BasinVerdict]


def _agreement_chunk(idx, start, stop, payload):
    (spec, ref, n, tol_e, tol_g, tol_t, slope_tol, seed) = payload
    system = build_system(spec)
    rng = rng_for(seed, idx)
    x = system.sample_uniform(rng, stop - start)
    tree = ref.tree()
    dev, dists = _scan_points(system, x, ref, n, tree=tree)
    slopes = _slope_fit(dists)
    final = dists[:, -1]
    quarter = dists[:, dists.shape[1] - max(1, (n // 4) + 1):]
    erg = dev <= tol_e
    geo = (final <= tol_g) & (slopes <= slope_tol)
    topo = np.max(quarter, axis=1) <= tol_t
    return x, erg, geo, topo, dev, final, slopes


def agreement_scan(system: System, M: int, n: int, seed: int,
                   ref: ReferenceMeasure,
                   tol_ergodic: Optional[float] = None,
                   tol_geometric: Optional[float] = None,
                   tol_topological: Optional[float] = None,
                   slope_tol: float = SLOPE_TOL,
                   workers: int = 1) -> AgreementReport:
    """Run all three tests on a Lebesgue grid and tabulate agreement."""
    if M < 0:
        raise PreconditionViolated("M must be >= 0")
    tol_e = default_ergodic_tol(ref, n) if tol_ergodic is None else tol_ergodic
    tol_g = (default_geometric_tol(system, ref, n)
             if tol_geometric is None else tol_geometric)
    tol_t = TOPOLOGICAL_FACTOR * tol_g if tol_topological is None else tol_topological
    if M == 0:
        return AgreementReport(samples=0, n=n, tol_ergodic=tol_e,
                               tol_geometric=tol_g, tol_topological=tol_t,
                               frac_ergodic=math.nan, frac_geometric=math.nan,
                               frac_topological=math.nan, agree_eg=math.nan,
                               agree_et=math.nan, agree_gt=math.nan,
                               symm_diff_eg=math.nan,
                               points=np.empty((0, system.dim)), verdicts=[])
    payload = (system.spec, ref, n, tol_e, tol_g, tol_t, slope_tol, seed)
    res = map_chunked(_agreement_chunk, payload, M, workers=workers)
    pts = np.concatenate([r[0] for r in res])
    erg = np.concatenate([r[1] for r in res])
    geo = np.concatenate([r[2] for r in res])
    topo = np.concatenate([r[3] for r in res])
    dev = np.concatenate([r[4] for r in res])
    final = np.concatenate([r[5] for r in res])
    slopes = np.concatenate([r[6] for r in res])
    verdicts = [BasinVerdict(bool(e), bool(g), bool(t), float(d), float(f), float(s))
                for e, g, t, d, f, s in zip(erg, geo, topo, dev, final, slopes)]
    return AgreementReport(
        samples=M, n=n, tol_ergodic=tol_e, tol_geometric=tol_g,
        tol_topological=tol_t,
        frac_ergodic=float(np.mean(erg)), frac_geometric=float(np.mean(geo)),
        frac_topological=float(np.mean(topo)),
        agree_eg=float(np.mean(erg == geo)), agree_et=float(np.mean(erg == topo)),
        agree_gt=float(np.mean(geo == topo)),
        symm_diff_eg=float(np.mean(erg != geo)),
        points=pts, verdicts=verdicts)
