"""Correlation decay, expansion-time tails, and the stable holonomy density.

The estimators are ensemble (space) averages over a burn-in push-forward
of Lebesgue, our stand-in for the physical measure.  Heavy loops stream
over fixed chunks (see parallel.py) so results do not depend on the
worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InsufficientData, NotSameFiber, PreconditionViolated
from .parallel import map_chunked, rng_for
from .systems import Solenoid, System, SystemSpec, build_system

STRETCH_GRID = (0.25, 0.5, 0.75, 1.0)


# -- observable battery ----------------------------------------------------


def _trig(index: int, harmonics: int, which: str):
    def fn(p):
        ang = 2.0 * np.pi * harmonics * np.asarray(p, dtype=float)[..., index]
        return np.cos(ang) if which == "cos" else np.sin(ang)
    return fn


def _tent(system: System, center, r: float):
    ec = system.embed(np.asarray(center, dtype=float))

    def fn(p):
        d = np.linalg.norm(system.embed(p) - ec, axis=-1)
        return np.clip(1.0 - d / r, 0.0, 1.0)
    return fn


def observable_battery(system: System):
    """Built-in bounded observables: low trig polynomials in the chart
    coordinates plus one Lipschitz tent bump.  Returned as name -> fn."""
    if system.dim == 2:
        batt = {
            "cos_x1": _trig(0, 1, "cos"),
            "sin_x1": _trig(0, 1, "sin"),
            "cos_x2": _trig(1, 1, "cos"),
            "sin_x2": _trig(1, 1, "sin"),
            "tent": _tent(system, [0.3, 0.7], 0.25),
        }
    elif system.dim == 1:
        batt = {
            "cos_x": _trig(0, 1, "cos"),
            "sin_x": _trig(0, 1, "sin"),
            "cos_2x": _trig(0, 2, "cos"),
            "tent": _tent(system, [0.3], 0.2),
        }
    else:
        def z_re(p):
            return np.asarray(p, dtype=float)[..., 1]

        def z_im(p):
            return np.asarray(p, dtype=float)[..., 2]

        def abs_z2(p):
            p = np.asarray(p, dtype=float)
            return p[..., 1] ** 2 + p[..., 2] ** 2
        batt = {
            "cos_theta": _trig(0, 1, "cos"),
            "sin_theta": _trig(0, 1, "sin"),
            "z_re": z_re,
            "z_im": z_im,
            "abs_z2": abs_z2,
            "tent": _tent(system, [0.2, 0.3, 0.1], 0.3),
        }
    batt["one"] = lambda p: np.ones(np.asarray(p, dtype=float).shape[:-1])
    return batt


def resolve_observable(system: System, obs) -> Tuple[str, Callable]:
    if callable(obs):
        return getattr(obs, "__name__", "custom"), obs
    batt = observable_battery(system)
    if obs not in batt:
        raise PreconditionViolated(
            f"unknown observable '{obs}'; battery has {sorted(batt)}")
    return obs, batt[obs]


# -- SRB surrogate ---------------------------------------------------------


def srb_sampler(system: System, burn_in: int, count: int, seed) -> np.ndarray:
    """count points pushed forward burn_in steps from Lebesgue starts."""
    if burn_in < 1:
        raise PreconditionViolated("burn_in must be >= 1")
    if count < 0:
        raise PreconditionViolated("count must be >= 0")
    keys = seed if isinstance(seed, (tuple, list)) else (seed,)
    rng = rng_for(*keys)
    x = system.sample_uniform(rng, count)
    for _ in range(burn_in):
        x = system.step(x)
    return x


def srb_stability(system: System, burn_in: int, count: int, seed,
                  battery: Optional[Sequence[str]] = None) -> dict:
    """Battery means at burn-in B versus 2B; the max drift gauges whether
    B has converged onto the physical measure."""
    names = list(battery) if battery else [n for n in observable_battery(system)
                                           if n != "one"]
    batt = observable_battery(system)
    out = {"burn_in": burn_in, "count": count}
    x = srb_sampler(system, burn_in, count, seed)
    y = x
    for _ in range(burn_in):
        y = system.step(y)
    drift = 0.0
    for name in names:
        a = float(np.mean(batt[name](x)))
        b = float(np.mean(batt[name](y)))
        out[f"mean_{name}_B"] = a
        out[f"mean_{name}_2B"] = b
        drift = max(drift, abs(a - b))
    out["max_drift"] = drift
    return out


# -- correlation -----------------------------------------------------------


@dataclass
class CorrelationSeries:
    n_grid: np.ndarray
    cor: np.ndarray
    stderr: np.ndarray
    phi_name: str
    psi_name: str
    samples: int
    burn_in: int
    power: int


def _corr_chunk(idx, start, stop, payload):
    spec, phi_name, psi_name, n_max, burn_in, seed, power = payload
    system = build_system(spec)
    _, phi = resolve_observable(system, phi_name)
    _, psi = resolve_observable(system, psi_name)
    m = stop - start
    x = srb_sampler(system, burn_in, m, (seed, idx))
    f0 = phi(x)
    sum_f = float(np.sum(f0))
    sum_g = np.empty(n_max + 1)
    sum_fg = np.empty(n_max + 1)
    for n in range(n_max + 1):
        g = psi(x)
        sum_g[n] = np.sum(g)
        sum_fg[n] = np.sum(f0 * g)
        if n < n_max:
            for _ in range(power):
                x = system.step(x)
    return m, sum_f, sum_g, sum_fg


def estimate_correlation(system: System, phi, psi, n_max: int, M: int,
                         burn_in: int, seed, power: int = 1,
                         workers: int = 1) -> CorrelationSeries:
    """|cov(phi, psi o f^(power n))| under the SRB surrogate, n = 0..n_max.

    The ensemble covariance uses the time-n mean of psi, so a constant
    observable gives 0 up to rounding.  Standard errors come from treating
    the fixed chunks as batches.
    """
    if n_max < 0 or M < 1 or power < 1:
        raise PreconditionViolated("need n_max >= 0, M >= 1, power >= 1")
    phi_name, phi_fn = resolve_observable(system, phi)
    psi_name, psi_fn = resolve_observable(system, psi)
    custom = callable(phi) or callable(psi)
    payload = (system.spec, phi if not custom else phi_fn,
               psi if not custom else psi_fn,
               n_max, burn_in, seed, power)
    results = map_chunked(_corr_chunk, payload, M,
                          workers=1 if custom else workers)
    counts = np.array([r[0] for r in results], dtype=float)
    sum_f = np.array([r[1] for r in results])
    sum_g = np.stack([r[2] for r in results])
    sum_fg = np.stack([r[3] for r in results])
    total = float(np.sum(counts))
    mean_f = float(np.sum(sum_f)) / total
    mean_g = np.sum(sum_g, axis=0) / total
    mean_fg = np.sum(sum_fg, axis=0) / total
    cov = mean_fg - mean_f * mean_g
    live = counts > 0
    k = int(np.sum(live))
    if k > 1:
        per = (sum_fg[live] / counts[live, None]
               - (sum_f[live] / counts[live])[:, None]
               * (sum_g[live] / counts[live, None]))
        stderr = np.std(per, axis=0, ddof=1) / math.sqrt(k)
    else:
        stderr = np.zeros(n_max + 1)
    return CorrelationSeries(
        n_grid=np.arange(n_max + 1), cor=np.abs(cov), stderr=stderr,
        phi_name=phi_name, psi_name=psi_name, samples=M,
        burn_in=burn_in, power=power)


# -- expansion-time tail ---------------------------------------------------


@dataclass
class TailHistogram:
    n_grid: np.ndarray
    frac: np.ndarray
    stderr: np.ndarray
    censored_frac: float
    samples: int
    c_u: float
    horizon: int


def _tail_scan(system, x, c_u, horizon):
    """Expansion-time counts for one start batch.

    Streams the first passage of S_n phi_cu below -n c_u / 2, dropping
    each start as soon as it crosses; the returned vector holds counts
    of h = n at index n - 1 and the still-uncrossed (censored) count at
    index horizon."""
    m = x.shape[0]
    s = np.zeros(m)
    h = np.zeros(m, dtype=np.int64)
    idx = np.arange(m)
    for n in range(1, horizon + 1):
        s = s + system.phi_cu(x)
        hit = s < -0.5 * c_u * n
        if hit.any():
            h[idx[hit]] = n
            keep = ~hit
            idx, s, x = idx[keep], s[keep], x[keep]
            if idx.size == 0:
                break
        if n < horizon:
            x = system.step(x)
    counts = np.zeros(horizon + 1, dtype=np.int64)
    counts[:horizon] = np.bincount(h[h > 0] - 1, minlength=horizon)
    counts[horizon] = idx.size
    return counts


def _tail_chunk(idx, start, stop, payload):
    spec, c_u, horizon, seed = payload
    system = build_system(spec)
    rng = rng_for(seed, idx)
    return _tail_scan(system, system.sample_disk(rng, stop - start), c_u, horizon)


def tail_histogram(system: System, c_u: float, horizon: int, M: int, seed,
                   disk=None, workers: int = 1) -> TailHistogram:
    """Survival function of the expansion time over Lebesgue starts on the
    reference cu disk.  Starts that never cross the expansion threshold
    within the horizon are censored: counted in censored_frac, never in
    frac."""
    if c_u <= 0.0:
        raise PreconditionViolated("c_u must be positive")
    if horizon < 1 or M < 1:
        raise PreconditionViolated("need horizon >= 1 and M >= 1")
    if disk is not None:
        # a custom sampler is an in-process callable; same chunk structure
        counts = np.sum(np.stack([
            _tail_scan(system,
                       np.asarray(disk(rng_for(seed, i), e - s), dtype=float),
                       c_u, horizon)
            for i, (s, e) in _bounds(M)]), axis=0)
    else:
        payload = (system.spec, c_u, horizon, seed)
        res = map_chunked(_tail_chunk, payload, M, workers=workers)
        counts = np.sum(np.stack(res), axis=0)
    censored = int(counts[horizon])
    h_counts = np.zeros(horizon + 2, dtype=np.int64)
    h_counts[1:horizon + 1] = counts[:horizon]     # counts[i] holds h = i + 1
    # frac[n] = fraction of uncensored starts with h >= n
    tail_counts = np.cumsum(h_counts[::-1])[::-1]
    n_grid = np.arange(1, horizon + 1)
    frac = tail_counts[1:horizon + 1] / M
    stderr = np.sqrt(np.clip(frac * (1.0 - frac), 0.0, None) / M)
    return TailHistogram(n_grid=n_grid, frac=frac, stderr=stderr,
                         censored_frac=censored / M, samples=M, c_u=c_u,
                         horizon=horizon)


def _bounds(M):
    from .parallel import chunk_bounds
    return list(enumerate(chunk_bounds(M)))


# -- decay fitting and the dictionary --------------------------------------


@dataclass
class DecayFit:
    """Competing least-squares fits of a positive decaying series.

    polynomial: value ~ A n^(-alpha), fitted as log v vs log n.
    exponential: value ~ A exp(-c n^alpha_stretch) over the stretch grid.
    chosen is the higher-r_squared model, or 'degenerate' for a series
    that dies immediately (no fit possible, uniformly hyperbolic limit).
    """

    alpha: float
    log_amp_poly: float
    poly_r2: float
    c: float
    alpha_stretch: float
    log_amp_exp: float
    exp_r2: float
    chosen: str

    def params(self) -> dict:
        return {"alpha": self.alpha, "c": self.c,
                "alpha_stretch": self.alpha_stretch,
                "poly_r2": self.poly_r2, "exp_r2": self.exp_r2}


def degenerate_fit() -> DecayFit:
    return DecayFit(alpha=math.nan, log_amp_poly=math.nan, poly_r2=math.nan,
                    c=math.nan, alpha_stretch=math.nan, log_amp_exp=math.nan,
                    exp_r2=math.nan, chosen="degenerate")


def _lsq_line(x, y):
    """Slope, intercept, r_squared of a plain least-squares line."""
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot <= 1e-30:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2


def fit_decay(n_grid, values) -> DecayFit:
    """Fit v ~ A n^(-alpha) against v ~ A exp(-c n^a); winner by r_squared.

    Only strictly positive values enter; fewer than 8 usable points raises
    InsufficientData.
    """
    n = np.asarray(n_grid, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (v > 0.0) & np.isfinite(v) & (n >= 1)
    if int(np.sum(keep)) < 8:
        raise InsufficientData(
            f"{int(np.sum(keep))} positive points, need at least 8")
    n, v = n[keep], v[keep]
    logv = np.log(v)
    slope, inter, poly_r2 = _lsq_line(np.log(n), logv)
    best = None
    for a in STRETCH_GRID:
        s, i, r2 = _lsq_line(n ** a, logv)
        if best is None or r2 > best[3]:
            best = (a, s, i, r2)
    a_str, s_exp, i_exp, exp_r2 = best
    chosen = "polynomial" if poly_r2 >= exp_r2 else "exponential"
    return DecayFit(alpha=-slope, log_amp_poly=inter, poly_r2=poly_r2,
                    c=-s_exp, alpha_stretch=a_str, log_amp_exp=i_exp,
                    exp_r2=exp_r2, chosen=chosen)


def tail_fit_grid(hist: TailHistogram, n_min: int = 32, points: int = 64):
    """Log-spaced subgrid of the tail for fitting.

    Equal weight per decade keeps the dense small-n region from drowning
    the tail that actually decides the exponent, and n_min discards the
    pre-asymptotic transient.  Censored starts survive at every n up to
    the horizon, so their mass is added back to the survival values (the
    usual right-censoring correction); the grid itself stops at the last
    n still resolved by an uncensored sample.
    """
    pos = hist.n_grid[hist.frac > 0.0]
    if pos.size == 0:
        return np.array([], dtype=np.int64), np.array([])
    n_hi = int(pos.max())
    lo = max(1, n_min)
    if n_hi <= lo:
        grid = pos
    else:
        grid = np.unique(np.round(np.geomspace(lo, n_hi, points)).astype(np.int64))
    surv_at = hist.frac[grid - 1] + hist.censored_frac
    keep = surv_at > 0.0
    return grid[keep], surv_at[keep]


def classify_tail(hist: TailHistogram, n_min: int = 32,
                  points: int = 64) -> DecayFit:
    """fit_decay on the log-spaced tail grid; a tail that is all gone by
    n = 2 is the degenerate (uniformly hyperbolic) case."""
    beyond = hist.frac[hist.n_grid >= 2]
    if (beyond.size == 0 or float(np.max(beyond)) == 0.0) \
            and hist.censored_frac == 0.0:
        return degenerate_fit()
    grid, vals = tail_fit_grid(hist, n_min=n_min, points=points)
    return fit_decay(grid, vals)


@dataclass
class MixingClass:
    kind: str                     # polynomial | exponential | stretched-exponential
    exponent: Optional[float]     # correlation exponent for the polynomial class
    rate: Optional[float]
    stretch: Optional[float]
    note: str

    def label(self) -> str:
        if self.kind == "polynomial":
            return f"polynomial(exponent={self.exponent:.4g})"
        if self.kind == "stretched-exponential":
            return f"stretched-exponential(stretch={self.stretch:.4g})"
        return "exponential"


def predict_mixing_class(tail_fit: DecayFit) -> MixingClass:
    """Tail class -> correlation class: a polynomial tail with exponent
    alpha gives polynomial correlation decay with exponent alpha - 1; an
    exponential-type tail keeps its stretch.  Only the class and exponent
    transfer, constants are not claimed."""
    if tail_fit.chosen == "degenerate":
        return MixingClass(kind="exponential", exponent=None, rate=None,
                           stretch=1.0,
                           note="tail dies at n=2; uniformly hyperbolic limit")
    if tail_fit.chosen == "polynomial":
        return MixingClass(kind="polynomial", exponent=tail_fit.alpha - 1.0,
                           rate=None, stretch=None,
                           note="correlation exponent = tail exponent - 1")
    kind = "exponential" if tail_fit.alpha_stretch >= 1.0 else "stretched-exponential"
    return MixingClass(kind=kind, exponent=None, rate=tail_fit.c,
                       stretch=tail_fit.alpha_stretch,
                       note="stretch carried over from the tail fit")


# -- stable holonomy density ----------------------------------------------


@dataclass
class HolonomyDensity:
    value: float
    truncation: int
    remainder_bound: float
    fiber_distance: float
    c_j: float
    eta: float
    sigma_s: float


def holonomy_density(system: System, x, theta_x, N: int,
                     c_j: Optional[float] = None, eta: Optional[float] = None,
                     sigma_s: Optional[float] = None) -> HolonomyDensity:
    """exp of the truncated series sum_{i<N} (j_cu at f^i theta_x - j_cu at
    f^i x) for two points on one stable fiber, with the geometric
    remainder bound C_J d^eta sigma_s^(2 N eta / 3) / (1 - sigma_s^(2 eta / 3)).

    For the unmodified solenoid j_cu only reads the base coordinate, which
    both orbits share exactly, so the value is exactly 1.
    """
    if not isinstance(system, Solenoid):
        raise PreconditionViolated("holonomy density is defined for the solenoid family")
    if N < 1:
        raise PreconditionViolated("truncation N must be >= 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(theta_x, dtype=float)
    base_gap = abs(float(x[0] - y[0]))
    base_gap = min(base_gap, 1.0 - base_gap)
    if base_gap > 1e-12:
        raise NotSameFiber(f"base coordinates differ by {base_gap:.3e}")
    dflt = system.holonomy_defaults()
    c_j = dflt[0] if c_j is None else c_j
    eta = dflt[1] if eta is None else eta
    sigma_s = dflt[2] if sigma_s is None else sigma_s
    if not (0.0 < sigma_s < 1.0) or eta <= 0.0 or c_j <= 0.0:
        raise PreconditionViolated("need C_J > 0, eta > 0, sigma_s in (0, 1)")
    d = float(np.hypot(x[1] - y[1], x[2] - y[2]))
    total = 0.0
    p, q = x.copy(), y.copy()
    for _ in range(N):
        total += float(system.j_cu(q)) - float(system.j_cu(p))
        p = system.step(p)
        q = system.step(q)
    ratio = sigma_s ** (2.0 * eta / 3.0)
    bound = c_j * d ** eta * ratio ** N / (1.0 - ratio)
    return HolonomyDensity(value=math.exp(total), truncation=N,
                           remainder_bound=bound, fiber_distance=d,
                           c_j=c_j, eta=eta, sigma_s=sigma_s)
