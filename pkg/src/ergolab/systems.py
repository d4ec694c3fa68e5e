"""Model systems with split derivative data.

Each system exposes one step of the dynamics, the inverse step where it
exists, and pointwise logarithmic derivative data along the invariant (or
reference) splitting:

    phi_cs(x) = log ||Df(x) restricted to the cs direction||
    phi_cu(x) = log ||inverse of Df(x) restricted to the cu direction||
    j_cu(x)   = log |det Df(x) restricted to the cu direction|

Conventions: phi_cu <= 0 means expansion along cu, phi_cs <= 0 means
contraction along cs.  j_cu is the one-step volume growth of the embedded
cu disk, i.e. log ||Df(x) v|| for a unit vector v spanning the cu
(respectively base) direction.

Points are float64 arrays of shape (dim,) or (batch, dim).  Circle
coordinates live in [0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BranchAmbiguous, DomainEscape, NotInvertible

SQRT5 = math.sqrt(5.0)
LAM_U = (3.0 + SQRT5) / 2.0          # unstable multiplier of [[2,1],[1,1]]
LAM_S = (3.0 - SQRT5) / 2.0
LOG_LAM_U = math.log(LAM_U)

# unit eigenvectors of the symmetric matrix [[2,1],[1,1]]
_EU_RAW = np.array([1.0, (SQRT5 - 1.0) / 2.0])
_ES_RAW = np.array([1.0, -(1.0 + SQRT5) / 2.0])
EU = _EU_RAW / np.linalg.norm(_EU_RAW)
ES = _ES_RAW / np.linalg.norm(_ES_RAW)


def wrap01(x):
    return np.mod(x, 1.0)


def circle_dist(a, b):
    """Arc distance on R/Z."""
    d = np.abs(wrap01(a) - wrap01(b))
    return np.minimum(d, 1.0 - d)


def circle_signed(a, b):
    """Signed wrapped difference a - b in [-0.5, 0.5)."""
    d = a - b
    return d - np.floor(d + 0.5)


@dataclass
class SplitLogNorms:
    """Pointwise log norms along the splitting, batched like the input."""

    phi_cs: np.ndarray
    phi_cu: np.ndarray
    j_cu: np.ndarray


@dataclass(frozen=True)
class BumpSpec:
    """Neutralizing bump parameters for the modified solenoid.

    center is the base coordinate of the period-2 anchor; None means it is
    solved for at construction.  radius is measured in the product metric
    on (theta, z).  depth is the factor by which the fiber contraction is
    weakened at the core (depth 10 cancels the 1/10 contraction exactly).
    width controls the log-radial profile; larger is shallower.
    """

    center: Optional[float] = None
    radius: float = 0.35
    depth: float = 10.0
    width: float = 10.0


@dataclass(frozen=True)
class SystemSpec:
    """Serializable description of a model system."""

    kind: str
    gamma: Optional[float] = None
    bump: Optional[BumpSpec] = None
    invertible: bool = True

    def build(self):
        return build_system(self)


def intermittent_map(gamma, x):
    """One step of the degree-2 circle map with a neutral fixed point at 0.

    x in [0, 1/2) maps to x * (1 + 2^gamma * x^gamma), x in [1/2, 1) maps
    to 2x - 1.  The left branch is C^1 up to the neutral point where the
    derivative equals 1.
    """
    x = np.asarray(x, dtype=float)
    left = x < 0.5
    out = np.where(left, x * (1.0 + (2.0 ** gamma) * x ** gamma), 2.0 * x - 1.0)
    return wrap01(out)


def intermittent_deriv(gamma, x):
    """Derivative of the intermittent map; 1 + (1+gamma) 2^gamma x^gamma on the left branch."""
    x = np.asarray(x, dtype=float)
    left = x < 0.5
    return np.where(left, 1.0 + (1.0 + gamma) * (2.0 ** gamma) * x ** gamma, 2.0)


def invert_intermittent_left(gamma, y, iters=48):
    """Solve x + 2^gamma x^(1+gamma) = y on [0, 1/2), vectorized.

    Bisection to locate the root, then a few Newton polishing steps; the
    branch derivative is >= 1 so Newton is safe once bracketed.
    """
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.full_like(y, 0.5)
    c = 2.0 ** gamma
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        val = mid + c * mid ** (1.0 + gamma)
        high = val > y
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    x = 0.5 * (lo + hi)
    for _ in range(3):
        val = x + c * x ** (1.0 + gamma) - y
        der = 1.0 + c * (1.0 + gamma) * x ** gamma
        x = np.clip(x - val / der, 0.0, np.nextafter(0.5, 0.0))
    return x


def _mollifier(u):
    """Standard bump exp(1 - 1/(1-u^2)) on [0, 1), 0 outside, with derivative."""
    u = np.asarray(u, dtype=float)
    inside = u < 1.0
    w = np.where(inside, 1.0 - u * u, 1.0)
    b = np.where(inside, np.exp(1.0 - 1.0 / w), 0.0)
    db = np.where(inside, b * (-2.0 * u) / (w * w), 0.0)
    return b, db


def _smoothstep_inf(v):
    """C-infinity step from 0 at v<=0 to 1 at v>=1, with derivative."""
    v = np.asarray(v, dtype=float)
    vc = np.clip(v, 1e-12, 1.0 - 1e-12)
    a = np.exp(-1.0 / vc)
    bb = np.exp(-1.0 / (1.0 - vc))
    s = a / (a + bb)
    da = a / (vc * vc)
    dbb = bb / ((1.0 - vc) ** 2)
    ds = (da * bb + a * dbb) / ((a + bb) ** 2)
    s = np.where(v <= 0.0, 0.0, np.where(v >= 1.0, 1.0, s))
    ds = np.where((v <= 0.0) | (v >= 1.0), 0.0, ds)
    return s, ds


class System:
    """Common interface; concrete systems fill in the derivative data."""

    kind: str = "abstract"
    dim: int = 0
    invertible: bool = False
    gamma: Optional[float] = None
    bump: Optional[BumpSpec] = None

    # analytic exponents where the splitting makes them available in closed
    # form; None means the exponent must be estimated.
    cu_exponent: Optional[float] = None
    cs_exponent: Optional[float] = None

    phibar_cu: float = 0.0
    phibar_cs: float = 0.0

    @property
    def spec(self) -> SystemSpec:
        return SystemSpec(kind=self.kind, gamma=self.gamma, bump=self.bump,
                          invertible=self.invertible)

    # -- dynamics ---------------------------------------------------------

    def step(self, p):
        raise NotImplementedError

    def step_inverse(self, p):
        raise NotImplementedError

    def log_norms(self, p) -> SplitLogNorms:
        raise NotImplementedError

    def phi_cs(self, p):
        return self.log_norms(p).phi_cs

    def phi_cu(self, p):
        return self.log_norms(p).phi_cu

    def j_cu(self, p):
        return self.log_norms(p).j_cu

    # -- sampling and metric ----------------------------------------------

    def sample_uniform(self, rng, count):
        """Lebesgue sample on the full domain."""
        raise NotImplementedError

    def sample_disk(self, rng, count):
        """Lebesgue sample on the reference cu disk used for escape-time studies."""
        return self.sample_uniform(rng, count)

    def embed(self, p):
        """Isometric-near-diagonal embedding into Euclidean space.

        Circle coordinates map to (cos, sin)/(2 pi) so that small distances
        agree with arc length; disk coordinates pass through.  Used for
        nearest-neighbor queries where a flat metric is required.
        """
        raise NotImplementedError

    def distance(self, p, q):
        ep, eq = self.embed(p), self.embed(q)
        return np.linalg.norm(ep - eq, axis=-1)

    def domain_check(self, p):
        p = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(p)):
            raise DomainEscape(f"{self.kind}: non-finite coordinates")


def _embed_circle(t):
    t = np.asarray(t, dtype=float)
    ang = 2.0 * np.pi * t
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1) / (2.0 * np.pi)


class CatMap(System):
    """Linear hyperbolic torus automorphism with matrix [[2, 1], [1, 1]].

    The splitting is the constant eigenline pair, so all log norms are
    constants: phi_cs = phi_cu = -log lambda_u and j_cu = log lambda_u with
    lambda_u = (3 + sqrt 5)/2.
    """

    kind = "catmap"
    dim = 2
    invertible = True

    cu_exponent = LOG_LAM_U
    cs_exponent = -LOG_LAM_U
    phibar_cu = LOG_LAM_U
    phibar_cs = LOG_LAM_U

    def step(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return np.stack([wrap01(2.0 * x + y), wrap01(x + y)], axis=-1)

    def step_inverse(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return np.stack([wrap01(x - y), wrap01(-x + 2.0 * y)], axis=-1)

    def log_norms(self, p):
        p = np.asarray(p, dtype=float)
        shape = p.shape[:-1]
        return SplitLogNorms(
            phi_cs=np.full(shape, -LOG_LAM_U),
            phi_cu=np.full(shape, -LOG_LAM_U),
            j_cu=np.full(shape, LOG_LAM_U),
        )

    def sample_uniform(self, rng, count):
        return rng.random((count, 2))

    def embed(self, p):
        p = np.asarray(p, dtype=float)
        return np.concatenate(
            [_embed_circle(p[..., 0]), _embed_circle(p[..., 1])], axis=-1)


class IntermittentCircle(System):
    """Degree-2 expanding circle map with a neutral fixed point at 0.

    No contracting direction exists, so phi_cs is identically 0 and the cs
    detectors are vacuous.  phi_cu = -log f' vanishes exactly at the neutral
    point, which is what makes expansion-time tails heavy.
    """

    kind = "intermittent"
    dim = 1
    invertible = False

    def __init__(self, gamma=0.5):
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        self.gamma = float(gamma)
        self.phibar_cu = math.log(2.0 + self.gamma)
        self.phibar_cs = 0.0
        self.cu_exponent = None
        self.cs_exponent = None

    def step(self, p):
        p = np.asarray(p, dtype=float)
        return intermittent_map(self.gamma, p[..., 0])[..., None]

    def step_inverse(self, p):
        raise NotInvertible("the intermittent circle map is 2 to 1")

    def log_norms(self, p):
        p = np.asarray(p, dtype=float)
        lf = np.log(intermittent_deriv(self.gamma, p[..., 0]))
        return SplitLogNorms(phi_cs=np.zeros_like(lf), phi_cu=-lf, j_cu=lf)

    def sample_uniform(self, rng, count):
        return rng.random((count, 1))

    def embed(self, p):
        p = np.asarray(p, dtype=float)
        return _embed_circle(p[..., 0])


class Solenoid(System):
    """Solid-torus solenoid over the intermittent circle map.

    State (theta, re z, im z) with |z| <= 1.  One step sends theta through
    the base map and z to z/10 + e^(2 pi i theta)/2; the image is contained
    in the disk of radius 0.6, so the solid torus maps strictly inside
    itself.  Fibers contract at the exact rate 1/10: phi_cs = -log 10.  The
    cu direction is the base direction, phi_cu = -log f'(theta), and the
    embedded cu disk grows by j_cu = log sqrt(f'(theta)^2 + pi^2) per step
    (pi is the speed of the fiber center theta -> e^(2 pi i theta)/2).
    """

    kind = "solenoid"
    dim = 3
    invertible = True

    def __init__(self, gamma=0.5):
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        self.gamma = float(gamma)
        self.phibar_cu = math.log(2.0 + self.gamma)
        self.phibar_cs = math.log(10.0)
        self.cu_exponent = None
        self.cs_exponent = -math.log(10.0)

    @staticmethod
    def _center(th):
        ang = 2.0 * np.pi * np.asarray(th, dtype=float)
        return 0.5 * np.cos(ang), 0.5 * np.sin(ang)

    def step(self, p):
        p = np.asarray(p, dtype=float)
        th = p[..., 0]
        cx, cy = self._center(th)
        zr = p[..., 1] / 10.0 + cx
        zi = p[..., 2] / 10.0 + cy
        return np.stack([intermittent_map(self.gamma, th), zr, zi], axis=-1)

    def _base_preimages(self, thp):
        """Both base branch preimages of thp: left (neutral) and right."""
        left = invert_intermittent_left(self.gamma, thp)
        right = 0.5 * (1.0 + thp)
        return left, right

    def _fiber_preimage(self, th, zr, zi):
        cx, cy = self._center(th)
        return 10.0 * (zr - cx), 10.0 * (zi - cy)

    def step_inverse(self, p):
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 1
        q = np.atleast_2d(p)
        thp, zr, zi = q[..., 0], q[..., 1], q[..., 2]
        out = np.empty_like(q)
        taken = np.zeros(q.shape[0], dtype=bool)
        for th in self._base_preimages(thp):
            wr, wi = self._fiber_preimage(th, zr, zi)
            ok = wr * wr + wi * wi <= (1.0 + 1e-9) ** 2
            both = ok & taken
            if np.any(both):
                raise BranchAmbiguous(
                    "two admissible preimages; the fiber tubes should be disjoint")
            use = ok & ~taken
            out[use, 0] = th[use]
            out[use, 1] = wr[use]
            out[use, 2] = wi[use]
            taken |= ok
        if not np.all(taken):
            raise BranchAmbiguous(
                "no admissible preimage; the point is outside the image of the solid torus")
        return out[0] if scalar else out

    def log_norms(self, p):
        p = np.asarray(p, dtype=float)
        fp = intermittent_deriv(self.gamma, p[..., 0])
        lf = np.log(fp)
        return SplitLogNorms(
            phi_cs=np.full_like(lf, -math.log(10.0)),
            phi_cu=-lf,
            j_cu=0.5 * np.log(fp * fp + np.pi ** 2),
        )

    def sample_uniform(self, rng, count):
        th = rng.random(count)
        r = np.sqrt(rng.random(count))
        ang = 2.0 * np.pi * rng.random(count)
        return np.stack([th, r * np.cos(ang), r * np.sin(ang)], axis=-1)

    def sample_disk(self, rng, count):
        """Lebesgue on the base circle at z = 0 (a reference cu disk)."""
        th = rng.random(count)
        z = np.zeros_like(th)
        return np.stack([th, z, z], axis=-1)

    def embed(self, p):
        p = np.asarray(p, dtype=float)
        return np.concatenate([_embed_circle(p[..., 0]), p[..., 1:]], axis=-1)

    def holonomy_defaults(self):
        """(C_J, eta, sigma_s) used by holonomy remainder bounds."""
        return 50.0, 1.0, 0.35

    def domain_check(self, p):
        super().domain_check(p)
        p = np.asarray(p, dtype=float)
        r2 = p[..., 1] ** 2 + p[..., 2] ** 2
        if np.any(r2 > (1.0 + 1e-9) ** 2):
            raise DomainEscape("solenoid: fiber coordinate left the unit disk")


class ModifiedSolenoid(Solenoid):
    """Solenoid with the fiber contraction neutralized along a period-2 orbit.

    The base map has a period-2 orbit theta_0 <-> theta_1 with theta_0 on
    the neutral branch; it lifts to a unique period-2 orbit (theta_i, z_i)
    of the skew product.  Around each lifted point the fiber map is
    modified radially:

        z  ->  z/10 + c(theta) + (m - 1) (z - z_i) / 10

    where m = 1 + (depth - 1) B(rho / radius) and rho is the product-metric
    distance to the nearest anchor.  B is a log-radial C-infinity profile
    (flat 1 at the core, flat 0 outside) chosen so the radial image map
    s -> m(s) s stays strictly increasing; the classical exp(1 - 1/(1-u^2))
    bump at depth 10 would fold it.  At the anchors m equals depth exactly,
    the fiber derivative is the identity, and phi_cs vanishes: the uniform
    fiber contraction is destroyed along this single orbit while the map
    stays a diffeomorphism onto its image.

    phi_cs = log(m/10) is exact because the fiber perturbation is radial
    around z_i: the singular values of the fiber derivative are m/10 and
    (m + rho_z dm/drho_z)/10 <= m/10.
    """

    kind = "modified-solenoid"

    def __init__(self, gamma=0.5, bump: Optional[BumpSpec] = None):
        super().__init__(gamma=gamma)
        bump = bump or BumpSpec()
        center = bump.center
        if center is None:
            center = self._solve_period2_base()
        self.bump = BumpSpec(center=float(center), radius=bump.radius,
                             depth=bump.depth, width=bump.width)
        th0 = self.bump.center
        th1 = float(intermittent_map(self.gamma, th0))
        c0 = np.array(self._center(th0))
        c1 = np.array(self._center(th1))
        z0 = (c0 / 10.0 + c1) * (100.0 / 99.0)
        z1 = z0 / 10.0 + c0
        self._anchors_th = np.array([th0, th1])
        self._anchors_z = np.stack([z0, z1])
        self.phibar_cs = math.log(10.0)      # m <= depth = 10 keeps -phi_cs <= log 10
        self._check_construction()

    def _solve_period2_base(self):
        # theta on the left branch with f(theta) = (1 + theta)/2; then the
        # right branch returns f((1+theta)/2) = theta.
        g = self.gamma
        lo, hi = 1e-9, 0.5 - 1e-12
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            val = mid * (1.0 + (2.0 ** g) * mid ** g) - 0.5 * (1.0 + mid)
            if val > 0.0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def _check_construction(self):
        b = self.bump
        if not (b.depth > 1.0 and b.radius > 0.0 and b.width > 1.0):
            raise ValueError("bump parameters out of range")
        th0, th1 = self._anchors_th
        z0, z1 = self._anchors_z
        sep = math.sqrt(float(circle_dist(th0, th1)) ** 2
                        + float(np.sum((z0 - z1) ** 2)))
        if sep <= 2.0 * b.radius:
            raise ValueError(
                f"bump radius {b.radius} too large, anchor separation {sep:.3f}")
        # period-2 closure of the lifted orbit
        p0 = np.array([th0, z0[0], z0[1]])
        p2 = self.step(self.step(p0))
        if not np.allclose(p2, p0, atol=1e-10):
            raise ValueError("lifted period-2 orbit failed to close up")
        # sampled monotonicity of the radial image map s -> m(s) s, i.e.
        # 1 + d log m / d log u > 0; this is the injectivity margin.
        u = np.geomspace(math.exp(-b.width) * 1e-2, 1.0 - 1e-9, 4000)
        m = self._depth_factor(u * b.radius)
        dlogm = np.diff(np.log(m))
        dlogu = np.diff(np.log(u))
        margin = 1.0 + (dlogm / dlogu)
        if margin.min() < 0.05:
            raise ValueError(
                f"fiber radial map not safely monotone, margin {margin.min():.3f}")

    def _depth_factor(self, rho):
        """m(rho) = 1 + (depth - 1) B(rho / radius) with the log-radial profile."""
        b = self.bump
        shape = np.shape(rho)
        u = np.atleast_1d(np.asarray(rho, dtype=float)).ravel() / b.radius
        out = np.ones_like(u)
        core = u <= math.exp(-b.width)
        mid = (~core) & (u < 1.0)
        out[core] = b.depth
        if np.any(mid):
            v = -np.log(u[mid]) / b.width
            s, _ = _smoothstep_inf(v)
            out[mid] = 1.0 + (b.depth - 1.0) * s
        return out.reshape(shape)

    def _depth_factor_grad(self, rho):
        """dm/drho, vanishing at the core and outside the support."""
        b = self.bump
        shape = np.shape(rho)
        u = np.atleast_1d(np.asarray(rho, dtype=float)).ravel() / b.radius
        out = np.zeros_like(u)
        mid = (u > math.exp(-b.width)) & (u < 1.0)
        if np.any(mid):
            v = -np.log(u[mid]) / b.width
            _, ds = _smoothstep_inf(v)
            # dm/du = (depth-1) * ds * dv/du, dv/du = -1/(width u)
            out[mid] = (b.depth - 1.0) * ds * (-1.0 / (b.width * u[mid])) / b.radius
        return out.reshape(shape)

    def _nearest_anchor(self, th, zr, zi):
        """Index, product-metric distance, and offsets to the nearest anchor."""
        th = np.asarray(th, dtype=float)
        d2 = []
        for i in range(2):
            dth = circle_signed(th, self._anchors_th[i])
            dzr = zr - self._anchors_z[i, 0]
            dzi = zi - self._anchors_z[i, 1]
            d2.append(dth * dth + dzr * dzr + dzi * dzi)
        idx = (d2[1] < d2[0]).astype(np.int64)
        rho = np.sqrt(np.where(idx == 1, d2[1], d2[0]))
        dth = circle_signed(th, self._anchors_th[idx])
        dzr = zr - self._anchors_z[idx, 0]
        dzi = zi - self._anchors_z[idx, 1]
        return idx, rho, dth, dzr, dzi

    def step(self, p):
        p = np.asarray(p, dtype=float)
        th, zr, zi = p[..., 0], p[..., 1], p[..., 2]
        cx, cy = self._center(th)
        _, rho, _, dzr, dzi = self._nearest_anchor(th, zr, zi)
        m = self._depth_factor(rho)
        wr = zr / 10.0 + cx + (m - 1.0) * dzr / 10.0
        wi = zi / 10.0 + cy + (m - 1.0) * dzi / 10.0
        return np.stack([intermittent_map(self.gamma, th), wr, wi], axis=-1)

    def log_norms(self, p):
        p = np.asarray(p, dtype=float)
        th, zr, zi = p[..., 0], p[..., 1], p[..., 2]
        fp = intermittent_deriv(self.gamma, th)
        _, rho, dth, dzr, dzi = self._nearest_anchor(th, zr, zi)
        m = self._depth_factor(rho)
        dm = self._depth_factor_grad(rho)
        # theta derivative of the fiber image: the center speed plus the
        # theta dependence of the depth factor (anchors are locally constant)
        ang = 2.0 * np.pi * th
        cpx = -np.pi * np.sin(ang)
        cpy = np.pi * np.cos(ang)
        with np.errstate(invalid="ignore", divide="ignore"):
            dm_dth = np.where(rho > 0.0, dm * dth / np.where(rho > 0.0, rho, 1.0), 0.0)
        gx = cpx + dm_dth * dzr / 10.0
        gy = cpy + dm_dth * dzi / 10.0
        return SplitLogNorms(
            phi_cs=np.log(m / 10.0),
            phi_cu=-np.log(fp),
            j_cu=0.5 * np.log(fp * fp + gx * gx + gy * gy),
        )

    def step_inverse(self, p):
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 1
        q = np.atleast_2d(p)
        thp, zr, zi = q[..., 0], q[..., 1], q[..., 2]
        out = np.empty_like(q)
        taken = np.zeros(q.shape[0], dtype=bool)
        for th in self._base_preimages(thp):
            wr, wi = self._fiber_preimage(th, zr, zi)
            wr, wi = self._undo_bump(th, wr, wi)
            ok = wr * wr + wi * wi <= (1.0 + 1e-9) ** 2
            both = ok & taken
            if np.any(both):
                raise BranchAmbiguous(
                    "two admissible preimages; the fiber tubes should be disjoint")
            use = ok & ~taken
            out[use, 0] = th[use]
            out[use, 1] = wr[use]
            out[use, 2] = wi[use]
            taken |= ok
        if not np.all(taken):
            raise BranchAmbiguous(
                "no admissible preimage; the point is outside the image of the solid torus")
        return out[0] if scalar else out

    def _undo_bump(self, th, wr, wi):
        """Invert z -> z + (m - 1)(z - z_i) at known base coordinate.

        wr, wi is the naive preimage 10 (z' - c(theta)), which equals
        z_i + m(rho) (z - z_i).  Outside the bump support the map is the
        identity; inside, the radial part s -> m(sqrt(dth^2 + s^2)/R) s is
        strictly increasing and is inverted by bisection.
        """
        b = self.bump
        wr = np.array(wr, dtype=float, copy=True)
        wi = np.array(wi, dtype=float, copy=True)
        for i in range(2):
            dth = circle_signed(th, self._anchors_th[i])
            tr = wr - self._anchors_z[i, 0]
            ti = wi - self._anchors_z[i, 1]
            t2 = tr * tr + ti * ti
            scrit2 = b.radius ** 2 - dth * dth
            inside = (scrit2 > 0.0) & (t2 < scrit2)
            if not np.any(inside):
                continue
            tmag = np.sqrt(t2[inside])
            dth_i = dth[inside]
            lo = np.zeros_like(tmag)
            hi = np.sqrt(scrit2[inside])
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                val = self._depth_factor(np.sqrt(dth_i * dth_i + mid * mid)) * mid
                high = val > tmag
                hi = np.where(high, mid, hi)
                lo = np.where(high, lo, mid)
            s = 0.5 * (lo + hi)
            with np.errstate(invalid="ignore", divide="ignore"):
                scale = np.where(tmag > 0.0, s / np.where(tmag > 0.0, tmag, 1.0), 0.0)
            wr[inside] = self._anchors_z[i, 0] + tr[inside] * scale
            wi[inside] = self._anchors_z[i, 1] + ti[inside] * scale
        return wr, wi

    def anchor_points(self):
        """The lifted period-2 orbit as two state points."""
        return np.concatenate(
            [self._anchors_th[:, None], self._anchors_z], axis=1)


class DerivedAnosovT2(System):
    """Derived-from-Anosov torus map: cat map composed with a local surgery.

    F = h o A where A = [[2,1],[1,1]] and h is the time-1 map (20 RK4 steps)
    of the vector field X(p) = mu b(|d|/r) <d, e_s> e_s, d being the wrapped
    displacement from the fixed point 0.  h moves points only along the
    stable eigendirection e_s, so the line field e_s stays exactly invariant
    and phi_cs = log lambda_s + log Dh_s is available in closed form through
    the variational equation of the integrator.  mu is chosen so the fixed
    point's stable multiplier becomes 1.2: the origin turns into a repeller
    and two saddles split off along the e_s axis while the map remains a
    diffeomorphism.  The cu data keeps the constant cat-map rates.
    """

    kind = "da"
    dim = 2
    invertible = True

    RADIUS = 0.15
    TARGET_MULT = 1.2
    NSTEPS = 20

    cu_exponent = LOG_LAM_U
    cs_exponent = None

    def __init__(self):
        self.mu = math.log(self.TARGET_MULT / LAM_S)
        self.phibar_cu = LOG_LAM_U
        # crude uniform bound: |log Dh_s| <= mu sup|d(b(u) xi)/d xi| over the ball
        u = np.linspace(0.0, 1.0 - 1e-9, 2001)
        b, db = _mollifier(u)
        self._sup_field_deriv = float(np.max(b + u * np.abs(db)))
        self.phibar_cs = -math.log(LAM_S) + self.mu * self._sup_field_deriv
        self._check_construction()

    def _check_construction(self):
        mult = LAM_S * float(self._flow(np.array([0.0]), np.array([0.0]))[1][0])
        if not (1.05 < mult < 1.5):
            raise ValueError(f"origin stable multiplier {mult:.4f} not a repeller")
        # sampled positivity of the stable derivative of h over the ball
        g = np.linspace(-self.RADIUS, self.RADIUS, 41)
        xu, xs = np.meshgrid(g, g)
        _, der = self._flow(xu.ravel(), xs.ravel())
        if der.min() <= 0.05:
            raise ValueError(f"surgery flow map nearly folds, min derivative {der.min():.3f}")

    def _field(self, xi_u, xi_s):
        rho = np.hypot(xi_u, xi_s)
        u = rho / self.RADIUS
        b, db = _mollifier(u)
        g = self.mu * b * xi_s
        with np.errstate(invalid="ignore", divide="ignore"):
            rad = np.where(rho > 0.0,
                           xi_s * xi_s / (np.where(rho > 0.0, rho, 1.0) * self.RADIUS),
                           0.0)
        gp = self.mu * (b + rad * db)
        return g, gp

    def _flow(self, xi_u, xi_s):
        """Time-1 RK4 flow of the stable push and its xi_s derivative."""
        dt = 1.0 / self.NSTEPS
        x = np.array(xi_s, dtype=float, copy=True)
        der = np.ones_like(x)
        for _ in range(self.NSTEPS):
            k1, d1 = self._field(xi_u, x)
            x2 = x + 0.5 * dt * k1
            k2, d2r = self._field(xi_u, x2)
            d2 = d2r * (1.0 + 0.5 * dt * d1)
            x3 = x + 0.5 * dt * k2
            k3, d3r = self._field(xi_u, x3)
            d3 = d3r * (1.0 + 0.5 * dt * d2)
            x4 = x + dt * k3
            k4, d4r = self._field(xi_u, x4)
            d4 = d4r * (1.0 + dt * d3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            der = der * (1.0 + (dt / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4))
        return x, der

    def _surgery(self, q):
        """Apply h to points q on the torus."""
        q = np.asarray(q, dtype=float)
        d = q - np.floor(q + 0.5)          # wrapped displacement from 0
        xi_u = d @ EU
        xi_s = d @ ES
        rho = np.hypot(xi_u, xi_s)
        act = rho < self.RADIUS
        if np.any(act):
            new_s, _ = self._flow(xi_u[act], xi_s[act])
            shift = (new_s - xi_s[act])[..., None] * ES
            q = q.copy()
            q[act] = wrap01(q[act] + shift)
        return wrap01(q)

    def step(self, p):
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 1
        q = np.atleast_2d(p)
        x, y = q[..., 0], q[..., 1]
        aq = np.stack([wrap01(2.0 * x + y), wrap01(x + y)], axis=-1)
        out = self._surgery(aq)
        return out[0] if scalar else out

    def step_inverse(self, p):
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 1
        q = np.atleast_2d(p).copy()
        d = q - np.floor(q + 0.5)
        xi_u = d @ EU
        xi_s = d @ ES
        rho = np.hypot(xi_u, xi_s)
        act = rho < self.RADIUS * (1.0 + 1e-9)
        if np.any(act):
            src = self._invert_flow(xi_u[act], xi_s[act])
            shift = (src - xi_s[act])[..., None] * ES
            q[act] = wrap01(q[act] + shift)
        x, y = q[..., 0], q[..., 1]
        out = np.stack([wrap01(x - y), wrap01(-x + 2.0 * y)], axis=-1)
        return out[0] if scalar else out

    def _invert_flow(self, xi_u, target):
        """Solve flow(xi_u, s) = target for s; monotone in s, bisect then polish."""
        slack = 0.08                        # exceeds the maximal stable displacement
        lo = target - slack
        hi = target + slack
        for _ in range(10):
            mid = 0.5 * (lo + hi)
            val, _ = self._flow(xi_u, mid)
            high = val > target
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        s = 0.5 * (lo + hi)
        for _ in range(4):
            val, der = self._flow(xi_u, s)
            s = s - (val - target) / der
        return s

    def log_norms(self, p):
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 1
        q = np.atleast_2d(p)
        x, y = q[..., 0], q[..., 1]
        aq = np.stack([wrap01(2.0 * x + y), wrap01(x + y)], axis=-1)
        d = aq - np.floor(aq + 0.5)
        xi_u = d @ EU
        xi_s = d @ ES
        _, der = self._flow(xi_u, xi_s)
        phi_cs = math.log(LAM_S) + np.log(der)
        shape = q.shape[:-1]
        out = SplitLogNorms(
            phi_cs=phi_cs,
            phi_cu=np.full(shape, -LOG_LAM_U),
            j_cu=np.full(shape, LOG_LAM_U),
        )
        if scalar:
            out = SplitLogNorms(out.phi_cs[0], out.phi_cu[0], out.j_cu[0])
        return out

    def sample_uniform(self, rng, count):
        return rng.random((count, 2))

    def embed(self, p):
        p = np.asarray(p, dtype=float)
        return np.concatenate(
            [_embed_circle(p[..., 0]), _embed_circle(p[..., 1])], axis=-1)


_KINDS = {
    "catmap": CatMap,
    "intermittent": IntermittentCircle,
    "solenoid": Solenoid,
    "modified-solenoid": ModifiedSolenoid,
    "da": DerivedAnosovT2,
}


def build_system(spec: SystemSpec) -> System:
    return make_system(spec.kind, gamma=spec.gamma, bump=spec.bump)


def make_system(kind: str, gamma: Optional[float] = None,
                bump: Optional[BumpSpec] = None) -> System:
    if kind not in _KINDS:
        raise ValueError(f"unknown system kind '{kind}', expected one of {sorted(_KINDS)}")
    if kind == "catmap":
        return CatMap()
    if kind == "da":
        return DerivedAnosovT2()
    g = 0.5 if gamma is None else gamma
    if kind == "intermittent":
        return IntermittentCircle(gamma=g)
    if kind == "solenoid":
        return Solenoid(gamma=g)
    return ModifiedSolenoid(gamma=g, bump=bump)


def domination_margin(system: System, p, n: int) -> float:
    """S_n phi_cs + S_n phi_cu along the orbit of p; n = 0 gives 0.

    Negative values certify a domination gap over the first n steps.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    p = np.asarray(p, dtype=float)
    total = 0.0
    x = p
    for _ in range(n):
        norms = system.log_norms(x)
        total += float(norms.phi_cs) + float(norms.phi_cu)
        x = system.step(x)
    return total
