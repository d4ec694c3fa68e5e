"""Flat key=value experiment configuration.

One schema drives parsing, validation, `--print-schema`, and the manifest
echo.  Unset rate-like fields ("auto") resolve against per-system defaults
so every subcommand runs from a bare config naming only the system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dc_fields
from typing import Dict, Optional

from .errors import ConfigInvalid, PreconditionViolated
from .hyptimes import RateParams
from .systems import System, SystemSpec, BumpSpec, make_system, _KINDS

# per-system fallback rates: roughly half the cu Lyapunov exponent and half
# the cs rate, measured once at gamma = 0.5 over 4000 equilibrated orbits
DEFAULT_CU = {
    "catmap": 0.48,
    "da": 0.48,
    "intermittent": 0.31,
    "solenoid": 0.31,
    "modified-solenoid": 0.31,
}
DEFAULT_CS = {
    "catmap": 0.48,
    "da": 0.49,
    "intermittent": 0.0,
    "solenoid": 1.15,
    "modified-solenoid": 1.15,
}


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: str          # int | float | str | bool | optfloat
    default: object
    help: str


SCHEMA = [
    FieldSpec("system", "str", "catmap",
              "system kind: catmap | da | intermittent | solenoid | modified-solenoid"),
    FieldSpec("gamma", "float", 0.5, "intermittency exponent, in (0,1)"),
    FieldSpec("bump_radius", "float", 0.35, "modified-solenoid bump radius"),
    FieldSpec("bump_depth", "float", 10.0, "modified-solenoid peak multiplier"),
    FieldSpec("bump_width", "float", 10.0, "modified-solenoid log-radial profile width"),
    FieldSpec("c_u", "optfloat", None, "NUE rate; auto = per-system default"),
    FieldSpec("c_s", "optfloat", None, "NUC rate; auto = per-system default"),
    FieldSpec("sigma", "optfloat", None, "detector threshold; auto = exp(-c_u/2)"),
    FieldSpec("strict", "bool", False, "strict inequalities in time detectors"),
    FieldSpec("detector", "str", "hyperbolic", "event detector: hyperbolic | inverse"),
    FieldSpec("horizon", "int", 1000, "orbit length for traces, tails, densities"),
    FieldSpec("samples", "int", 10000, "Monte-Carlo sample count M"),
    FieldSpec("burn_in", "int", 64, "push-forward burn-in for the SRB surrogate"),
    FieldSpec("block_J", "int", 32, "largest backward truncation for block runs"),
    FieldSpec("n_max", "int", 20, "largest correlation lag"),
    FieldSpec("power", "int", 1, "correlate against the q-th iterate, lag q*n"),
    FieldSpec("phi", "str", "auto", "first observable; auto = battery entry 0"),
    FieldSpec("psi", "str", "auto", "second observable; auto = battery entry 1"),
    FieldSpec("ref_burn", "int", 1000, "reference-measure burn-in"),
    FieldSpec("ref_length", "int", 100000, "reference-orbit length, at least 10^4"),
    FieldSpec("basin_n", "int", 500, "iterates per grid point in basin tests"),
    FieldSpec("tol_ergodic", "optfloat", None, "ergodic tolerance; auto = from stderr"),
    FieldSpec("tol_geometric", "optfloat", None, "geometric tolerance; auto = from resolution"),
    FieldSpec("tol_topological", "optfloat", None, "topological tolerance; auto = 1.5x geometric"),
    FieldSpec("slope_tol", "float", 2e-2, "allowed log-distance slope in the geometric test"),
    FieldSpec("holonomy_n", "int", 32, "holonomy series truncation N"),
    FieldSpec("holonomy_pairs", "int", 16, "fiber pairs sampled by the holonomy run"),
    FieldSpec("holonomy_dz", "float", 0.25, "fiber separation of sampled pairs"),
    FieldSpec("c_j", "optfloat", None, "holonomy bound constant; auto = system default"),
    FieldSpec("eta", "optfloat", None, "holonomy Holder exponent; auto = system default"),
    FieldSpec("sigma_s", "optfloat", None, "holonomy contraction rate; auto = system default"),
    FieldSpec("seed", "int", 0, "base seed, u64"),
    FieldSpec("out_dir", "str", "runs", "output directory"),
    FieldSpec("workers", "int", 1, "worker processes"),
]

_BY_NAME = {f.name: f for f in SCHEMA}

_COUNT_FIELDS = ("horizon", "samples", "burn_in", "block_J", "n_max", "power",
                 "ref_burn", "ref_length", "basin_n", "holonomy_n",
                 "holonomy_pairs", "workers")


def _parse_value(spec: FieldSpec, raw: str):
    raw = raw.strip()
    try:
        if spec.kind == "int":
            return int(raw)
        if spec.kind == "float":
            return float(raw)
        if spec.kind == "optfloat":
            return None if raw == "auto" else float(raw)
        if spec.kind == "bool":
            if raw in ("true", "false"):
                return raw == "true"
            raise ValueError("expected true or false")
        return raw
    except ValueError as e:
        raise ConfigInvalid(spec.name, f"cannot parse {raw!r} as {spec.kind}: {e}")


@dataclass
class ExperimentConfig:
    system: str = "catmap"
    gamma: float = 0.5
    bump_radius: float = 0.35
    bump_depth: float = 10.0
    bump_width: float = 10.0
    c_u: Optional[float] = None
    c_s: Optional[float] = None
    sigma: Optional[float] = None
    strict: bool = False
    detector: str = "hyperbolic"
    horizon: int = 1000
    samples: int = 10000
    burn_in: int = 64
    block_J: int = 32
    n_max: int = 20
    power: int = 1
    phi: str = "auto"
    psi: str = "auto"
    ref_burn: int = 1000
    ref_length: int = 100000
    basin_n: int = 500
    tol_ergodic: Optional[float] = None
    tol_geometric: Optional[float] = None
    tol_topological: Optional[float] = None
    slope_tol: float = 2e-2
    holonomy_n: int = 32
    holonomy_pairs: int = 16
    holonomy_dz: float = 0.25
    c_j: Optional[float] = None
    eta: Optional[float] = None
    sigma_s: Optional[float] = None
    seed: int = 0
    out_dir: str = "runs"
    workers: int = 1

    @classmethod
    def from_mapping(cls, values: Dict[str, object]) -> "ExperimentConfig":
        for key in values:
            if key not in _BY_NAME:
                raise ConfigInvalid(key, "unknown key")
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        values: Dict[str, object] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                if "=" not in text:
                    raise ConfigInvalid(f"line {lineno}", f"expected key=value, got {text!r}")
                key, _, raw = text.partition("=")
                key = key.strip()
                if key not in _BY_NAME:
                    raise ConfigInvalid(key, "unknown key")
                if key in values:
                    raise ConfigInvalid(key, "duplicate key")
                values[key] = _parse_value(_BY_NAME[key], raw)
        return cls.from_mapping(values)

    def to_mapping(self) -> Dict[str, object]:
        out: Dict[str, object] = {}
        for f in dc_fields(self):
            v = getattr(self, f.name)
            out[f.name] = "auto" if v is None else v
        return out

    # resolution against per-system defaults

    def build_system(self) -> System:
        bump = BumpSpec(radius=self.bump_radius, depth=self.bump_depth,
                        width=self.bump_width)
        try:
            return make_system(self.system, gamma=self.gamma, bump=bump)
        except (PreconditionViolated, ValueError) as e:
            # constructor guards are stricter than the field-range checks
            raise ConfigInvalid("bump_radius", str(e))

    def resolved_cu(self) -> float:
        return DEFAULT_CU[self.system] if self.c_u is None else self.c_u

    def resolved_cs(self) -> float:
        return DEFAULT_CS[self.system] if self.c_s is None else self.c_s

    def resolved_sigma(self) -> float:
        if self.sigma is not None:
            return self.sigma
        return math.exp(-0.5 * self.resolved_cu())

    def rates(self, system: Optional[System] = None) -> RateParams:
        system = self.build_system() if system is None else system
        return RateParams(c_u=self.resolved_cu(), c_s=self.resolved_cs(),
                          phibar_cu=system.phibar_cu, phibar_cs=system.phibar_cs)

    def validate(self) -> None:
        if self.system not in _KINDS:
            raise ConfigInvalid("system", f"unknown kind {self.system!r}, "
                                          f"expected one of {sorted(_KINDS)}")
        if not (0.0 < self.gamma < 1.0):
            raise ConfigInvalid("gamma", "must lie in the open interval (0,1)")
        for name in _COUNT_FIELDS:
            if getattr(self, name) < 1:
                raise ConfigInvalid(name, "count must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ConfigInvalid("seed", "must fit in u64")
        if self.ref_length < 10_000:
            raise ConfigInvalid("ref_length", "reference orbit needs at least 10^4 points")
        if self.detector not in ("hyperbolic", "inverse"):
            raise ConfigInvalid("detector", "expected hyperbolic or inverse")
        if not (0.0 < self.bump_radius < 0.5):
            raise ConfigInvalid("bump_radius", "must lie in (0, 0.5)")
        if self.bump_depth <= 1.0:
            raise ConfigInvalid("bump_depth", "must exceed 1")
        if self.bump_width <= 0.0:
            raise ConfigInvalid("bump_width", "must be positive")
        if self.slope_tol < 0.0:
            raise ConfigInvalid("slope_tol", "must be >= 0")
        if self.holonomy_dz <= 0.0:
            raise ConfigInvalid("holonomy_dz", "must be positive")
        for name in ("tol_ergodic", "tol_geometric", "tol_topological"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise ConfigInvalid(name, "must be positive (or auto)")
        if self.sigma is not None and not (0.0 < self.sigma < 1.0):
            raise ConfigInvalid("sigma", "must lie in (0,1)")
        for name, v in (("c_j", self.c_j), ("sigma_s", self.sigma_s)):
            if v is not None and v <= 0.0:
                raise ConfigInvalid(name, "must be positive (or auto)")
        if self.sigma_s is not None and self.sigma_s >= 1.0:
            raise ConfigInvalid("sigma_s", "must lie in (0,1)")
        if self.eta is not None and not (0.0 < self.eta <= 1.0):
            raise ConfigInvalid("eta", "must lie in (0,1]")
        # rate caps against the system's analytic sup bounds
        system = self.build_system()
        cu, cs = self.resolved_cu(), self.resolved_cs()
        if not (0.0 < cu <= system.phibar_cu):
            raise ConfigInvalid("c_u", f"must lie in (0, {system.phibar_cu:.6g}] "
                                       f"for system {self.system}")
        if not (0.0 <= cs <= system.phibar_cs):
            raise ConfigInvalid("c_s", f"must lie in [0, {system.phibar_cs:.6g}] "
                                       f"for system {self.system}")
        if self.phi != "auto" or self.psi != "auto":
            from .mixing import observable_battery
            battery = observable_battery(system)
            for name, v in (("phi", self.phi), ("psi", self.psi)):
                if v != "auto" and v not in battery:
                    raise ConfigInvalid(name, f"unknown observable {v!r}; battery: "
                                              f"{sorted(battery)}")


def print_schema() -> str:
    width = max(len(f.name) for f in SCHEMA)
    lines = ["ergolab config schema (flat key=value lines, '#' comments):", ""]
    for f in SCHEMA:
        default = "auto" if f.default is None else (
            "true" if f.default is True else "false" if f.default is False else f.default)
        lines.append(f"  {f.name:<{width}}  {f.kind:<8}  default={default!s:<12}  {f.help}")
    return "\n".join(lines)
