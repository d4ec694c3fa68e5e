"""Subcommand dispatch: every run writes CSV outputs plus one manifest.

Identical (subcommand, config, seed) produce byte-identical CSVs; worker
count never changes results, only wall clock.  Partial outputs are
removed when a run fails.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Dict, List, Tuple

import numpy as np

from . import __version__
from .basins import agreement_scan, build_reference
from .cocycle import CocycleTrace, generate_orbit, lyapunov, trace
from .config import ExperimentConfig, print_schema
from .errors import ConfigInvalid, ErgolabError
from .hyptimes import pliss_times
from .mixing import (classify_tail, estimate_correlation, holonomy_density,
                     observable_battery, predict_mixing_class, srb_stability,
                     tail_histogram)
from .parallel import rng_for
from .runio import remove_outputs, sha256_file, write_csv, write_manifest
from .schedules import EventDetector, block_theorem_check
from .systems import System

BLOCK_LADDER = (8, 16, 32, 64)


def _burned_start(system: System, cfg: ExperimentConfig, rng) -> np.ndarray:
    x = system.sample_uniform(rng, 1)
    for _ in range(cfg.burn_in):
        x = system.step(x)
    return x[0]


def _coord_header(system: System) -> List[str]:
    if system.dim == 3:
        return ["theta", "z_re", "z_im"]
    return [f"x{i + 1}" for i in range(system.dim)]


def _cmd_orbit(cfg: ExperimentConfig, system: System, out: str):
    start = _burned_start(system, cfg, rng_for(cfg.seed))
    orbit = generate_orbit(system, start, cfg.horizon)
    tr = trace(system, orbit)
    header = ["t"] + _coord_header(system) + ["phi_cs", "phi_cu", "j_cu"]
    rows = [[t, *orbit.points[t], tr.phi_cs[t], tr.phi_cu[t], tr.j_cu[t]]
            for t in range(cfg.horizon)]
    path = os.path.join(out, "orbit.csv")
    write_csv(path, "orbit", header, rows)
    summary = {"mean_phi_cu": float(np.mean(tr.phi_cu)),
               "mean_phi_cs": float(np.mean(tr.phi_cs))}
    return [path], summary


def _batch_traces(system: System, cfg: ExperimentConfig, count: int):
    """count parallel orbits as per-orbit traces, vectorized over starts."""
    rng = rng_for(cfg.seed)
    x = system.sample_uniform(rng, count)
    for _ in range(cfg.burn_in):
        x = system.step(x)
    cs = np.empty((count, cfg.horizon))
    cu = np.empty((count, cfg.horizon))
    j = np.empty((count, cfg.horizon))
    for t in range(cfg.horizon):
        ln = system.log_norms(x)
        cs[:, t], cu[:, t], j[:, t] = ln.phi_cs, ln.phi_cu, ln.j_cu
        x = system.step(x)
    return [CocycleTrace(phi_cs=cs[k], phi_cu=cu[k], j_cu=j[k])
            for k in range(count)]


def _cmd_lyapunov(cfg: ExperimentConfig, system: System, out: str):
    traces = _batch_traces(system, cfg, cfg.samples)
    fields = ["phi_cu"] + (["phi_cs"] if system.dim > 1 else [])
    rows = []
    summary: Dict[str, float] = {}
    for field in fields:
        est = lyapunov(traces, field)
        rows.append([est.field, est.value, est.stderr, est.horizon, est.count])
        summary[f"lyapunov_{field}"] = est.value
        summary[f"lyapunov_{field}_stderr"] = est.stderr
    path = os.path.join(out, "lyapunov.csv")
    write_csv(path, "lyapunov", ["field", "value", "stderr", "horizon", "count"], rows)
    return [path], summary


def _cmd_pliss(cfg: ExperimentConfig, system: System, out: str):
    start = _burned_start(system, cfg, rng_for(cfg.seed))
    tr = trace(system, generate_orbit(system, start, cfg.horizon))
    c_u = cfg.resolved_cu()
    a = -tr.phi_cu
    ts, theta = pliss_times(a, 0.5 * c_u, c_u, system.phibar_cu)
    path = os.path.join(out, "pliss.csv")
    write_csv(path, "pliss", ["time", "theta"], [[int(t), theta] for t in ts.times])
    summary = {"count": ts.count, "theta": theta,
               "frequency": ts.count / cfg.horizon}
    return [path], summary


def _cmd_hyptimes(cfg: ExperimentConfig, system: System, out: str):
    start = _burned_start(system, cfg, rng_for(cfg.seed))
    tr = trace(system, generate_orbit(system, start, cfg.horizon))
    det = EventDetector(cfg.detector, strict=cfg.strict)
    sigma = cfg.resolved_sigma()
    ts = det.times(tr, sigma)
    path = os.path.join(out, "hyptimes.csv")
    write_csv(path, "hyptimes", ["time"], [[int(t)] for t in ts.times])
    summary = {"count": ts.count, "sigma": sigma, "detector": det.kind,
               "frequency": ts.count / cfg.horizon}
    return [path], summary


def _fit_rows(fit) -> List[List]:
    rows = []
    if fit.chosen == "degenerate":
        return [["degenerate", "", 1.0, "", 1]]
    rows.append(["polynomial",
                 f"alpha={fit.alpha:.17g};log_amp={fit.log_amp_poly:.17g}",
                 fit.poly_r2, -fit.alpha, 1 if fit.chosen == "polynomial" else 0])
    rows.append(["exponential",
                 f"c={fit.c:.17g};alpha_stretch={fit.alpha_stretch:.17g};"
                 f"log_amp={fit.log_amp_exp:.17g}",
                 fit.exp_r2, "", 1 if fit.chosen == "exponential" else 0])
    return rows


def _cmd_tail(cfg: ExperimentConfig, system: System, out: str):
    c_u = cfg.resolved_cu()
    hist = tail_histogram(system, c_u, cfg.horizon, cfg.samples, cfg.seed,
                          workers=cfg.workers)
    tail_path = os.path.join(out, "tail.csv")
    write_csv(tail_path, "tail", ["n", "frac", "stderr", "censored"],
              [[int(n), f, s, hist.censored_frac]
               for n, f, s in zip(hist.n_grid, hist.frac, hist.stderr)])
    fit = classify_tail(hist)
    mix = predict_mixing_class(fit)
    fits_path = os.path.join(out, "fits.csv")
    write_csv(fits_path, "fits", ["model", "params", "r_squared", "slope", "chosen"],
              _fit_rows(fit))
    summary = {"censored_frac": hist.censored_frac, "chosen_model": fit.chosen,
               "mixing_class": mix.label(), "c_u": c_u}
    if fit.chosen == "polynomial":
        summary["alpha"] = fit.alpha
    return [tail_path, fits_path], summary


def _resolve_pair(cfg: ExperimentConfig, system: System) -> Tuple[str, str]:
    names = [n for n in observable_battery(system) if n != "one"]
    phi = names[0] if cfg.phi == "auto" else cfg.phi
    psi = (names[1] if len(names) > 1 else names[0]) if cfg.psi == "auto" else cfg.psi
    return phi, psi


def _cmd_correlate(cfg: ExperimentConfig, system: System, out: str):
    phi, psi = _resolve_pair(cfg, system)
    series = estimate_correlation(system, phi, psi, cfg.n_max, cfg.samples,
                                  cfg.burn_in, cfg.seed, power=cfg.power,
                                  workers=cfg.workers)
    path = os.path.join(out, "correlation.csv")
    write_csv(path, "correlation", ["n", "cor", "stderr"],
              [[int(n), c, s] for n, c, s in
               zip(series.n_grid, series.cor, series.stderr)])
    stab = srb_stability(system, cfg.burn_in, min(cfg.samples, 2000), cfg.seed)
    k = int(np.argmax(np.abs(series.cor)))
    summary = {"phi": phi, "psi": psi, "power": cfg.power,
               "max_abs_cor": float(np.abs(series.cor[k])),
               "argmax_n": int(series.n_grid[k]), "srb_stability": stab}
    return [path], summary


def _cmd_block(cfg: ExperimentConfig, system: System, out: str):
    det = EventDetector(cfg.detector, strict=cfg.strict)
    sigma = cfg.resolved_sigma()
    ladder = sorted({j for j in BLOCK_LADDER if j <= cfg.block_J} | {cfg.block_J})
    rows = []
    last = None
    for J in ladder:
        est = block_theorem_check(system, det, sigma, cfg.samples, J,
                                  cfg.horizon, burn_in=max(cfg.burn_in, J + 16),
                                  seed=cfg.seed, workers=cfg.workers)
        rows.append([est.truncation, est.mu_block, est.mu_stderr, est.d_plus,
                     est.d_plus_stderr, est.sigma, est.horizon, est.samples])
        last = est
    path = os.path.join(out, "block.csv")
    write_csv(path, "block",
              ["J", "mu_block", "mu_stderr", "d_plus", "d_plus_stderr",
               "sigma", "horizon", "samples"], rows)
    gap = abs(last.mu_block - last.d_plus)
    spread = (last.mu_stderr ** 2 + last.d_plus_stderr ** 2) ** 0.5
    stab = srb_stability(system, max(cfg.burn_in, cfg.block_J + 16),
                         min(cfg.samples, 2000), cfg.seed)
    summary = {"sigma": sigma, "detector": det.kind, "final_J": last.truncation,
               "mu_block": last.mu_block, "d_plus": last.d_plus,
               "gap": gap, "combined_stderr": spread, "srb_stability": stab}
    return [path], summary


def _cmd_basin(cfg: ExperimentConfig, system: System, out: str):
    ref = build_reference(system, cfg.ref_burn, cfg.ref_length, seed=cfg.seed)
    report = agreement_scan(system, cfg.samples, cfg.basin_n, cfg.seed, ref,
                            tol_ergodic=cfg.tol_ergodic,
                            tol_geometric=cfg.tol_geometric,
                            tol_topological=cfg.tol_topological,
                            slope_tol=cfg.slope_tol, workers=cfg.workers)
    header = _coord_header(system) + ["ergodic", "geometric", "topological",
                                      "max_deviation", "final_distance",
                                      "log_dist_slope"]
    rows = [[*p, v.ergodic, v.geometric, v.topological, v.max_deviation,
             v.final_distance, v.log_dist_slope]
            for p, v in zip(report.points, report.verdicts)]
    path = os.path.join(out, "basin.csv")
    write_csv(path, "basin", header, rows)
    summary = {
        "samples": report.samples, "n": report.n,
        "frac_ergodic": report.frac_ergodic,
        "frac_geometric": report.frac_geometric,
        "frac_topological": report.frac_topological,
        "agree_eg": report.agree_eg, "agree_et": report.agree_et,
        "agree_gt": report.agree_gt, "symm_diff_eg": report.symm_diff_eg,
        "tol_ergodic": report.tol_ergodic, "tol_geometric": report.tol_geometric,
        "tol_topological": report.tol_topological,
        "cloud_resolution": ref.resolution,
        "note": "agreement is a finite-grid statistic; measure-zero "
                "exceptional sets are invisible at any resolution",
    }
    return [path], summary


def _cmd_holonomy(cfg: ExperimentConfig, system: System, out: str):
    if system.kind not in ("solenoid", "modified-solenoid"):
        raise ConfigInvalid("system", "holonomy needs a solenoid variant")
    rng = rng_for(cfg.seed)
    x = _burned_start(system, cfg, rng)
    rows = []
    max_dev = 0.0
    for k in range(cfg.holonomy_pairs):
        angle = 2.0 * np.pi * rng.random()
        theta_x = x.copy()
        theta_x[1] += cfg.holonomy_dz * np.cos(angle)
        theta_x[2] += cfg.holonomy_dz * np.sin(angle)
        h = holonomy_density(system, x, theta_x, cfg.holonomy_n,
                             c_j=cfg.c_j, eta=cfg.eta, sigma_s=cfg.sigma_s)
        rows.append([k, x[0], x[1], x[2], h.fiber_distance, h.value,
                     h.remainder_bound, h.truncation])
        max_dev = max(max_dev, abs(h.value - 1.0))
        for _ in range(3):
            x = system.step(x[None, :])[0]
    path = os.path.join(out, "holonomy.csv")
    write_csv(path, "holonomy",
              ["idx", "theta", "z_re", "z_im", "fiber_distance", "value",
               "remainder_bound", "truncation"], rows)
    summary = {"pairs": cfg.holonomy_pairs, "truncation": cfg.holonomy_n,
               "max_abs_value_minus_one": max_dev}
    return [path], summary


_DISPATCH = {
    "orbit": _cmd_orbit,
    "lyapunov": _cmd_lyapunov,
    "pliss": _cmd_pliss,
    "hyptimes": _cmd_hyptimes,
    "tail": _cmd_tail,
    "correlate": _cmd_correlate,
    "block": _cmd_block,
    "basin": _cmd_basin,
    "holonomy": _cmd_holonomy,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergolab",
        description="numerical laboratory for nonuniformly hyperbolic diagnostics")
    parser.add_argument("--print-schema", action="store_true",
                        help="print the config schema and exit")
    sub = parser.add_subparsers(dest="subcommand")
    for name in _DISPATCH:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="override worker count")
        p.add_argument("--print-schema", action="store_true",
                       help="print the config schema and exit")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "print_schema", False):
        print(print_schema())
        return 0
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = (ExperimentConfig.from_file(args.config) if args.config
               else ExperimentConfig())
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out
        if args.workers is not None:
            cfg.workers = args.workers
        cfg.validate()
        system = cfg.build_system()
    except ConfigInvalid as e:
        print(f"ergolab: config error: {e.field}: {e.message}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"ergolab: cannot read config: {e}", file=sys.stderr)
        return 3
    os.makedirs(cfg.out_dir, exist_ok=True)
    t0 = time.time()
    before = {entry.name for entry in os.scandir(cfg.out_dir)}

    def partials() -> List[str]:
        # anything the failed run managed to create before raising
        return [os.path.join(cfg.out_dir, entry.name)
                for entry in os.scandir(cfg.out_dir)
                if entry.name not in before and entry.is_file()]

    try:
        files, summary = _DISPATCH[args.subcommand](cfg, system, cfg.out_dir)
    except ConfigInvalid as e:
        remove_outputs(partials())
        print(f"ergolab: config error: {e.field}: {e.message}", file=sys.stderr)
        return 3
    except ErgolabError as e:
        remove_outputs(partials())
        print(f"ergolab: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    manifest = {
        "tool": "ergolab",
        "version": __version__,
        "csv_schema": "v1",
        "subcommand": args.subcommand,
        "config": cfg.to_mapping(),
        "wall_clock_seconds": time.time() - t0,
        "outputs": {os.path.basename(p): sha256_file(p) for p in files},
        "summary": summary,
    }
    write_manifest(os.path.join(cfg.out_dir, "manifest.json"), manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
