"""The five diagnostic figures.

Each renderer converts only the columns it draws and never recomputes a
statistic; fitted curves and slopes are re-read from the fits table the
lab wrote next to the data.  Figure size, DPI, and colors are fixed so
identical inputs give identical image bytes.
"""

import os
from dataclasses import dataclass
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .csvio import load_columns, run_seed
from .errors import SchemaMismatch

FIGSIZE = (6.4, 4.8)
DPI = 120

BLUE = "#1f77b4"
RED = "#d62728"
GRAY = "#b0b0b0"


@dataclass
class PlotRequest:
    kind: str
    csv: str
    out: str
    fits: Optional[str] = None    # tail only; default is the sibling fits.csv


def _floats(cols, name):
    return np.array(cols[name], dtype=float)


def _parse_params(text):
    out = {}
    for part in text.split(";"):
        if "=" in part:
            key, _, val = part.partition("=")
            out[key] = float(val)
    return out


def _fit_annotation(req: PlotRequest, n_shown, ax) -> str:
    """Overlay the chosen fitted curve and describe it; the fit is taken
    from the fits CSV, absent file means no annotation."""
    path = req.fits
    if path is None:
        path = os.path.join(os.path.dirname(os.path.abspath(req.csv)), "fits.csv")
        if not os.path.exists(path):
            return "fit unavailable"
    cols = load_columns(path, "fits", ["model", "params", "chosen"])
    picked = [k for k, flag in enumerate(cols["chosen"]) if flag == "1"]
    if not picked:
        return "fit unavailable"
    k = picked[0]
    model = cols["model"][k]
    if model == "degenerate":
        return "degenerate tail: gone by n = 2"
    p = _parse_params(cols["params"][k])
    nn = np.geomspace(max(float(n_shown.min()), 1.0), float(n_shown.max()), 200)
    if model == "polynomial":
        ax.plot(nn, np.exp(p["log_amp"]) * nn ** (-p["alpha"]), "-",
                color=RED, lw=1.2)
        return f"fitted slope {-p['alpha']:.3f} (polynomial)"
    ax.plot(nn, np.exp(p["log_amp"] - p["c"] * nn ** p["alpha_stretch"]), "-",
            color=RED, lw=1.2)
    return f"exponential fit, c = {p['c']:.3g}, stretch = {p['alpha_stretch']:.3g}"


def _draw_tail(cols, ax, req):
    n = _floats(cols, "n")
    frac = _floats(cols, "frac")
    pos = frac > 0.0
    ax.loglog(n[pos], frac[pos], ".", ms=4, color=BLUE)
    note = _fit_annotation(req, n[pos] if pos.any() else n, ax)
    ax.text(0.03, 0.05, note, transform=ax.transAxes, fontsize=9)
    ax.set_xlabel("n")
    ax.set_ylabel("fraction with expansion time > n")
    ax.set_title("expansion-time tail")


def _draw_correlation(cols, ax, req):
    n = _floats(cols, "n")
    cor = _floats(cols, "cor")
    se = _floats(cols, "stderr")
    mag = np.abs(cor)
    # below one standard error the series is unresolved; show the error
    # floor there so an exact null renders as a flat line at the floor
    y = np.maximum(np.maximum(mag, se), 1e-16)
    lo = np.maximum(mag - se, float(np.min(y)) / 10.0)
    hi = np.maximum(mag + se, float(np.min(y)) / 10.0)
    ax.fill_between(n, lo, hi, color=BLUE, alpha=0.2, lw=0)
    ax.semilogy(n, y, "-", marker=".", ms=4, lw=1, color=BLUE)
    ax.set_xlabel("lag n")
    ax.set_ylabel("|correlation|")
    ax.set_title("correlation decay")


def _draw_basin(cols, ax, req):
    names = list(cols)
    k = names.index("ergodic")
    if k < 2:
        raise SchemaMismatch("basin table needs two coordinate columns")
    x = _floats(cols, names[0])
    y = _floats(cols, names[1])
    erg = np.array(cols["ergodic"]) == "1"
    geo = np.array(cols["geometric"]) == "1"
    groups = [(erg & geo, BLUE, "both"),
              (~erg & ~geo, GRAY, "neither"),
              (erg ^ geo, RED, "disagree")]
    for mask, color, label in groups:
        ax.plot(x[mask], y[mask], ".", ms=3, color=color,
                label=f"{label} ({int(mask.sum())})")
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    ax.set_title("basin agreement map")
    ax.legend(loc="upper right", fontsize=8, markerscale=2)


def _draw_lyapunov(cols, ax, req):
    t = _floats(cols, "t")
    for field, color in (("phi_cu", RED), ("phi_cs", BLUE)):
        v = _floats(cols, field)
        running = np.cumsum(v) / (np.arange(v.size) + 1.0)
        ax.plot(t, running, lw=1.2, color=color, label=f"running mean {field}")
        ax.axhline(running[-1], color=color, lw=0.6, ls=":")
    ax.set_xlabel("t")
    ax.set_ylabel("Birkhoff average")
    ax.set_title("Lyapunov convergence")
    ax.legend(loc="center right", fontsize=9)


def _draw_block(cols, ax, req):
    J = _floats(cols, "J")
    ax.errorbar(J, _floats(cols, "mu_block"), yerr=_floats(cols, "mu_stderr"),
                fmt="o-", color=BLUE, capsize=3, lw=1.2, label="mu_block")
    ax.errorbar(J, _floats(cols, "d_plus"), yerr=_floats(cols, "d_plus_stderr"),
                fmt="s--", color=RED, capsize=3, lw=1.2, label="d_plus")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("truncation J")
    ax.set_ylabel("estimate")
    ax.set_title("block measure vs schedule density")
    ax.legend(loc="best", fontsize=9)


_SPECS = {
    "tail": ("tail", ["n", "frac", "stderr", "censored"], _draw_tail),
    "correlation": ("correlation", ["n", "cor", "stderr"], _draw_correlation),
    "basin-grid": ("basin", ["ergodic", "geometric"], _draw_basin),
    "lyapunov-convergence": ("orbit", ["t", "phi_cu", "phi_cs"], _draw_lyapunov),
    "block": ("block", ["J", "mu_block", "mu_stderr", "d_plus", "d_plus_stderr"],
              _draw_block),
}

KINDS = tuple(sorted(_SPECS))


def render(req: PlotRequest) -> str:
    """Draw one figure; returns the output path."""
    if req.kind not in _SPECS:
        raise SchemaMismatch(f"unknown plot kind '{req.kind}', "
                             f"expected one of {list(KINDS)}")
    schema, required, draw = _SPECS[req.kind]
    cols = load_columns(req.csv, schema, required)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    try:
        draw(cols, ax, req)
        seed = run_seed(req.csv)
        caption = "seed unrecorded" if seed is None else f"seed {seed}"
        fig.text(0.99, 0.01, caption, ha="right", va="bottom",
                 fontsize=8, color="#555555")
        # no Software tag: identical inputs must give identical bytes
        fig.savefig(req.out, dpi=DPI, metadata={"Software": None})
    finally:
        plt.close(fig)
    return req.out
