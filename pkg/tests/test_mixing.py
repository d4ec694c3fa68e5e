"""Physical-measure sampling, correlation estimates with their exact null
cases, expansion-time tail histograms with right censoring, the competing
decay fits, and the stable holonomy density with its geometric remainder
certificate.
"""

import math

import numpy as np
import pytest

from ergolab.errors import (InsufficientData, NotSameFiber,
                            PreconditionViolated)
from ergolab.mixing import (TailHistogram, classify_tail, degenerate_fit,
                            estimate_correlation, fit_decay, holonomy_density,
                            observable_battery, predict_mixing_class,
                            resolve_observable, srb_sampler, srb_stability,
                            tail_fit_grid, tail_histogram)
from ergolab.parallel import rng_for
from ergolab.systems import make_system


# === observables ===


def test_battery_names_by_dimension():
    assert set(observable_battery(make_system("catmap"))) == {
        "cos_x1", "sin_x1", "cos_x2", "sin_x2", "tent", "one"}
    assert set(observable_battery(make_system("intermittent"))) == {
        "cos_x", "sin_x", "cos_2x", "tent", "one"}
    assert set(observable_battery(make_system("solenoid"))) == {
        "cos_theta", "sin_theta", "z_re", "z_im", "abs_z2", "tent", "one"}


def test_resolve_observable():
    cat = make_system("catmap")
    name, fn = resolve_observable(cat, "cos_x1")
    assert name == "cos_x1"
    x = np.array([[0.0, 0.3], [0.5, 0.1]])
    assert np.allclose(fn(x), [1.0, -1.0])
    custom = lambda p: p[..., 0]
    name2, fn2 = resolve_observable(cat, custom)
    assert fn2 is custom
    with pytest.raises(PreconditionViolated):
        resolve_observable(cat, "no_such_observable")


# === physical-measure sampling ===


def test_srb_sampler_shapes_and_edge_cases():
    so = make_system("solenoid")
    x = srb_sampler(so, 10, 100, seed=0)
    assert x.shape == (100, 3)
    empty = srb_sampler(so, 10, 0, seed=0)
    assert empty.shape == (0, 3)
    with pytest.raises(PreconditionViolated):
        srb_sampler(so, 0, 10, seed=0)
    with pytest.raises(PreconditionViolated):
        srb_sampler(so, 10, -1, seed=0)


def test_srb_sampler_catmap_stays_uniform():
    # Lebesgue is invariant, so burned means match the flat means
    cat = make_system("catmap")
    x = srb_sampler(cat, 40, 40_000, seed=1)
    for name in ("cos_x1", "sin_x1", "cos_x2", "sin_x2"):
        fn = observable_battery(cat)[name]
        assert abs(float(np.mean(fn(x)))) < 4.0 / math.sqrt(40_000 / 2)


def test_solenoid_fiber_contraction_rate_is_exact():
    so = make_system("solenoid")
    p = np.array([0.37, 0.2, -0.1])
    q = np.array([0.37, -0.3, 0.25])
    d0 = np.hypot(p[1] - q[1], p[2] - q[2])
    for _ in range(6):
        p, q = so.step(p), so.step(q)
    d6 = np.hypot(p[1] - q[1], p[2] - q[2])
    assert d6 == pytest.approx(d0 / 10.0 ** 6, rel=1e-11)


def test_srb_stability_converged_for_catmap():
    rep = srb_stability(make_system("catmap"), 32, 20_000, seed=2)
    assert rep["max_drift"] < 5.0 / math.sqrt(20_000 / 2)
    assert rep["burn_in"] == 32


# === correlation ===


def test_correlation_constant_observable_vanishes():
    cat = make_system("catmap")
    series = estimate_correlation(cat, "one", "cos_x1", 8, 2000, 16, seed=0)
    assert np.all(series.cor <= 1e-12)
    assert series.n_grid.tolist() == list(range(9))


def test_correlation_at_lag_zero_is_symmetric():
    cat = make_system("catmap")
    a = estimate_correlation(cat, "cos_x1", "cos_x2", 2, 4000, 16, seed=3)
    b = estimate_correlation(cat, "cos_x2", "cos_x1", 2, 4000, 16, seed=3)
    assert a.cor[0] == pytest.approx(b.cor[0], abs=1e-14)


def test_correlation_catmap_null_small_run():
    cat = make_system("catmap")
    series = estimate_correlation(cat, "cos_x1", "cos_x2", 10, 20_000, 32, seed=0)
    assert float(np.max(series.cor)) <= 3.0 / math.sqrt(20_000)
    assert series.samples == 20_000


def test_correlation_custom_callable_matches_named():
    cat = make_system("catmap")
    named = estimate_correlation(cat, "cos_x1", "cos_x2", 4, 2000, 16, seed=5)
    fn_phi = observable_battery(cat)["cos_x1"]
    fn_psi = observable_battery(cat)["cos_x2"]
    direct = estimate_correlation(cat, fn_phi, fn_psi, 4, 2000, 16, seed=5)
    assert np.allclose(named.cor, direct.cor, atol=1e-14)


def test_correlation_worker_invariance():
    cat = make_system("catmap")
    a = estimate_correlation(cat, "cos_x1", "cos_x2", 4, 4000, 16, seed=7)
    b = estimate_correlation(cat, "cos_x1", "cos_x2", 4, 4000, 16, seed=7,
                             workers=2)
    assert np.array_equal(a.cor, b.cor)


# === expansion-time tails ===


def test_tail_histogram_catmap_dies_at_two():
    cat = make_system("catmap")
    hist = tail_histogram(cat, 0.96, horizon=50, M=500, seed=0)
    assert hist.frac[0] == 1.0
    assert np.all(hist.frac[1:] == 0.0)
    assert hist.censored_frac == 0.0
    fit = classify_tail(hist)
    assert fit.chosen == "degenerate"
    cls = predict_mixing_class(fit)
    assert cls.kind == "exponential"
    assert cls.label() == "exponential"


def test_tail_histogram_worker_invariance():
    inter = make_system("intermittent", gamma=0.5)
    a = tail_histogram(inter, 0.31, horizon=100, M=4000, seed=2)
    b = tail_histogram(inter, 0.31, horizon=100, M=4000, seed=2, workers=2)
    assert np.array_equal(a.frac, b.frac)
    assert a.censored_frac == b.censored_frac


def test_tail_histogram_survival_is_monotone():
    inter = make_system("intermittent", gamma=0.5)
    hist = tail_histogram(inter, 0.31, horizon=100, M=4000, seed=2)
    assert np.all(np.diff(hist.frac) <= 0.0)
    assert hist.frac[0] + hist.censored_frac == pytest.approx(1.0)


def test_tail_intermittent_is_polynomial_in_a_small_run():
    # a short horizon drags the fitted exponent below its asymptotic value,
    # so this only pins the class and a generous exponent window; the
    # full-size run lives in the acceptance suite
    inter = make_system("intermittent", gamma=0.5)
    hist = tail_histogram(inter, 0.31, horizon=300, M=20_000, seed=1)
    fit = classify_tail(hist)
    assert fit.chosen == "polynomial"
    assert 1.0 < fit.alpha < 2.5


def test_tail_histogram_preconditions():
    inter = make_system("intermittent", gamma=0.5)
    with pytest.raises(PreconditionViolated):
        tail_histogram(inter, -0.1, horizon=10, M=10, seed=0)
    with pytest.raises(PreconditionViolated):
        tail_histogram(inter, 0.3, horizon=0, M=10, seed=0)


# === decay fits ===


def test_fit_decay_recovers_a_power_law():
    n = np.arange(1, 101)
    fit = fit_decay(n, 3.0 * n ** -2.0)
    assert fit.chosen == "polynomial"
    assert fit.alpha == pytest.approx(2.0, abs=1e-9)
    assert fit.log_amp_poly == pytest.approx(math.log(3.0), abs=1e-9)
    assert fit.poly_r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_decay_recovers_an_exponential():
    n = np.arange(1, 101)
    fit = fit_decay(n, 0.7 * np.exp(-0.3 * n))
    assert fit.chosen == "exponential"
    assert fit.alpha_stretch == 1.0
    assert fit.c == pytest.approx(0.3, abs=1e-9)
    assert fit.exp_r2 == pytest.approx(1.0, abs=1e-12)
    cls = predict_mixing_class(fit)
    assert cls.kind == "exponential" and cls.rate == pytest.approx(0.3, abs=1e-9)


def test_fit_decay_recovers_a_stretched_exponential():
    n = np.arange(1, 201)
    fit = fit_decay(n, np.exp(-2.0 * np.sqrt(n)))
    assert fit.chosen == "exponential"
    assert fit.alpha_stretch == 0.5
    assert fit.c == pytest.approx(2.0, abs=1e-9)
    cls = predict_mixing_class(fit)
    assert cls.kind == "stretched-exponential" and cls.stretch == 0.5
    assert "0.5" in cls.label()


def test_fit_decay_ignores_nonpositive_values():
    n = np.arange(1, 21)
    v = 1.0 * n ** -2.0
    v[3] = 0.0
    v[7] = -1e-9
    fit = fit_decay(n, v)
    assert fit.alpha == pytest.approx(2.0, abs=1e-9)


def test_fit_decay_needs_eight_points():
    with pytest.raises(InsufficientData):
        fit_decay(np.arange(1, 8), np.ones(7))
    with pytest.raises(InsufficientData):
        fit_decay(np.arange(1, 20), np.zeros(19))


def test_degenerate_fit_params():
    fit = degenerate_fit()
    assert fit.chosen == "degenerate"
    assert math.isnan(fit.params()["alpha"])


def test_polynomial_class_shifts_the_exponent_down_by_one():
    n = np.arange(1, 101)
    cls = predict_mixing_class(fit_decay(n, n ** -2.0))
    assert cls.kind == "polynomial"
    assert cls.exponent == pytest.approx(1.0, abs=1e-9)


def test_tail_fit_grid_censoring_correction():
    horizon = 100
    n = np.arange(1, horizon + 1)
    frac = 1.0 * n ** -2.0
    frac[60:] = 0.0                     # beyond n = 60 nothing resolved
    hist = TailHistogram(n_grid=n, frac=frac, stderr=np.zeros(horizon),
                         censored_frac=0.01, samples=1000, c_u=0.3,
                         horizon=horizon)
    grid, vals = tail_fit_grid(hist, n_min=4)
    assert grid.max() == 60
    assert grid.min() >= 4
    lookup = dict(zip(grid.tolist(), vals.tolist()))
    for g in grid:
        assert lookup[int(g)] == pytest.approx(frac[g - 1] + 0.01, abs=1e-15)


def test_classify_tail_censored_head_only_is_not_degenerate():
    horizon = 50
    n = np.arange(1, horizon + 1)
    frac = np.zeros(horizon)
    frac[0] = 0.9
    hist = TailHistogram(n_grid=n, frac=frac, stderr=np.zeros(horizon),
                         censored_frac=0.1, samples=1000, c_u=0.3,
                         horizon=horizon)
    with pytest.raises(InsufficientData):
        classify_tail(hist)


# === stable holonomy density ===


def test_holonomy_trivial_pair():
    so = make_system("solenoid")
    p = np.array([0.3, 0.1, -0.2])
    out = holonomy_density(so, p, p, 8)
    assert out.value == 1.0
    assert out.remainder_bound == 0.0
    assert out.fiber_distance == 0.0


def test_holonomy_unmodified_solenoid_is_exactly_one():
    # j_cu reads only the shared base coordinate
    so = make_system("solenoid")
    rng = rng_for(601)
    for _ in range(10):
        th = float(rng.random())
        p = np.array([th, rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)])
        q = np.array([th, rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)])
        out = holonomy_density(so, p, q, 16)
        assert out.value == 1.0


def test_holonomy_modified_solenoid_near_the_bump():
    ms = make_system("modified-solenoid")
    a0, _ = ms.anchor_points()
    th = a0[0] + 5e-3
    p = np.array([th, a0[1] + 0.05, a0[2]])
    q = np.array([th, a0[1] - 0.10, a0[2] + 0.12])
    r8 = holonomy_density(ms, p, q, 8)
    r16 = holonomy_density(ms, p, q, 16)
    assert abs(r8.value - 1.0) > 1e-3
    assert abs(r8.value - r16.value) <= r8.remainder_bound
    assert r8.remainder_bound < 50.0 * r8.fiber_distance


def test_holonomy_bound_formula():
    so = make_system("solenoid")
    p = np.array([0.3, 0.1, -0.2])
    q = np.array([0.3, -0.3, 0.3])
    out = holonomy_density(so, p, q, 6, c_j=10.0, eta=1.0, sigma_s=0.5)
    ratio = 0.5 ** (2.0 / 3.0)
    d = math.hypot(0.4, -0.5)
    assert out.remainder_bound == pytest.approx(
        10.0 * d * ratio ** 6 / (1.0 - ratio), rel=1e-12)


def test_holonomy_preconditions():
    so = make_system("solenoid")
    p = np.array([0.3, 0.1, -0.2])
    q = np.array([0.4, 0.1, -0.2])
    with pytest.raises(NotSameFiber):
        holonomy_density(so, p, q, 4)
    with pytest.raises(PreconditionViolated):
        holonomy_density(make_system("catmap"), np.zeros(2), np.zeros(2), 4)
    with pytest.raises(PreconditionViolated):
        holonomy_density(so, p, p, 0)
    with pytest.raises(PreconditionViolated):
        holonomy_density(so, p, p, 4, sigma_s=1.5)
