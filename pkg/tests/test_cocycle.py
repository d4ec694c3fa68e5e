"""Orbit generation and the additive cocycle machinery: worked orbit
values, partial-sum conventions, cocycle additivity along concatenated
segments, and the Lyapunov estimates that are exact for the rigid models.
"""

import math

import numpy as np
import pytest

from ergolab.cocycle import (birkhoff_average, birkhoff_sum, generate_orbit,
                             lyapunov, nue_check, orbit_trace, partial_sums,
                             trace)
from ergolab.errors import PreconditionViolated
from ergolab.parallel import rng_for
from ergolab.systems import LOG_LAM_U, make_system


def test_orbit_worked_example():
    so = make_system("solenoid")
    orb = generate_orbit(so, np.array([0.0, 0.0, 0.0]), 2)
    assert orb.length == 2
    assert orb.points.shape == (3, 3)
    assert np.allclose(orb.points[1], [0.0, 0.5, 0.0], atol=1e-12)
    assert np.allclose(orb.points[2], [0.0, 0.55, 0.0], atol=1e-12)
    assert np.allclose(orb.start, [0.0, 0.0, 0.0])


def test_orbit_random_start_is_reproducible():
    cat = make_system("catmap")
    a = generate_orbit(cat, None, 50, rng_for(301))
    b = generate_orbit(cat, None, 50, rng_for(301))
    assert np.array_equal(a.points, b.points)
    c = generate_orbit(cat, None, 50, rng_for(302))
    assert not np.array_equal(a.points, c.points)


def test_orbit_random_start_needs_a_generator():
    cat = make_system("catmap")
    with pytest.raises(ValueError):
        generate_orbit(cat, None, 10)


def test_trace_fields_and_empty_orbit():
    so = make_system("solenoid")
    orb, tr = orbit_trace(so, np.array([0.2, 0.1, -0.3]), 16)
    assert tr.horizon == 16
    assert np.array_equal(tr.field("phi_cs"), tr.phi_cs)
    assert np.all(tr.phi_cs == -math.log(10.0))
    with pytest.raises(ValueError):
        tr.field("phi_xx")
    empty = trace(so, generate_orbit(so, np.array([0.2, 0.1, -0.3]), 0))
    assert empty.horizon == 0
    assert empty.phi_cu.size == 0


def test_partial_sums_and_birkhoff():
    s = partial_sums([1.0, 2.0, 3.0])
    assert np.array_equal(s, [0.0, 1.0, 3.0, 6.0])
    assert birkhoff_sum([1.0, 2.0, 3.0]) == 6.0
    assert birkhoff_sum([1.0, 2.0, 3.0], n=2) == 3.0
    assert birkhoff_average([1.0, 2.0, 3.0], n=3) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        birkhoff_average([1.0], n=0)


def test_cocycle_additivity_along_the_orbit():
    # S_{m+n}(x) = S_m(x) + S_n(f^m x) for every field
    ms = make_system("modified-solenoid")
    rng = rng_for(303)
    start = ms.sample_uniform(rng, 1)[0]
    orb, tr = orbit_trace(ms, start, 48)
    for field in ("phi_cs", "phi_cu", "j_cu"):
        v = tr.field(field)
        for m in (0, 7, 23, 48):
            head = float(np.sum(v[:m]))
            _, tail = orbit_trace(ms, orb.points[m], 48 - m)
            assert head + float(np.sum(tail.field(field))) == pytest.approx(
                float(np.sum(v)), abs=1e-10)


def test_lyapunov_catmap_exact():
    cat = make_system("catmap")
    traces = [orbit_trace(cat, None, 200, rng_for(304, i))[1] for i in range(3)]
    est = lyapunov(traces, "phi_cu")
    assert est.value == pytest.approx(LOG_LAM_U, rel=1e-12)
    assert est.stderr <= 1e-15
    assert est.count == 3 and est.horizon == 200


def test_lyapunov_solenoid_fiber_exact():
    so = make_system("solenoid")
    traces = [orbit_trace(so, None, 150, rng_for(305, i))[1] for i in range(3)]
    est = lyapunov(traces, "phi_cs")
    assert est.value == pytest.approx(-math.log(10.0), rel=1e-12)
    assert est.stderr <= 1e-15


def test_lyapunov_intermittent_at_the_fixed_point():
    inter = make_system("intermittent", gamma=0.5)
    _, tr = orbit_trace(inter, np.array([0.0]), 150)
    est = lyapunov([tr], "phi_cu")
    assert est.value == 0.0
    assert est.stderr == 0.0


def test_lyapunov_needs_a_long_horizon():
    cat = make_system("catmap")
    _, tr = orbit_trace(cat, None, 50, rng_for(306))
    with pytest.raises(PreconditionViolated):
        lyapunov([tr], "phi_cu")
    with pytest.raises(PreconditionViolated):
        lyapunov([], "phi_cu")


def test_nue_check_examples():
    cat = make_system("catmap")
    _, tr = orbit_trace(cat, None, 64, rng_for(307))
    assert nue_check(tr, 0.96)
    assert nue_check(tr, 0.96, n=1)
    inter = make_system("intermittent", gamma=0.5)
    _, tr0 = orbit_trace(inter, np.array([0.0]), 64)
    assert not nue_check(tr0, 0.31)
