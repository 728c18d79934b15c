import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from haarlab.grids import box_set
from haarlab.nonunimodular import (conjugation_modulus_check, fiber_kemperman_check,
                                   hoelder_chain_check, left_right_fibers, strict_gap)
from haarlab.scenario import random_set

E = math.e


def box(res=16, w=1.0):
    return box_set("axb", res, [0.0, 0.0], [w, 1.0])


def gap_oracle():
    # unit box: nu(A) = 1, nu(A^2) = 2e + 1, mu(A) = 1 - 1/e, mu(A^2) = 3 - 1/e - 1/e^2
    return 1 - math.sqrt(1 / (2 * E + 1)) - math.sqrt((1 - 1 / E) / (3 - 1 / E - E ** -2))


def test_fiber_relation():
    f = left_right_fibers(box())
    assert f.kappa_relation_error() < 1e-12
    assert np.allclose(f.r_vals, 1.0)
    assert np.allclose(f.l_vals, np.exp(-f.u_centers))


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=10)
def test_fiber_relation_random(seed):
    A = random_set(box().group, 8, np.random.default_rng(seed))
    assert left_right_fibers(A).kappa_relation_error() < 1e-9


def test_moments_of_unit_box():
    r = hoelder_chain_check(box())
    oracle = {-1: (1 - E ** -2) / 2, 0: 1 - 1 / E, 1: 1.0, 2: E - 1}
    for k, v in oracle.items():
        assert r.moments[k] == pytest.approx(v, rel=1e-12)
    assert r.margin == pytest.approx(oracle[2] * oracle[-1] - oracle[1] * oracle[0])
    assert r.margin > 0 and r.holds and r.bounds_hold
    assert r.extrema["modular_max"] == pytest.approx(1.0)
    assert r.extrema["modular_min"] == pytest.approx(1 / E)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=10)
def test_hoelder_random(seed):
    r = hoelder_chain_check(random_set(box().group, 8, np.random.default_rng(seed)))
    assert r.holds and r.bounds_hold


def test_thin_slab_is_near_equality():
    r = hoelder_chain_check(box(64, 1 / 16))
    assert r.holds
    assert abs(r.margin) < 1e-3 * r.moments[2] * r.moments[-1]


def test_strict_gap_matches_closed_form():
    g = strict_gap(box(32))
    assert g.lower <= gap_oracle() <= g.upper
    assert g.resolved and g.weak_ok


def test_strict_gap_bracket_narrows():
    widths = [strict_gap(box(r)).tol for r in (8, 16, 32)]
    assert widths[0] > widths[1] > widths[2]


def test_strict_gap_shrinks_with_slab_width():
    gaps = [strict_gap(box(64, w)).gap for w in (1.0, 0.5, 0.25, 0.125)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] > 0


@pytest.mark.parametrize("u,factor", [(1.0, 1 / E), (-1.0, E), (0.0, 1.0), (0.5, E ** -0.5)])
def test_conjugation_factor(u, factor):
    X = box_set("R", 16, [0.0], [1.0])
    r = conjugation_modulus_check(X, (u, 0.3))
    assert r.factor == pytest.approx(factor, rel=1e-12)
    assert r.holds
    assert r.chart_modular_inverse == pytest.approx(1 / factor)


def test_fiber_kemperman():
    X1 = box_set("R", 16, [0.0], [1.0])
    X2 = box_set("R", 16, [0.0], [0.5]) | box_set("R", 16, [2.0], [2.5])
    for g in ((1.0, 0.0), (-1.0, 2.0), (0.0, 0.0)):
        r = fiber_kemperman_check(X1, X2, g)
        assert r["holds"], (g, r)
    # two intervals conjugated by the identity: [0,1] + [0,1/2] has length exactly the sum
    r = fiber_kemperman_check(X1, box_set("R", 16, [0.0], [0.5]), (0.0, 0.0))
    assert r["lhs"] == pytest.approx(r["rhs"])


def test_wrong_group_rejected():
    with pytest.raises(ValueError):
        strict_gap(box_set("R^2", 8, [0, 0], [1, 1]))
