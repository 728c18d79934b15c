from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from haarlab.errors import NonUnimodularError
from haarlab.grids import box_set, measure
from haarlab.groups import get_group
from haarlab.quotient import (almost_domination_check, equality_domination_check, fiber_profile,
                              layer_cake, pushforward_expansion_check, quotient_map, superlevel,
                              superlevel_product_inclusion)
from haarlab.scenario import random_set

RES = 32


@pytest.fixture(scope="module")
def q():
    return quotient_map("RxT")


def cyl(lo, hi, res=RES):
    return box_set("RxT", res, [lo, 0.0], [hi, 1.0])


def notched(res=RES):
    return cyl(0, 1, res) - box_set("RxT", res, [0.25, 0.0], [0.5, 1 / 32])


def test_profile_of_preimage_is_indicator(q):
    p = fiber_profile(q, cyl(0, 1))
    assert p.values.shape == (RES,)
    assert np.all(p.values == 1.0)
    assert superlevel(p, 0).bbox()[0][0] == 0.0
    assert superlevel(p, 0).bbox()[1][0] == 1.0


def test_profile_of_half_fiber(q):
    p = fiber_profile(q, box_set("RxT", RES, [0, 0], [1, 0.5]))
    assert np.allclose(p.values, 0.5)
    assert p.alpha == 0.5
    assert superlevel(p, 0.6).is_empty()


def test_notch_profile(q):
    p = fiber_profile(q, notched())
    assert p.integral() == pytest.approx(1 - 0.25 / 32, abs=1e-15)
    assert p.values.min() == pytest.approx(1 - 1 / 32)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=15)
def test_profile_integrates_to_measure(seed):
    q = quotient_map("RxT")
    A = random_set(q.total, 16, np.random.default_rng(seed))
    p = fiber_profile(q, A)
    assert p.integral() == pytest.approx(measure(A).value, rel=1e-12)
    assert 0 < p.alpha <= 1
    # layer cake, plain and in the s = t^(1/2) variable; midpoint error <= alpha * mu(base) / levels
    base = measure(superlevel(p, 0)).value
    for power in (1.0, 2.0):
        assert layer_cake(p, levels=512, power=power) == pytest.approx(
            p.integral(), abs=2 * p.alpha * base / 512 * power + 1e-12)


@given(seed=st.integers(0, 2**32 - 1), t1=st.floats(0, 1), t2=st.floats(0, 1))
@settings(max_examples=15)
def test_superlevels_shrink(seed, t1, t2):
    q = quotient_map("RxT")
    p = fiber_profile(q, random_set(q.total, 16, np.random.default_rng(seed)))
    t1, t2 = sorted((t1, t2))
    assert superlevel(p, t2).issubset(superlevel(p, t1))
    assert not superlevel(p, p.alpha).is_empty()
    assert superlevel(p, p.alpha + 1e-6).is_empty()


def test_negative_level_rejected(q):
    with pytest.raises(ValueError):
        superlevel(fiber_profile(q, cyl(0, 1)), -0.1)


@given(seed=st.integers(0, 2**32 - 1), t1=st.floats(0, 1), t2=st.floats(0, 1))
@settings(max_examples=10)
def test_superlevel_product_inclusion(seed, t1, t2):
    q = quotient_map("RxT")
    rng = np.random.default_rng(seed)
    A, B = random_set(q.total, 8, rng), random_set(q.total, 8, rng)
    assert superlevel_product_inclusion(q, A, B, t1, t2)


def test_equality_on_full_cylinders(q):
    v = equality_domination_check(q, cyl(0, 1), cyl(0, 2))
    assert v.status == "equality verified"
    assert measure(v.A_base).value == pytest.approx(1.0)
    assert measure(v.B_base).value == pytest.approx(2.0)


def test_equality_on_square_cylinders():
    q = quotient_map("R^2xT")
    A = box_set(q.total, 8, [0, 0, 0], [1, 1, 1])
    B = box_set(q.total, 8, [0, 0, 0], [2, 2, 1])
    assert equality_domination_check(q, A, B, n=2).status == "equality verified"


def test_half_fiber_misses_hypothesis(q):
    v = equality_domination_check(q, box_set("RxT", RES, [0, 0], [1, 0.5]), cyl(0, 1))
    assert v.status == "hypothesis not met"
    assert abs(v.gap) > v.tol


def test_domination_refuses_nonunimodular():
    A = box_set("axb", 8, [0, 0], [1, 1])
    q = replace(quotient_map("RxT"), total=get_group("axb"))
    with pytest.raises(NonUnimodularError):
        equality_domination_check(q, A, A)
    with pytest.raises(NonUnimodularError):
        pushforward_expansion_check(q, A)


def test_almost_domination_on_notch(q):
    v = almost_domination_check(q, notched(), cyl(0, 1))
    # Notch + [0,1]xT is [0,2]xT, so the discrepancy is the notch area
    assert v.gap == pytest.approx(1 / 128, abs=1e-12)
    assert v.status == "witness found"
    assert v.details["symdiff_A"] <= 3 * v.gap + v.tol
    assert v.details["base_discrepancy"] <= 7 * v.gap + v.tol


@pytest.mark.parametrize("make", [lambda: cyl(0, 1), lambda: box_set("RxT", RES, [0, 0], [1, 0.5]),
                                  notched])
def test_pushforward_bounds(q, make):
    r = pushforward_expansion_check(q, make())
    assert r.passed, r.checks
    assert r.mu_pA == pytest.approx(r.mu_pA1 + r.mu_pA2)
    assert r.N == 2 * r.K


def test_pushforward_random(q, rng):
    for _ in range(5):
        r = pushforward_expansion_check(q, random_set(q.total, 16, rng))
        assert r.passed, r.checks
