import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from haarlab.errors import NonUnimodularError, ZeroMeasureError
from haarlab.grids import box_set, union_of_boxes
from haarlab.groups import get_group
from haarlab.metrics import (asym_expansion_report, bm_coefficient, bm_from_measures,
                             dimension_bound, discrepancy, half_log_floor, kemperman_check,
                             ruzsa_distance, solve_bm)
from haarlab.scenario import random_set

GOLDEN = (math.sqrt(5) - 1) / 2


def cube(name, res, side=1.0):
    G = get_group(name)
    return box_set(G, res, [0.0] * G.dim, [side] * G.dim)


def test_bm_solver_examples():
    assert solve_bm(0.5, 0.5) == (pytest.approx(1.0, abs=1e-12), False)
    assert solve_bm(0.25, 0.25)[0] == pytest.approx(2.0, abs=1e-12)
    # t + t^2 = 1 with t = (1/2)^(1/r)
    assert solve_bm(0.5, 0.25)[0] == pytest.approx(math.log(0.5) / math.log(GOLDEN), abs=1e-10)


def test_bm_degenerate():
    assert solve_bm(1.0, 0.3) == (0.0, True)
    with pytest.raises(ZeroMeasureError):
        solve_bm(0.0, 0.5)


@given(x=st.floats(1e-6, 1 - 1e-6), y=st.floats(1e-6, 1 - 1e-6))
def test_bm_residual(x, y):
    r, deg = solve_bm(x, y)
    assert not deg
    assert abs(x ** (1 / r) + y ** (1 / r) - 1) <= 1e-9


def test_bm_of_unit_cubes_with_analytic_measures():
    for d in (1, 2, 3):
        c = bm_from_measures(1.0, 1.0, 2.0 ** d, 2.0 ** d)
        assert abs(c.r - d) <= 1e-6


def test_bm_of_grid_cubes():
    for d, name in ((1, "R"), (2, "R^2"), (3, "R^3")):
        c = bm_coefficient(cube(name, 8), cube(name, 8))
        assert abs(c.r - d) <= 1e-6


def test_ruzsa_examples():
    T = get_group("T")
    full = box_set(T, 16, [0.0], [1.0])
    assert ruzsa_distance(full, full).value == pytest.approx(0.0, abs=1e-12)
    d = ruzsa_distance(cube("R", 32), cube("R", 32))
    assert (d.lower, d.value, d.upper) == pytest.approx((2.0, 2.0, 2.0))


def test_ruzsa_affine_box_against_closed_form():
    # A A^-1 = {-1 <= s <= 1, -e^s <= c <= 1}; both Haar measures equal 2 + e - 1/e
    want = 2 * math.log2(2 + math.e - 1 / math.e)
    prev = None
    for res in (8, 16, 32):
        d = ruzsa_distance(cube("axb", res), cube("axb", res))
        assert d.lower <= want <= d.upper
        assert d.lower >= 0
        if prev is not None:
            assert d.width < prev
        prev = d.width


def test_discrepancy_examples():
    R = get_group("R")
    assert discrepancy(box_set(R, 32, [0], [0.5]), box_set(R, 32, [0], [0.75])).value == pytest.approx(0.0)
    U = union_of_boxes(R, 32, [([0], [1]), ([2], [3])])
    assert discrepancy(U, U).value == pytest.approx(2.0)
    full = box_set("T", 16, [0.0], [1.0])
    assert discrepancy(full, full).value == pytest.approx(-1.0)
    with pytest.raises(NonUnimodularError):
        discrepancy(cube("axb", 8), cube("axb", 8))


def test_kemperman_examples():
    r = kemperman_check(cube("R", 16), cube("R", 16, 0.5))
    assert r.margin == pytest.approx(0.0, abs=1e-12) and r.branch == "sum"
    full = box_set("T", 16, [0.0], [1.0])
    r = kemperman_check(full, full)
    assert r.margin == pytest.approx(0.0, abs=1e-12) and r.branch == "group"


def test_kemperman_random_heisenberg(rng):
    G = get_group("heis3")
    for _ in range(3):
        r = kemperman_check(random_set(G, 8, rng), random_set(G, 8, rng))
        assert r.margin >= -r.tol


def test_dimension_bound():
    assert dimension_bound(4) == 3
    assert dimension_bound(2) == 1
    assert dimension_bound(32) == 15
    # below 2 the floor of log2 K is 0 and the bound collapses to 0
    assert dimension_bound(1.5) == 0
    assert dimension_bound(1.0000001) == 0
    assert dimension_bound(2 ** 10) == 55
    with pytest.raises(ValueError):
        dimension_bound(1.0)
    assert half_log_floor(16) == 2


def test_asym_report_on_interval_and_cylinder():
    rI = asym_expansion_report(cube("R", 32), cube("R", 32))
    assert rI.K_hat == pytest.approx(4.0)
    assert rI.kemperman_floor_ok
    assert rI.dimension_bound_khat == 3
    G = get_group("RxT")
    P = box_set(G, 32, [0.0, 0.0], [1.0, 1.0])
    rP = asym_expansion_report(P, P)
    assert rP.K_hat == pytest.approx(rI.K_hat, abs=rP.distance.width + 1e-9)


GROUPS = ["R", "R^2", "RxT", "axb", "heis3"]


@pytest.mark.parametrize("name", GROUPS)
@given(seed=st.integers(0, 2**32 - 1))
def test_distance_axioms_property(name, seed):
    from haarlab.scenario import random_exact_shift, shift_cells

    G = get_group(name)
    rng = np.random.default_rng(seed)
    res = 16 if G.dim < 3 else 8
    A, B, C = (random_set(G, res, rng) for _ in range(3))
    dAB, dBA = ruzsa_distance(A, B), ruzsa_distance(B, A)
    assert dAB.upper >= 0
    assert max(dAB.lower, dBA.lower) <= min(dAB.upper, dBA.upper) + 1e-12
    dT = ruzsa_distance(shift_cells(A, random_exact_shift(G, res, rng)),
                        shift_cells(B, random_exact_shift(G, res, rng)))
    assert max(dAB.lower, dT.lower) <= min(dAB.upper, dT.upper) + 1e-12
    assert dAB.lower <= ruzsa_distance(A, C).upper + ruzsa_distance(C, B).upper + 1e-12


@pytest.mark.parametrize("name", ["R", "R^2", "RxT", "T^2", "R2xT", "heis3"])
@given(seed=st.integers(0, 2**32 - 1))
def test_kemperman_floor_property(name, seed):
    G = get_group(name)
    rng = np.random.default_rng(seed)
    res = 16 if G.dim < 3 else 8
    r = kemperman_check(random_set(G, res, rng), random_set(G, res, rng))
    assert r.margin >= -r.tol
