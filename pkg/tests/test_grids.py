import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from haarlab.errors import GridOverflowError
from haarlab.grids import (GridSet, box_set, bracket, convolve_indicator, dumps, energy,
                           inverse_pair, inverse_set, loads, measure, product_pair,
                           product_set, translate, union_of_boxes)
from haarlab.groups import get_group
from haarlab.scenario import random_set

E = math.e
# closed forms for the unit box B = [0,1]^2 in the (u, b) chart of ax+b:
# B^2 = {0 <= u <= 2, 0 <= b <= 1 + e^min(u,1)}
AXB_SQ_LEFT = 3 - math.exp(-1) - math.exp(-2)
AXB_SQ_RIGHT = 2 * E + 1


def unit_box(name, res):
    G = get_group(name)
    return box_set(G, res, [0.0] * G.dim, [1.0] * G.dim)


def test_interval_measure_exact():
    for res in (1, 7, 64):
        m = measure(unit_box("R", res))
        assert m.lower == pytest.approx(1.0, abs=1e-15)
        assert m.upper == pytest.approx(1.0, abs=1e-15)


def test_affine_box_measures():
    A = unit_box("axb", 32)
    left, right = measure(A, "left"), measure(A, "right")
    assert left.lower <= 1 - math.exp(-1) <= left.upper
    assert left.width < 1e-12
    assert right.lower == pytest.approx(1.0) and right.upper == pytest.approx(1.0)


def test_empty_measure_is_zero():
    m = measure(GridSet.empty(get_group("R^2"), 8))
    assert (m.lower, m.upper) == (0.0, 0.0)


def test_interval_sum():
    A = unit_box("R", 16)
    for mode in ("outer", "inner"):
        S = product_set(A, A, mode)
        lo, hi = S.bbox()
        assert lo[0] == pytest.approx(0.0, abs=1 / 16) and hi[0] == pytest.approx(2.0, abs=1 / 16)


def test_torus_absorbs():
    G = get_group("T")
    full = box_set(G, 16, [0.0], [1.0])
    B = box_set(G, 16, [0.25], [0.375])
    for mode in ("outer", "inner"):
        assert product_set(full, B, mode) == full


def test_affine_box_square_region_and_measure():
    A = unit_box("axb", 32)
    out, inn = product_pair(A, A)
    lo, hi = out.bbox()
    h = out.h
    assert lo[0] >= -h[0] and hi[0] <= 2 + h[0]
    assert lo[1] >= -h[1] and hi[1] <= 1 + E + 2 * h[1]
    left, right = bracket(out, inn, "left"), bracket(out, inn, "right")
    assert left.lower <= AXB_SQ_LEFT <= left.upper
    assert right.lower <= AXB_SQ_RIGHT <= right.upper
    assert inn.issubset(out)


def test_refinement_is_monotone_and_narrows():
    widths = []
    prev = None
    for res in (8, 16, 32):
        out, inn = product_pair(unit_box("axb", res), unit_box("axb", res))
        m = bracket(out, inn, "left")
        if prev is not None:
            assert m.upper <= prev.upper + 1e-12
            assert m.lower >= prev.lower - 1e-12
        widths.append(m.width)
        prev = m
    assert widths[0] > widths[1] > widths[2]
    # roughly first order: halving h at least shrinks the width by a third
    assert widths[2] < 0.67 * widths[1]


def test_inverse_examples():
    A = unit_box("R", 16)
    lo, hi = inverse_set(A).bbox()
    assert (lo[0], hi[0]) == (-1.0, 0.0)
    S = box_set("R^2", 16, [-0.5, -0.5], [0.5, 0.5])
    assert S.within_layer(inverse_set(S), 1)
    out, inn = inverse_pair(unit_box("axb", 32))
    m = bracket(out, inn, "left")
    assert m.lower <= 1.0 <= m.upper


def test_overflow_is_explicit():
    A = box_set("axb", 4, [0.0, 0.0], [4.0, 1.0])
    with pytest.raises(GridOverflowError):
        product_pair(A, A)


def test_convolution_on_the_line():
    A = unit_box("R", 64)
    for x, want in ((1.0, 1.0), (0.5, 0.5)):
        for path in ("left", "right"):
            q = convolve_indicator(A, A, [x], path)
            assert q.lower <= want <= q.upper
            assert q.value == pytest.approx(want, abs=1 / 32)


def test_convolution_at_identity_on_affine_box_vanishes():
    # y and y^-1 both in [0,1]^2 forces u = 0, a null set
    A = unit_box("axb", 32)
    q = convolve_indicator(A, A, [0.0, 0.0], "left")
    assert q.lower == 0.0
    assert q.upper <= 4 / 32


def test_energy_of_unit_interval():
    assert energy(unit_box("R", 128), unit_box("R", 128)) == pytest.approx(2 / 3, abs=1e-3)


def test_energy_cauchy_schwarz_floor():
    for name, res in (("R", 64), ("axb", 16), ("RxT", 16)):
        A = unit_box(name, res)
        Ainv = inverse_set(A)
        e = energy(A, Ainv)
        out, _ = product_pair(A, A, invert_b=True)
        nu, mu = measure(A, "right"), measure(A, "left")
        floor = nu.lower ** 2 * mu.lower ** 2 / measure(out, "right").upper
        assert e >= floor * (1 - 1e-9), name


def test_energy_symmetry_relation_on_affine_sets(rng):
    # E(A^-1, A) >= E(A, A^-1) / max Delta on A; midpoint quadrature error
    # on these grids stays well below 5%
    G = get_group("axb")
    for _ in range(3):
        A = random_set(G, 16, rng)
        Ainv = inverse_set(A)
        vert = A.lower_corners()
        max_mod = float(G.modular(np.vstack([vert, vert + A.h])).max())
        assert energy(Ainv, A) >= energy(A, Ainv) / max_mod * 0.95


def test_serialization_round_trip(rng):
    for name in ("R", "RxT", "axb", "heis3"):
        A = random_set(get_group(name), 16, rng)
        assert loads(dumps(A)) == A
    with pytest.raises(ValueError):
        loads("haarlab-gridset 1\ngroup nowhere\n")


def test_translate_scales_left_measure():
    A = unit_box("axb", 32)
    out, inn = translate(A, [0.5, 0.25], "right")
    m = bracket(out, inn, "left")
    want = math.exp(-0.5) * (1 - math.exp(-1))
    assert m.lower <= want <= m.upper


GROUPS = ["R", "R^2", "RxT", "axb", "heis3"]


@pytest.mark.parametrize("name", GROUPS)
@given(seed=st.integers(0, 2**32 - 1))
def test_convolution_paths_agree(name, seed):
    G = get_group(name)
    rng = np.random.default_rng(seed)
    res = 16 if G.dim < 3 else 8
    A, B = random_set(G, res, rng), random_set(G, res, rng)
    out, _ = product_pair(A, B)
    x = out.centers()[rng.integers(len(out.centers()))]
    ql = convolve_indicator(A, B, x, "left")
    qr = convolve_indicator(A, B, x, "right")
    assert max(ql.lower, qr.lower) <= min(ql.upper, qr.upper) + 1e-12


@pytest.mark.parametrize("name", GROUPS)
@given(seed=st.integers(0, 2**32 - 1))
def test_right_measure_equals_left_measure_of_inverse(name, seed):
    G = get_group(name)
    A = random_set(G, 16 if G.dim < 3 else 8, np.random.default_rng(seed))
    out, inn = inverse_pair(A)
    mu_inv = bracket(out, inn, "left")
    nu = measure(A, "right")
    assert mu_inv.lower <= nu.upper + 1e-12 and nu.lower <= mu_inv.upper + 1e-12


@pytest.mark.parametrize("name", GROUPS)
@given(seed=st.integers(0, 2**32 - 1))
def test_inner_product_inside_outer(name, seed):
    G = get_group(name)
    rng = np.random.default_rng(seed)
    res = 16 if G.dim < 3 else 8
    A, B = random_set(G, res, rng), random_set(G, res, rng)
    out, inn = product_pair(A, B)
    assert inn.issubset(out)
    # every product of cell centres lands in the outer set
    pa, pb = A.centers(), B.centers()
    ia = rng.integers(len(pa), size=64)
    ib = rng.integers(len(pb), size=64)
    assert out.contains_points(G.reduce(G.law(pa[ia], pb[ib]))).all()


def test_union_of_boxes_measure():
    U = union_of_boxes("R", 64, [([0.0], [1.0]), ([1.5], [2.0])])
    assert measure(U).value == pytest.approx(1.5)
