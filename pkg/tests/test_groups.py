import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from haarlab.catalog import catalog_check
from haarlab.groups import (EuclideanTorus, catalog_names, compose, element, get_group,
                            inverse, modular_value)

CATALOG_TABLE = {
    "R": (1, 0, True), "R^2": (2, 0, True), "R^3": (3, 0, True),
    "T": (0, 0, True), "T^2": (0, 0, True),
    "RxT": (1, 0, True), "R^2xT": (2, 0, True), "RxT^2": (1, 0, True), "R^3xT": (3, 0, True),
    "axb": (2, 0, False), "R2xT": (2, 0, True), "heis3": (3, 0, True),
}


def test_catalog_table_metadata():
    assert set(catalog_names()) == set(CATALOG_TABLE)
    for name, (n, h, uni) in CATALOG_TABLE.items():
        G = get_group(name)
        assert (G.ndim, G.hdim, G.unimodular) == (n, h, uni), name


def test_unknown_group_raises():
    with pytest.raises(KeyError):
        get_group("SL2")


def test_compose_on_the_line():
    assert compose(get_group("R"), (1.0,), (2.0,)).coords[0] == 3.0


def test_compose_affine_examples():
    G = get_group("axb")
    np.testing.assert_allclose(compose(G, (0, 1), (1, 0)).coords, [1, 1])
    np.testing.assert_allclose(compose(G, (1, 0), (0, 1)).coords, [1, math.e])


def test_circle_coordinates_are_reduced():
    G = get_group("T")
    assert compose(G, (0.75,), (0.5,)).coords[0] == pytest.approx(0.25)
    assert element(G, (-0.25,)).coords[0] == pytest.approx(0.75)


def test_modular_values():
    G = get_group("axb")
    assert modular_value(G, (1.0, 0.0)) == pytest.approx(math.exp(-1))
    assert modular_value(G, (0.0, 0.0)) == 1.0
    for name in catalog_names():
        H = get_group(name)
        if H.unimodular:
            assert modular_value(H, np.full(H.dim, 0.3)) == 1.0


def test_affine_modular_matches_pushed_box_ratio():
    # Jacobian oracle: right translation by (u0, 0) maps (u, b) to (u + u0, b),
    # so the left measure of the image is the integral of e^-u over the shifted box
    u0 = 1.0
    ratio = (math.exp(-u0) - math.exp(-u0 - 1)) / (1 - math.exp(-1))
    assert modular_value(get_group("axb"), (u0, 0.0)) == pytest.approx(ratio)


@pytest.mark.parametrize("name", sorted(CATALOG_TABLE))
def test_catalog_check_passes(name):
    rep = catalog_check(name, seed=3)
    assert rep.passed, rep.violations
    n, h, _ = CATALOG_TABLE[name]
    assert rep.bm_bracket == (n - h, n)


def test_bm_brackets_from_table():
    assert get_group("R^2").bm_bracket() == (2, 2)
    assert get_group("axb").bm_bracket() == (2, 2)


def test_corrupted_model_fails_dimension_inequality():
    bad = EuclideanTorus(2, name="bad-R^2")
    bad.hdim = 1
    rep = catalog_check(bad)
    assert [v.invariant for v in rep.violations] == ["n >= 3h"]


def test_corrupted_unimodular_flag_is_reported():
    bad = EuclideanTorus(1, name="bad-R")
    bad.modular = lambda x: np.full(np.asarray(x).shape[:-1], 2.0)
    rep = catalog_check(bad)
    assert "unimodular flag" in [v.invariant for v in rep.violations]


coords = st.floats(-3, 3, allow_nan=False)


@pytest.mark.parametrize("name", sorted(CATALOG_TABLE))
@given(data=st.data())
def test_group_laws_property(name, data):
    G = get_group(name)
    pts = [np.array(data.draw(st.lists(coords, min_size=G.dim, max_size=G.dim)))
           for _ in range(3)]
    x, y, z = (element(G, p) for p in pts)
    lhs = compose(G, compose(G, x, y), z).as_array()
    rhs = compose(G, x, compose(G, y, z)).as_array()
    d = np.abs(lhs - rhs)
    for ax in G.circle_axes:
        d[ax] = min(d[ax], 1 - d[ax])
    assert d.max() <= 1e-9 * max(1.0, np.abs(lhs).max())
    e = compose(G, x, inverse(G, x)).as_array()
    d = np.abs(e - G.identity)
    for ax in G.circle_axes:
        d[ax] = min(d[ax], 1 - d[ax])
    assert d.max() <= 1e-9


@given(u=st.floats(-3, 3), v=st.floats(-3, 3))
def test_affine_modular_is_a_homomorphism(u, v):
    G = get_group("axb")
    g, h = element(G, (u, 0.5)), element(G, (v, -0.25))
    lhs = modular_value(G, compose(G, g, h))
    assert lhs == pytest.approx(modular_value(G, g) * modular_value(G, h), rel=1e-12)
