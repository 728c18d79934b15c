"""Concrete locally compact groups in global coordinate charts.

Every model works on numpy arrays of shape ``(n, dim)`` so that grids can push
whole batches of points or boxes through the group law at once.  Besides the
pointwise law each model supplies two box operations used by the grid engine:

* ``enclosure``: a box containing the product of two boxes (interval
  arithmetic, always sound);
* ``fiber_sure``: a box in the fiber coordinates that is contained in the
  product fiber for *every* choice of base coordinates inside the given boxes.

Base axes are the coordinates on which the law is plain addition (``u`` for
ax+b, ``x, y`` for Heisenberg, the angle for the rotation group); the other
coordinates form the fiber.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# interval helpers


def _imul(alo, ahi, blo, bhi):
    """Interval product [alo, ahi] * [blo, bhi], elementwise."""
    p = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return p.min(axis=0), p.max(axis=0)


def _cos_range(lo, hi):
    """Range of cos over [lo, hi] (radians), elementwise."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    c1, c2 = np.cos(lo), np.cos(hi)
    rmin, rmax = np.minimum(c1, c2), np.maximum(c1, c2)
    # maxima of cos at 2*pi*k, minima at pi + 2*pi*k
    has_max = np.floor(hi / TWO_PI) >= np.ceil(lo / TWO_PI)
    has_min = np.floor((hi - math.pi) / TWO_PI) >= np.ceil((lo - math.pi) / TWO_PI)
    rmax = np.where(has_max, 1.0, rmax)
    rmin = np.where(has_min, -1.0, rmin)
    return rmin, rmax


def _sin_range(lo, hi):
    return _cos_range(np.asarray(lo) - math.pi / 2, np.asarray(hi) - math.pi / 2)


def _rot_box(clo, chi, slo, shi, xlo, xhi, ylo, yhi):
    """Box enclosing R * [x] x [y] with cos in [c], sin in [s]."""
    a = _imul(clo, chi, xlo, xhi)
    b = _imul(slo, shi, ylo, yhi)
    c = _imul(slo, shi, xlo, xhi)
    d = _imul(clo, chi, ylo, yhi)
    return (a[0] - b[1], a[1] - b[0]), (c[0] + d[0], c[1] + d[1])


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupElement:
    """A chart point; circle coordinates are kept in [0, 1)."""

    coords: tuple

    def __iter__(self):
        return iter(self.coords)

    def __len__(self):
        return len(self.coords)

    def as_array(self):
        return np.asarray(self.coords, dtype=float)


class GroupModel:
    """Base class for catalog groups.

    Subclasses fill in the class attributes and the vectorized law; the
    instance is immutable after construction.
    """

    name: str = ""
    dim: int = 0
    circle_axes: frozenset = frozenset()
    ndim: int = 0
    hdim: int = 0
    unimodular: bool = True
    base_axes: tuple = ()
    # axes along which the left / right factor of a product (and a set to be
    # inverted) may be merged into long boxes without loosening enclosures
    left_merge: tuple = ()
    right_merge: tuple = ()
    inv_merge: tuple = ()

    @property
    def fiber_axes(self) -> tuple:
        return tuple(i for i in range(self.dim) if i not in self.base_axes)

    @property
    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    @property
    def compact(self) -> bool:
        return len(self.circle_axes) == self.dim

    @property
    def total_measure(self) -> float:
        """mu(G); circles have length 1, so compact catalog groups have mass 1."""
        return 1.0 if self.compact else math.inf

    def bm_bracket(self) -> tuple[int, int]:
        return (self.ndim - self.hdim, self.ndim)

    # -- pointwise -------------------------------------------------------
    def reduce(self, x):
        x = np.array(x, dtype=float, copy=True)
        for ax in self.circle_axes:
            x[..., ax] = np.mod(x[..., ax], 1.0)
        return x

    def law(self, x, y):
        raise NotImplementedError

    def inv(self, x):
        raise NotImplementedError

    def left_density(self, x):
        return np.ones(np.shape(x)[:-1])

    def right_density(self, x):
        return np.ones(np.shape(x)[:-1])

    def modular(self, x):
        return np.ones(np.shape(x)[:-1])

    def density(self, x, side):
        return self.left_density(x) if side == "left" else self.right_density(x)

    def density_bounds(self, lo, hi, side):
        """Min and max of the chosen Haar density over each box."""
        one = np.ones(np.shape(lo)[:-1])
        return one, one

    def cell_mass(self, lo, hi, side):
        """Exact Haar mass of each box when a closed form is available."""
        if side == "right" or self.unimodular:
            return np.prod(np.asarray(hi) - np.asarray(lo), axis=-1)
        return None

    def lipschitz_modulus(self, lo, hi) -> float:
        """Sup-norm Lipschitz bound of (x, y) -> xy for x, y in the box."""
        return 1.0

    # -- box operations --------------------------------------------------
    def enclosure(self, alo, ahi, blo, bhi):
        raise NotImplementedError

    def fiber_sure(self, alo, ahi, blo, bhi):
        raise NotImplementedError

    def inv_enclosure(self, lo, hi):
        raise NotImplementedError

    def inv_fiber_sure(self, lo, hi):
        raise NotImplementedError

    def __repr__(self):
        return f"<GroupModel {self.name}>"

    def __reduce__(self):
        # catalog entries unpickle to the shared cached instance
        if self.name in _CATALOG:
            return (get_group, (self.name,))
        return super().__reduce__()


class EuclideanTorus(GroupModel):
    """R^d x T^k with the additive law; real axes first, circle axes last."""

    def __init__(self, d: int, k: int = 0, name: str | None = None):
        if d + k < 1:
            raise ValueError("need at least one axis")
        self.d, self.k = d, k
        self.dim = d + k
        self.circle_axes = frozenset(range(d, d + k))
        self.ndim = d
        self.hdim = 0
        self.unimodular = True
        self.base_axes = tuple(range(self.dim - 1))
        every = tuple(range(self.dim))
        self.left_merge = self.right_merge = self.inv_merge = every
        self.name = name or _euclid_name(d, k)

    def law(self, x, y):
        return self.reduce(np.asarray(x, float) + np.asarray(y, float))

    def inv(self, x):
        return self.reduce(-np.asarray(x, float))

    def enclosure(self, alo, ahi, blo, bhi):
        return alo + blo, ahi + bhi

    def fiber_sure(self, alo, ahi, blo, bhi):
        f = self.fiber_axes
        return alo[:, f] + blo[:, f], ahi[:, f] + bhi[:, f]

    def inv_enclosure(self, lo, hi):
        return -hi, -lo

    def inv_fiber_sure(self, lo, hi):
        f = self.fiber_axes
        return -hi[:, f], -lo[:, f]


def _euclid_name(d, k):
    parts = []
    if d:
        parts.append("R" if d == 1 else f"R^{d}")
    if k:
        parts.append("T" if k == 1 else f"T^{k}")
    return "x".join(parts)


class AffineGroup(GroupModel):
    """The ax+b group in the chart u = log a.

    (u, b)(u', b') = (u + u', e^u b' + b).  Left density e^{-u}, right density
    1, modular function e^{-u}.
    """

    name = "axb"
    dim = 2
    ndim = 2
    hdim = 0
    unimodular = False
    base_axes = (0,)
    left_merge = (1,)
    right_merge = (0, 1)
    inv_merge = (1,)

    def law(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        u = x[..., 0] + y[..., 0]
        b = np.exp(x[..., 0]) * y[..., 1] + x[..., 1]
        return np.stack([u, b], axis=-1)

    def inv(self, x):
        x = np.asarray(x, float)
        return np.stack([-x[..., 0], -np.exp(-x[..., 0]) * x[..., 1]], axis=-1)

    def left_density(self, x):
        return np.exp(-np.asarray(x, float)[..., 0])

    def modular(self, x):
        return np.exp(-np.asarray(x, float)[..., 0])

    def density_bounds(self, lo, hi, side):
        if side == "right":
            return super().density_bounds(lo, hi, side)
        return np.exp(-hi[..., 0]), np.exp(-lo[..., 0])

    def cell_mass(self, lo, hi, side):
        if side == "right":
            return super().cell_mass(lo, hi, side)
        return (np.exp(-lo[..., 0]) - np.exp(-hi[..., 0])) * (hi[..., 1] - lo[..., 1])

    def lipschitz_modulus(self, lo, hi):
        umax = float(np.max(hi[..., 0]))
        bmax = float(np.max(np.maximum(np.abs(lo[..., 1]), np.abs(hi[..., 1]))))
        return max(2.0, 1.0 + math.exp(umax) * (1.0 + bmax))

    def enclosure(self, alo, ahi, blo, bhi):
        elo, ehi = np.exp(alo[:, 0]), np.exp(ahi[:, 0])
        plo, phi = _imul(elo, ehi, blo[:, 1], bhi[:, 1])
        lo = np.stack([alo[:, 0] + blo[:, 0], alo[:, 1] + plo], axis=1)
        hi = np.stack([ahi[:, 0] + bhi[:, 0], ahi[:, 1] + phi], axis=1)
        return lo, hi

    def fiber_sure(self, alo, ahi, blo, bhi):
        elo, ehi = np.exp(alo[:, 0]), np.exp(ahi[:, 0])
        lo = alo[:, 1] + np.maximum(elo * blo[:, 1], ehi * blo[:, 1])
        hi = ahi[:, 1] + np.minimum(elo * bhi[:, 1], ehi * bhi[:, 1])
        return lo[:, None], hi[:, None]

    def inv_enclosure(self, lo, hi):
        elo, ehi = np.exp(-hi[:, 0]), np.exp(-lo[:, 0])
        plo, phi = _imul(elo, ehi, lo[:, 1], hi[:, 1])
        return (np.stack([-hi[:, 0], -phi], axis=1),
                np.stack([-lo[:, 0], -plo], axis=1))

    def inv_fiber_sure(self, lo, hi):
        e1, e2 = np.exp(-lo[:, 0]), np.exp(-hi[:, 0])
        flo = np.maximum(-e1 * hi[:, 1], -e2 * hi[:, 1])
        fhi = np.minimum(-e1 * lo[:, 1], -e2 * lo[:, 1])
        return flo[:, None], fhi[:, None]


class Heisenberg(GroupModel):
    """Polynomial chart (x, y, z)(x', y', z') = (x + x', y + y', z + z' + x y')."""

    name = "heis3"
    dim = 3
    ndim = 3
    hdim = 0
    unimodular = True
    base_axes = (0, 1)
    left_merge = (1, 2)
    right_merge = (0, 2)
    inv_merge = (2,)

    def law(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        z = x[..., 2] + y[..., 2] + x[..., 0] * y[..., 1]
        return np.stack([x[..., 0] + y[..., 0], x[..., 1] + y[..., 1], z], axis=-1)

    def inv(self, x):
        x = np.asarray(x, float)
        z = -x[..., 2] + x[..., 0] * x[..., 1]
        return np.stack([-x[..., 0], -x[..., 1], z], axis=-1)

    def lipschitz_modulus(self, lo, hi):
        m = np.maximum(np.abs(lo), np.abs(hi))
        return 2.0 + float(np.max(m[..., 0])) + float(np.max(m[..., 1]))

    def enclosure(self, alo, ahi, blo, bhi):
        plo, phi = _imul(alo[:, 0], ahi[:, 0], blo[:, 1], bhi[:, 1])
        lo = alo + blo
        hi = ahi + bhi
        lo[:, 2] += plo
        hi[:, 2] += phi
        return lo, hi

    def fiber_sure(self, alo, ahi, blo, bhi):
        plo, phi = _imul(alo[:, 0], ahi[:, 0], blo[:, 1], bhi[:, 1])
        return ((alo[:, 2] + blo[:, 2] + phi)[:, None],
                (ahi[:, 2] + bhi[:, 2] + plo)[:, None])

    def inv_enclosure(self, lo, hi):
        plo, phi = _imul(lo[:, 0], hi[:, 0], lo[:, 1], hi[:, 1])
        return (np.stack([-hi[:, 0], -hi[:, 1], -hi[:, 2] + plo], axis=1),
                np.stack([-lo[:, 0], -lo[:, 1], -lo[:, 2] + phi], axis=1))

    def inv_fiber_sure(self, lo, hi):
        plo, phi = _imul(lo[:, 0], hi[:, 0], lo[:, 1], hi[:, 1])
        return (-hi[:, 2] + phi)[:, None], (-lo[:, 2] + plo)[:, None]


class PlaneRotations(GroupModel):
    """R^2 x| T in the chart (v1, v2, theta); theta acts by rotation 2*pi*theta."""

    name = "R2xT"
    dim = 3
    circle_axes = frozenset({2})
    ndim = 2
    hdim = 0
    unimodular = True
    base_axes = (2,)
    left_merge = (0, 1)
    right_merge = (2,)
    inv_merge = ()

    def law(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        c, s = np.cos(TWO_PI * x[..., 2]), np.sin(TWO_PI * x[..., 2])
        v1 = x[..., 0] + c * y[..., 0] - s * y[..., 1]
        v2 = x[..., 1] + s * y[..., 0] + c * y[..., 1]
        return self.reduce(np.stack([v1, v2, x[..., 2] + y[..., 2]], axis=-1))

    def inv(self, x):
        x = np.asarray(x, float)
        c, s = np.cos(TWO_PI * x[..., 2]), np.sin(TWO_PI * x[..., 2])
        # -R(-theta) v
        v1 = -(c * x[..., 0] + s * x[..., 1])
        v2 = -(-s * x[..., 0] + c * x[..., 1])
        return self.reduce(np.stack([v1, v2, -x[..., 2]], axis=-1))

    def lipschitz_modulus(self, lo, hi):
        m = np.maximum(np.abs(lo[..., :2]), np.abs(hi[..., :2]))
        vmax = float(np.max(np.hypot(m[..., 0], m[..., 1])))
        return max(2.0, 1.0 + math.sqrt(2.0) + TWO_PI * math.sqrt(2.0) * vmax)

    def enclosure(self, alo, ahi, blo, bhi):
        clo, chi = _cos_range(TWO_PI * alo[:, 2], TWO_PI * ahi[:, 2])
        slo, shi = _sin_range(TWO_PI * alo[:, 2], TWO_PI * ahi[:, 2])
        (r1lo, r1hi), (r2lo, r2hi) = _rot_box(clo, chi, slo, shi,
                                              blo[:, 0], bhi[:, 0], blo[:, 1], bhi[:, 1])
        lo = np.stack([alo[:, 0] + r1lo, alo[:, 1] + r2lo, alo[:, 2] + blo[:, 2]], axis=1)
        hi = np.stack([ahi[:, 0] + r1hi, ahi[:, 1] + r2hi, ahi[:, 2] + bhi[:, 2]], axis=1)
        return lo, hi

    @staticmethod
    def _inscribed(center, half, tlo, thi):
        """Box inside R(theta) * (center +- half) for every theta in [tlo, thi] (turns)."""
        tm = 0.5 * (tlo + thi)
        c, s = np.cos(TWO_PI * tm), np.sin(TWO_PI * tm)
        rc = np.stack([c * center[:, 0] - s * center[:, 1],
                       s * center[:, 0] + c * center[:, 1]], axis=1)
        width = thi - tlo
        spread = np.where(width > 0, math.sqrt(2.0), np.abs(c) + np.abs(s))
        t = half.min(axis=1) / spread
        drift = np.hypot(center[:, 0], center[:, 1]) * TWO_PI * 0.5 * width
        return rc, t - drift

    def fiber_sure(self, alo, ahi, blo, bhi):
        ca = 0.5 * (alo[:, :2] + ahi[:, :2])
        ha = 0.5 * (ahi[:, :2] - alo[:, :2])
        cb = 0.5 * (blo[:, :2] + bhi[:, :2])
        hb = 0.5 * (bhi[:, :2] - blo[:, :2])
        rc, t = self._inscribed(cb, hb, alo[:, 2], ahi[:, 2])
        half = ha + t[:, None]
        return ca + rc - half, ca + rc + half

    def inv_enclosure(self, lo, hi):
        clo, chi = _cos_range(-TWO_PI * hi[:, 2], -TWO_PI * lo[:, 2])
        slo, shi = _sin_range(-TWO_PI * hi[:, 2], -TWO_PI * lo[:, 2])
        (r1lo, r1hi), (r2lo, r2hi) = _rot_box(clo, chi, slo, shi,
                                              lo[:, 0], hi[:, 0], lo[:, 1], hi[:, 1])
        return (np.stack([-r1hi, -r2hi, -hi[:, 2]], axis=1),
                np.stack([-r1lo, -r2lo, -lo[:, 2]], axis=1))

    def inv_fiber_sure(self, lo, hi):
        c = 0.5 * (lo[:, :2] + hi[:, :2])
        h = 0.5 * (hi[:, :2] - lo[:, :2])
        rc, t = self._inscribed(c, h, -hi[:, 2], -lo[:, 2])
        return -rc - t[:, None], -rc + t[:, None]


# ---------------------------------------------------------------------------
# catalog

_CATALOG = {
    "R": lambda: EuclideanTorus(1, 0),
    "R^2": lambda: EuclideanTorus(2, 0),
    "R^3": lambda: EuclideanTorus(3, 0),
    "T": lambda: EuclideanTorus(0, 1),
    "T^2": lambda: EuclideanTorus(0, 2),
    "RxT": lambda: EuclideanTorus(1, 1),
    "R^2xT": lambda: EuclideanTorus(2, 1),
    "RxT^2": lambda: EuclideanTorus(1, 2),
    "R^3xT": lambda: EuclideanTorus(3, 1),
    "axb": AffineGroup,
    "R2xT": PlaneRotations,
    "heis3": Heisenberg,
}
_INSTANCES: dict = {}


def catalog_names() -> list[str]:
    return list(_CATALOG)


def get_group(name: str) -> GroupModel:
    """Look up a catalog entry by name; raises KeyError for unknown names."""
    if name not in _CATALOG:
        raise KeyError(f"unknown group {name!r}; known: {', '.join(_CATALOG)}")
    if name not in _INSTANCES:
        _INSTANCES[name] = _CATALOG[name]()
    return _INSTANCES[name]


def _as_points(G, x):
    if isinstance(x, GroupElement):
        x = x.coords
    return np.asarray(x, dtype=float)


def element(G: GroupModel, coords: Sequence[float]) -> GroupElement:
    x = G.reduce(np.asarray(coords, dtype=float).reshape(G.dim))
    return GroupElement(tuple(float(c) for c in x))


def compose(G: GroupModel, x, y) -> GroupElement:
    """The product xy as a GroupElement with circle coordinates reduced."""
    z = G.reduce(G.law(_as_points(G, x), _as_points(G, y)))
    return GroupElement(tuple(float(c) for c in z))


def inverse(G: GroupModel, x) -> GroupElement:
    z = G.reduce(G.inv(_as_points(G, x)))
    return GroupElement(tuple(float(c) for c in z))


def modular_value(G: GroupModel, x) -> float:
    return float(G.modular(_as_points(G, x)))
