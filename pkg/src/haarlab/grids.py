"""Compact sets as unions of closed grid cells, with two-sided product sets.

A grid family is fixed by an integer resolution per axis: cell ``k`` on an axis
with resolution ``r`` is ``[k/r, (k+1)/r]``.  Circle axes always carry the
whole period, so their cell count equals their resolution.

Products are computed by decomposing each factor into chart boxes, pushing
every pair of boxes through the group's box operations and painting the
results back onto the grid.  ``outer`` paints every cell meeting a sound
enclosure of the pair image; ``inner`` paints only cells lying inside a box
that is certainly covered.  The true product is squeezed between the two.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import GridOverflowError, ZeroMeasureError
from .groups import GroupModel, get_group

EPS = 1e-9
MAX_EXTENT_FACTOR = 16.0
MAX_CELLS = 60_000_000
PAIR_CHUNK = 1 << 18


@dataclass(frozen=True)
class GridSpec:
    lower: tuple
    upper: tuple
    counts: tuple
    cell_volume: float


@dataclass(frozen=True)
class MeasureEstimate:
    """Bracket ``lower <= true measure <= upper`` plus a midpoint-rule value."""

    lower: float
    upper: float
    side: str
    resolution: float
    value: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper * (1 + 1e-12) + 1e-300):
            raise ValueError(f"bad bracket [{self.lower}, {self.upper}]")
        if self.value is None:
            object.__setattr__(self, "value", 0.5 * (self.lower + self.upper))

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __iter__(self):
        return iter((self.lower, self.upper))


class GridSet:
    """A finite union of closed grid cells tied to one group.

    Non-circle axes are stored trimmed to the bounding box of the cells;
    ``offset`` holds the global index of ``cells[0, ..., 0]``.
    """

    __slots__ = ("group", "res", "offset", "cells")

    def __init__(self, group: GroupModel, res, offset, cells):
        cells = np.asarray(cells, dtype=bool)
        res = _res_tuple(res, group.dim)
        offset = tuple(int(o) for o in offset)
        if cells.ndim != group.dim:
            raise ValueError("cell array rank does not match group dimension")
        for ax in group.circle_axes:
            if offset[ax] != 0 or cells.shape[ax] != res[ax]:
                raise ValueError("circle axes must cover the full period")
        cells, offset = _trim(cells, offset, group.circle_axes)
        cells.setflags(write=False)
        self.group = group
        self.res = res
        self.offset = offset
        self.cells = cells

    # -- construction ----------------------------------------------------
    @classmethod
    def empty(cls, group, res):
        res = _res_tuple(res, group.dim)
        shape = [res[a] if a in group.circle_axes else 0 for a in range(group.dim)]
        return cls(group, res, (0,) * group.dim, np.zeros(shape, bool))

    @classmethod
    def from_indices(cls, group, res, idx):
        res = _res_tuple(res, group.dim)
        idx = np.asarray(idx, dtype=np.int64).reshape(-1, group.dim)
        if len(idx) == 0:
            return cls.empty(group, res)
        idx = idx.copy()
        for ax in group.circle_axes:
            idx[:, ax] %= res[ax]
        lo = idx.min(axis=0)
        hi = idx.max(axis=0) + 1
        for ax in group.circle_axes:
            lo[ax], hi[ax] = 0, res[ax]
        cells = np.zeros(tuple(hi - lo), bool)
        cells[tuple((idx - lo).T)] = True
        return cls(group, res, tuple(lo), cells)

    @property
    def dim(self):
        return self.group.dim

    @property
    def h(self) -> np.ndarray:
        return 1.0 / np.asarray(self.res, float)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def spec(self) -> GridSpec:
        lo = tuple(o / r for o, r in zip(self.offset, self.res))
        hi = tuple((o + s) / r for o, s, r in zip(self.offset, self.cells.shape, self.res))
        return GridSpec(lo, hi, tuple(self.cells.shape), self.cell_volume)

    def count(self) -> int:
        return int(self.cells.sum())

    def is_empty(self) -> bool:
        return not self.cells.any()

    def indices(self) -> np.ndarray:
        """Global integer indices of the cells, lexicographic order."""
        return np.argwhere(self.cells) + np.asarray(self.offset, dtype=np.int64)

    def lower_corners(self) -> np.ndarray:
        return self.indices() * self.h

    def centers(self) -> np.ndarray:
        return (self.indices() + 0.5) * self.h

    def bbox(self):
        """(lo, hi) chart bounding box of the cells."""
        lo = np.asarray(self.offset, float) * self.h
        hi = (np.asarray(self.offset) + np.asarray(self.cells.shape)) * self.h
        return lo, hi

    # -- set algebra -----------------------------------------------------
    def _check(self, other):
        if other.group is not self.group or other.res != self.res:
            raise ValueError("sets live on different groups or grids")

    def _aligned(self, other):
        self._check(other)
        lo = [min(a, b) for a, b in zip(self.offset, other.offset)]
        hi = [max(a + s, b + t) for a, s, b, t in
              zip(self.offset, self.cells.shape, other.offset, other.cells.shape)]
        return lo, _embed(self, lo, hi), _embed(other, lo, hi)

    def _combine(self, other, op):
        lo, a, b = self._aligned(other)
        return GridSet(self.group, self.res, lo, op(a, b))

    def __or__(self, other):
        return self._combine(other, np.logical_or)

    def __and__(self, other):
        return self._combine(other, np.logical_and)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a & ~b)

    def __xor__(self, other):
        return self._combine(other, np.logical_xor)

    def __eq__(self, other):
        if not isinstance(other, GridSet):
            return NotImplemented
        if other.group is not self.group or other.res != self.res:
            return False
        return self.offset == other.offset and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.group.name, self.res, self.offset, self.cells.tobytes()))

    def issubset(self, other) -> bool:
        return (self - other).is_empty()

    def dilate(self, k: int = 1) -> "GridSet":
        """Grow by ``k`` cell layers in every direction (including diagonals)."""
        if k <= 0 or self.is_empty():
            return self
        pad = [(0, 0) if a in self.group.circle_axes else (k, k) for a in range(self.dim)]
        arr = np.pad(self.cells, pad)
        out = arr.copy()
        for shift in itertools.product(range(-k, k + 1), repeat=self.dim):
            if any(shift):
                out |= np.roll(arr, shift, axis=tuple(range(self.dim)))
        off = [o if a in self.group.circle_axes else o - k for a, o in enumerate(self.offset)]
        return GridSet(self.group, self.res, off, out)

    def erode(self, k: int = 1) -> "GridSet":
        if k <= 0 or self.is_empty():
            return self
        pad = [(0, 0) if a in self.group.circle_axes else (k, k) for a in range(self.dim)]
        comp = GridSet(self.group, self.res,
                       [o if a in self.group.circle_axes else o - k for a, o in enumerate(self.offset)],
                       ~np.pad(self.cells, pad))
        return self - comp.dilate(k)

    def within_layer(self, other, k: int = 1) -> bool:
        """True when the symmetric difference lies in k boundary layers of both."""
        diff = self ^ other
        if diff.is_empty():
            return True
        band = (self.dilate(k) - self.erode(k)) | (other.dilate(k) - other.erode(k))
        return diff.issubset(band)

    # -- points ----------------------------------------------------------
    def cell_index(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float).reshape(-1, self.dim)
        return np.floor(pts * np.asarray(self.res, float)).astype(np.int64)

    def contains_points(self, pts) -> np.ndarray:
        """Membership of the cell containing each point (half-open cells)."""
        idx = self.cell_index(pts)
        for ax in self.group.circle_axes:
            idx[:, ax] %= self.res[ax]
        rel = idx - np.asarray(self.offset, dtype=np.int64)
        shape = np.asarray(self.cells.shape)
        ok = np.all((rel >= 0) & (rel < shape), axis=1)
        out = np.zeros(len(rel), bool)
        if ok.any():
            out[ok] = self.cells[tuple(rel[ok].T)]
        return out

    # -- box queries -----------------------------------------------------
    def _prefix(self):
        arr = self.cells.astype(np.int64)
        for ax in self.group.circle_axes:
            arr = np.concatenate([arr, arr, arr], axis=ax)
        p = arr
        for ax in range(self.dim):
            p = np.cumsum(p, axis=ax)
        return np.pad(p, [(1, 0)] * self.dim)

    def _count_in(self, i0, i1):
        """Number of set cells in index boxes [i0, i1) (global indices)."""
        n = len(i0)
        i0 = i0.copy()
        i1 = i1.copy()
        off = np.asarray(self.offset, dtype=np.int64)
        shape = np.asarray(self.cells.shape, dtype=np.int64)
        for ax in self.group.circle_axes:
            N = self.res[ax]
            full = (i1[:, ax] - i0[:, ax]) >= N
            k = np.floor_divide(i0[:, ax], N)
            i0[:, ax] -= k * N
            i1[:, ax] -= k * N
            i0[full, ax] = 0
            i1[full, ax] = N
            off[ax] = 0
            shape[ax] = 3 * N
        r0 = np.clip(i0 - off, 0, shape)
        r1 = np.clip(i1 - off, 0, shape)
        P = self._prefix()
        total = np.zeros(n, dtype=np.int64)
        for bits in itertools.product((0, 1), repeat=self.dim):
            idx = tuple(np.where(b, r1[:, a], r0[:, a]) for a, b in enumerate(bits))
            sign = -1 if (self.dim - sum(bits)) % 2 else 1
            total += sign * P[idx]
        return total

    def box_inside(self, lo, hi) -> np.ndarray:
        """Is every cell meeting the closed box [lo, hi] in the set?"""
        i0, i1 = _outer_index(np.atleast_2d(lo), np.atleast_2d(hi), self.res)
        return self._count_in(i0, i1) >= _capped_volume(i0, i1, self.res, self.group.circle_axes)

    def box_touches(self, lo, hi) -> np.ndarray:
        i0, i1 = _outer_index(np.atleast_2d(lo), np.atleast_2d(hi), self.res)
        return self._count_in(i0, i1) > 0

    # -- decomposition ---------------------------------------------------
    def boxes(self, merge_axes: Sequence[int] = ()):
        """Chart boxes (lo, hi) whose union is the set.

        Boxes are one cell wide on axes not listed in ``merge_axes``.
        """
        i0, i1 = _decompose(self.cells, tuple(merge_axes))
        off = np.asarray(self.offset, dtype=np.int64)
        h = self.h
        return (i0 + off) * h, (i1 + off) * h

    def __repr__(self):
        return (f"GridSet({self.group.name}, res={self.res}, offset={self.offset}, "
                f"shape={self.cells.shape}, cells={self.count()})")


# ---------------------------------------------------------------------------
# helpers


def _res_tuple(res, dim):
    if np.isscalar(res):
        return (int(res),) * dim
    res = tuple(int(r) for r in res)
    if len(res) != dim or min(res) < 1:
        raise ValueError("resolution must give one positive count per axis")
    return res


def _trim(cells, offset, circle_axes):
    if not cells.any():
        shape = [cells.shape[a] if a in circle_axes else 0 for a in range(cells.ndim)]
        off = [offset[a] if a in circle_axes else 0 for a in range(cells.ndim)]
        return np.zeros(shape, bool), tuple(off)
    sl = []
    off = list(offset)
    for ax in range(cells.ndim):
        if ax in circle_axes:
            sl.append(slice(None))
            continue
        other = tuple(a for a in range(cells.ndim) if a != ax)
        nz = np.flatnonzero(cells.any(axis=other))
        sl.append(slice(nz[0], nz[-1] + 1))
        off[ax] += int(nz[0])
    return np.ascontiguousarray(cells[tuple(sl)]), tuple(off)


def _embed(A: GridSet, lo, hi):
    out = np.zeros([h - l for l, h in zip(lo, hi)], bool)
    if A.cells.size == 0:
        return out
    sl = tuple(slice(o - l, o - l + s) for o, l, s in zip(A.offset, lo, A.cells.shape))
    out[sl] = A.cells
    return out


def _outer_index(lo, hi, res):
    r = np.asarray(res, float)
    i0 = np.floor(lo * r + EPS).astype(np.int64)
    i1 = np.ceil(hi * r - EPS).astype(np.int64)
    return i0, np.maximum(i1, i0 + 1)


def _inner_index(lo, hi, res):
    r = np.asarray(res, float)
    i0 = np.ceil(lo * r - EPS).astype(np.int64)
    i1 = np.floor(hi * r + EPS).astype(np.int64)
    return i0, i1


def _capped_volume(i0, i1, res, circle_axes):
    w = (i1 - i0).copy()
    for ax in circle_axes:
        w[:, ax] = np.minimum(w[:, ax], res[ax])
    return np.prod(w, axis=1)


def _runs_1d_batch(arr2d):
    """Runs along the last axis of a 2-D bool array: (row, start, stop)."""
    pad = np.zeros((arr2d.shape[0], 1), bool)
    d = np.diff(np.concatenate([pad, arr2d, pad], axis=1).astype(np.int8), axis=1)
    rs, cs = np.nonzero(d == 1)
    re, ce = np.nonzero(d == -1)
    return rs, cs, ce


def _decompose_nd(arr):
    """Run-and-stack rectangle decomposition of an n-d bool array."""
    if arr.ndim == 1:
        _, s, e = _runs_1d_batch(arr[None, :])
        return [((int(a),), (int(b),)) for a, b in zip(s, e)]
    out = []
    open_boxes: dict = {}
    for i in range(arr.shape[0] + 1):
        cur = set(_decompose_nd(arr[i])) if i < arr.shape[0] and arr[i].any() else set()
        for key in list(open_boxes):
            if key not in cur:
                start = open_boxes.pop(key)
                out.append(((start,) + key[0], (i,) + key[1]))
        for key in cur:
            if key not in open_boxes:
                open_boxes[key] = i
    return out


def _decompose(cells, merge_axes):
    d = cells.ndim
    if cells.size == 0 or not cells.any():
        z = np.zeros((0, d), np.int64)
        return z, z
    merge = tuple(sorted(set(merge_axes)))
    keep = tuple(a for a in range(d) if a not in merge)
    if not merge:
        i0 = np.argwhere(cells)
        return i0, i0 + 1
    if len(merge) == 1:
        m = merge[0]
        perm = keep + (m,)
        t = np.transpose(cells, perm)
        flat = t.reshape(-1, t.shape[-1])
        rows, s, e = _runs_1d_batch(flat)
        kidx = np.array(np.unravel_index(rows, t.shape[:-1])).T if keep else np.zeros((len(rows), 0), np.int64)
        i0 = np.zeros((len(rows), d), np.int64)
        i1 = np.zeros((len(rows), d), np.int64)
        for j, a in enumerate(keep):
            i0[:, a] = kidx[:, j]
            i1[:, a] = kidx[:, j] + 1
        i0[:, m] = s
        i1[:, m] = e
        return i0, i1
    perm = keep + merge
    t = np.transpose(cells, perm)
    nk = len(keep)
    lows, highs = [], []
    if nk:
        heads = np.argwhere(t.reshape(t.shape[:nk] + (-1,)).any(axis=-1))
    else:
        heads = np.zeros((1, 0), np.int64)
    for head in heads:
        sub = t[tuple(head)]
        for lo, hi in _decompose_nd(sub):
            lows.append(tuple(head) + lo)
            highs.append(tuple(h + 1 for h in head) + hi)
    i0p = np.array(lows, np.int64)
    i1p = np.array(highs, np.int64)
    inv = np.argsort(perm)
    return i0p[:, inv], i1p[:, inv]


# ---------------------------------------------------------------------------
# construction helpers


def box_set(group, res, lo, hi) -> GridSet:
    """Cells of [lo, hi] with the box snapped to the nearest grid vertices."""
    if isinstance(group, str):
        group = get_group(group)
    res = _res_tuple(res, group.dim)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    r = np.asarray(res, float)
    i0 = np.rint(lo * r).astype(np.int64)
    i1 = np.rint(hi * r).astype(np.int64)
    for ax in group.circle_axes:
        if hi[ax] - lo[ax] >= 1.0 - EPS:
            i0[ax], i1[ax] = 0, res[ax]
    if np.any(i1 <= i0):
        return GridSet.empty(group, res)
    grids = np.meshgrid(*[np.arange(a, b) for a, b in zip(i0, i1)], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    return GridSet.from_indices(group, res, idx)


def union_of_boxes(group, res, boxes: Iterable) -> GridSet:
    if isinstance(group, str):
        group = get_group(group)
    out = GridSet.empty(group, res)
    for lo, hi in boxes:
        out = out | box_set(group, res, lo, hi)
    return out


def point_box(group, x):
    x = np.asarray(x, float).reshape(1, group.dim)
    return x, x.copy()


# ---------------------------------------------------------------------------
# measures


def measure(A: GridSet, side: str = "left") -> MeasureEstimate:
    """Bracket of the Haar measure of the union of A's closed cells."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    hmax = float(np.max(A.h))
    if A.is_empty():
        return MeasureEstimate(0.0, 0.0, side, hmax, 0.0)
    lo = A.lower_corners()
    hi = lo + A.h
    exact = A.group.cell_mass(lo, hi, side)
    if exact is not None:
        m = float(np.sum(exact))
        return MeasureEstimate(m, m, side, hmax, m)
    dmin, dmax = A.group.density_bounds(lo, hi, side)
    mid = A.group.density(0.5 * (lo + hi), side)
    v = A.cell_volume
    lower = float(np.sum(dmin)) * v
    upper = float(np.sum(dmax)) * v
    value = min(max(float(np.sum(mid)) * v, lower), upper)
    return MeasureEstimate(lower, upper, side, hmax, value)


def bracket(outer: GridSet, inner: GridSet, side: str = "left") -> MeasureEstimate:
    """Measure bracket of a set known to lie between ``inner`` and ``outer``."""
    mo = measure(outer, side)
    mi = measure(inner, side)
    lower = min(mi.lower, mo.upper)
    return MeasureEstimate(lower, mo.upper, side, mo.resolution,
                           0.5 * (mi.value + mo.value))


def require_positive(*sets: GridSet):
    for s in sets:
        if s.is_empty():
            raise ZeroMeasureError("set has zero measure")


# ---------------------------------------------------------------------------
# product engine


class _Canvas:
    """Difference-array painter for index boxes, with circle-axis folding."""

    def __init__(self, group, res, g0, g1):
        self.group = group
        self.res = res
        self.g0 = np.asarray(g0, np.int64)
        self.g1 = np.asarray(g1, np.int64)
        for ax in group.circle_axes:
            self.g0[ax] = 0
            self.g1[ax] = 2 * res[ax]
        self.shape = tuple(int(s) for s in self.g1 - self.g0 + 1)
        size = int(np.prod(self.shape))
        if size > MAX_CELLS:
            raise GridOverflowError(f"product grid of {size} cells exceeds the cap")
        self.acc = np.zeros(size, np.float64)

    def paint(self, i0, i1):
        keep = np.all(i1 > i0, axis=1)
        if not keep.all():
            i0, i1 = i0[keep], i1[keep]
        if len(i0) == 0:
            return
        i0 = i0.copy()
        i1 = i1.copy()
        for ax in self.group.circle_axes:
            N = self.res[ax]
            full = (i1[:, ax] - i0[:, ax]) >= N
            k = np.floor_divide(i0[:, ax], N)
            i0[:, ax] -= k * N
            i1[:, ax] -= k * N
            i0[full, ax] = 0
            i1[full, ax] = N
        i0 = np.clip(i0, self.g0, self.g1) - self.g0
        i1 = np.clip(i1, self.g0, self.g1) - self.g0
        d = len(self.shape)
        flats, signs = [], []
        for bits in itertools.product((0, 1), repeat=d):
            idx = tuple(i1[:, a] if b else i0[:, a] for a, b in enumerate(bits))
            flats.append(np.ravel_multi_index(idx, self.shape))
            signs.append(np.full(len(i0), -1.0 if sum(bits) % 2 else 1.0))
        self.acc += np.bincount(np.concatenate(flats), weights=np.concatenate(signs),
                                minlength=self.acc.size)

    def result(self) -> GridSet:
        arr = self.acc.reshape(self.shape)
        for ax in range(arr.ndim):
            arr = np.cumsum(arr, axis=ax)
        arr = arr[tuple(slice(0, s - 1) for s in self.shape)] > 0.5
        off = self.g0.copy()
        for ax in self.group.circle_axes:
            N = self.res[ax]
            arr = np.take(arr, range(N), axis=ax) | np.take(arr, range(N, 2 * N), axis=ax)
            off[ax] = 0
        return GridSet(self.group, self.res, off, arr)


def _inner_product_boxes(G, alo, ahi, blo, bhi):
    """Boxes certainly contained in the product of box pairs.

    On each base axis the narrower factor is pinned to one of its endpoints
    while the wider one sweeps its range; the two endpoint choices per axis
    together cover the whole base range of the product.
    """
    base = G.base_axes
    fib = G.fiber_axes
    wa = ahi - alo
    wb = bhi - blo
    pin_a = wa <= wb
    for bits in itertools.product((0, 1), repeat=len(base)):
        a0, a1, b0, b1 = alo.copy(), ahi.copy(), blo.copy(), bhi.copy()
        for ax, bit in zip(base, bits):
            pa = np.where(bit, ahi[:, ax], alo[:, ax])
            pb = np.where(bit, bhi[:, ax], blo[:, ax])
            m = pin_a[:, ax]
            a0[:, ax] = np.where(m, pa, alo[:, ax])
            a1[:, ax] = np.where(m, pa, ahi[:, ax])
            b0[:, ax] = np.where(m, blo[:, ax], pb)
            b1[:, ax] = np.where(m, bhi[:, ax], pb)
        lo = np.empty_like(alo)
        hi = np.empty_like(ahi)
        lo[:, list(base)] = a0[:, list(base)] + b0[:, list(base)]
        hi[:, list(base)] = a1[:, list(base)] + b1[:, list(base)]
        if fib:
            flo, fhi = G.fiber_sure(a0, a1, b0, b1)
            lo[:, list(fib)] = flo
            hi[:, list(fib)] = fhi
        yield lo, hi


def _extent_guard(G, res, g0, g1, ref_extent, cap):
    for ax in range(G.dim):
        if ax in G.circle_axes:
            continue
        limit = cap * max(ref_extent[ax], 1)
        if g1[ax] - g0[ax] > limit:
            raise GridOverflowError(
                f"axis {ax}: image spans {g1[ax] - g0[ax]} cells, cap is {limit:.0f}")


def _index_extent(lo, hi, res):
    i0, i1 = _outer_index(lo, hi, res)
    return i1 - i0


def product_boxes(G, res, a_boxes, b_out, b_in=None, *, ref_extent=None,
                  cap=MAX_EXTENT_FACTOR, inner=True):
    """Paint the product of two box families; returns (outer, inner) GridSets."""
    res = _res_tuple(res, G.dim)
    alo, ahi = a_boxes
    blo, bhi = b_out
    if b_in is None:
        b_in = b_out
    if len(alo) == 0 or len(blo) == 0:
        e = GridSet.empty(G, res)
        return e, e
    bb_lo, bb_hi = G.enclosure(alo.min(0, keepdims=True), ahi.max(0, keepdims=True),
                               blo.min(0, keepdims=True), bhi.max(0, keepdims=True))
    g0, g1 = _outer_index(bb_lo, bb_hi, res)
    g0, g1 = g0[0], g1[0]
    if ref_extent is None:
        ref_extent = np.maximum(_index_extent(alo.min(0), ahi.max(0), res),
                                _index_extent(blo.min(0), bhi.max(0), res))
    _extent_guard(G, res, g0, g1, ref_extent, cap)
    out_c = _Canvas(G, res, g0, g1)
    in_c = _Canvas(G, res, g0, g1) if inner else None
    bilo, bihi = b_in
    nb = len(blo)
    step = max(1, PAIR_CHUNK // nb)
    for s in range(0, len(alo), step):
        a0 = np.repeat(alo[s:s + step], nb, axis=0)
        a1 = np.repeat(ahi[s:s + step], nb, axis=0)
        k = len(alo[s:s + step])
        b0 = np.tile(blo, (k, 1))
        b1 = np.tile(bhi, (k, 1))
        lo, hi = G.enclosure(a0, a1, b0, b1)
        out_c.paint(*_outer_index(lo, hi, res))
        if inner:
            c0 = np.tile(bilo, (k, 1))
            c1 = np.tile(bihi, (k, 1))
            ok = np.all(c1 >= c0, axis=1)
            if ok.any():
                for ilo, ihi in _inner_product_boxes(G, a0[ok], a1[ok], c0[ok], c1[ok]):
                    in_c.paint(*_inner_index(ilo, ihi, res))
    outer = out_c.result()
    return outer, (in_c.result() if inner else GridSet.empty(G, res))


def _inverse_box_families(B: GridSet):
    G = B.group
    lo, hi = B.boxes(G.inv_merge)
    olo, ohi = G.inv_enclosure(lo, hi)
    base = list(G.base_axes)
    fib = list(G.fiber_axes)
    ilo = np.empty_like(lo)
    ihi = np.empty_like(hi)
    ilo[:, base] = -hi[:, base]
    ihi[:, base] = -lo[:, base]
    if fib:
        flo, fhi = G.inv_fiber_sure(lo, hi)
        ilo[:, fib] = flo
        ihi[:, fib] = fhi
    return (olo, ohi), (ilo, ihi)


def product_pair(A: GridSet, B: GridSet, *, invert_b: bool = False,
                 cap: float = MAX_EXTENT_FACTOR):
    """(outer, inner) cell sets bracketing AB (or AB^{-1} with ``invert_b``)."""
    A._check(B)
    G = A.group
    if A.is_empty() or B.is_empty():
        e = GridSet.empty(G, A.res)
        return e, e
    a_boxes = A.boxes(G.left_merge)
    if invert_b:
        b_out, b_in = _inverse_box_families(B)
    else:
        b_out = b_in = B.boxes(G.right_merge)
    ref = np.maximum(np.asarray(A.cells.shape), np.asarray(B.cells.shape))
    return product_boxes(G, A.res, a_boxes, b_out, b_in, ref_extent=ref, cap=cap)


def product_set(A: GridSet, B: GridSet, mode: str = "outer", **kw) -> GridSet:
    """Grid version of AB: superset (``outer``) or subset (``inner``)."""
    outer, inner = product_pair(A, B, **kw)
    if mode == "outer":
        return outer
    if mode == "inner":
        return inner
    raise ValueError("mode must be 'outer' or 'inner'")


def inverse_pair(A: GridSet, cap: float = MAX_EXTENT_FACTOR):
    G = A.group
    if A.is_empty():
        return A, A
    (olo, ohi), (ilo, ihi) = _inverse_box_families(A)
    g0, g1 = _outer_index(olo.min(0, keepdims=True), ohi.max(0, keepdims=True), A.res)
    _extent_guard(G, A.res, g0[0], g1[0], np.asarray(A.cells.shape), cap)
    out_c = _Canvas(G, A.res, g0[0], g1[0])
    in_c = _Canvas(G, A.res, g0[0], g1[0])
    out_c.paint(*_outer_index(olo, ohi, A.res))
    in_c.paint(*_inner_index(ilo, ihi, A.res))
    return out_c.result(), in_c.result()


def inverse_set(A: GridSet, mode: str = "outer") -> GridSet:
    outer, inner = inverse_pair(A)
    return outer if mode == "outer" else inner


def translate(A: GridSet, x, side: str = "left"):
    """(outer, inner) for xA (``side='left'``) or Ax (``side='right'``).

    The inner set keeps the outer cells whose pullback by x^-1 is certainly
    inside A.
    """
    G = A.group
    pt = point_box(G, x)
    ref = np.asarray(A.cells.shape)
    # a translate can stretch chart axes by any factor; only the cell cap applies
    kw = dict(ref_extent=ref, cap=math.inf, inner=False)
    if side == "left":
        outer, _ = product_boxes(G, A.res, pt, A.boxes(G.right_merge), **kw)
    elif side == "right":
        outer, _ = product_boxes(G, A.res, A.boxes(G.left_merge), pt, **kw)
    else:
        raise ValueError("side must be 'left' or 'right'")
    if outer.is_empty():
        return outer, outer
    lo = outer.lower_corners()
    hi = lo + outer.h
    xi = G.inv(pt[0])
    xi = np.repeat(xi, len(lo), axis=0)
    if side == "left":
        plo, phi = G.enclosure(xi, xi, lo, hi)
    else:
        plo, phi = G.enclosure(lo, hi, xi, xi)
    keep = A.box_inside(plo, phi)
    inner = GridSet.from_indices(G, A.res, outer.indices()[keep])
    return outer, inner


# ---------------------------------------------------------------------------
# convolution and energy


@dataclass(frozen=True)
class Quadrature:
    value: float
    lower: float
    upper: float

    @property
    def width(self):
        return self.upper - self.lower


def _cells_boxes(S: GridSet):
    lo = S.lower_corners()
    return lo, lo + S.h


def convolve_indicator(A: GridSet, B: GridSet, x, path: str = "left") -> Quadrature:
    """1_A * 1_B at x by midpoint quadrature, with a sure/maybe bracket.

    ``path='left'`` integrates 1_A(y) 1_B(y^{-1}x) against the left measure
    over cells of A; ``path='right'`` integrates 1_A(xy^{-1}) 1_B(y) against
    the right measure over cells of B.
    """
    G = A.group
    x = np.asarray(x, float).reshape(1, G.dim)
    if path == "left":
        S, T, side = A, B, "left"
        lo, hi = _cells_boxes(S)
        ilo, ihi = G.inv_enclosure(lo, hi)
        elo, ehi = G.enclosure(ilo, ihi, np.repeat(x, len(lo), 0), np.repeat(x, len(lo), 0))
        mids = G.law(G.inv(0.5 * (lo + hi)), x)
    elif path == "right":
        S, T, side = B, A, "right"
        lo, hi = _cells_boxes(S)
        ilo, ihi = G.inv_enclosure(lo, hi)
        elo, ehi = G.enclosure(np.repeat(x, len(lo), 0), np.repeat(x, len(lo), 0), ilo, ihi)
        mids = G.law(x, G.inv(0.5 * (lo + hi)))
    else:
        raise ValueError("path must be 'left' or 'right'")
    if len(lo) == 0:
        return Quadrature(0.0, 0.0, 0.0)
    dmin, dmax = G.density_bounds(lo, hi, side)
    dmid = G.density(0.5 * (lo + hi), side)
    v = S.cell_volume
    sure = T.box_inside(elo, ehi)
    maybe = T.box_touches(elo, ehi)
    hit = T.contains_points(G.reduce(mids))
    value = float(np.sum(dmid[hit])) * v
    lower = float(np.sum(dmin[sure])) * v
    upper = float(np.sum(dmax[maybe])) * v
    return Quadrature(min(max(value, lower), upper), lower, upper)


def convolution_grid(A: GridSet, B: GridSet, xs, path: str = "right", chunk: int = 1 << 22):
    """Midpoint values of 1_A * 1_B at many points ``xs``."""
    G = A.group
    xs = np.asarray(xs, float).reshape(-1, G.dim)
    S, T, side = (B, A, "right") if path == "right" else (A, B, "left")
    c = S.centers()
    w = G.density(c, side) * S.cell_volume
    cinv = G.inv(c)
    out = np.zeros(len(xs))
    step = max(1, chunk // max(len(c), 1))
    for s in range(0, len(xs), step):
        xb = xs[s:s + step]
        n = len(xb)
        if path == "right":
            pts = G.law(np.repeat(xb, len(c), 0), np.tile(cinv, (n, 1)))
        else:
            pts = G.law(np.tile(cinv, (n, 1)), np.repeat(xb, len(c), 0))
        hit = T.contains_points(G.reduce(pts)).reshape(n, len(c))
        out[s:s + step] = hit.astype(float) @ w
    return out


def energy(A: GridSet, B: GridSet) -> float:
    """Right multiplicative energy: integral of (1_A * 1_B)^2 against nu."""
    G = A.group
    outer, _ = product_pair(A, B)
    xs = outer.centers()
    f = convolution_grid(A, B, xs, path="right")
    w = G.density(xs, "right") * outer.cell_volume
    return float(np.sum(f * f * w))


# ---------------------------------------------------------------------------
# serialization


def dumps(A: GridSet) -> str:
    flat = A.cells.ravel().astype(np.int8)
    if flat.size:
        change = np.flatnonzero(np.diff(flat)) + 1
        bounds = np.concatenate([[0], change, [flat.size]])
        runs = np.diff(bounds).tolist()
        if flat[0]:
            runs = [0] + runs
    else:
        runs = []
    lines = [
        "haarlab-gridset 1",
        f"group {A.group.name}",
        "res " + " ".join(map(str, A.res)),
        "offset " + " ".join(map(str, A.offset)),
        "shape " + " ".join(map(str, A.cells.shape)),
        "rle " + " ".join(map(str, runs)),
    ]
    return "\n".join(lines) + "\n"


def loads(text: str) -> GridSet:
    fields = {}
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("haarlab-gridset"):
        raise ValueError("not a gridset file")
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        fields[key] = rest.split()
    try:
        G = get_group(fields["group"][0])
        res = tuple(int(v) for v in fields["res"])
        offset = tuple(int(v) for v in fields["offset"])
        shape = tuple(int(v) for v in fields["shape"])
        runs = [int(v) for v in fields.get("rle", [])]
    except (KeyError, IndexError) as err:
        raise ValueError(f"malformed gridset header: {err}") from None
    flat = np.zeros(int(np.prod(shape)), bool)
    pos, bit = 0, False
    for r in runs:
        if bit:
            flat[pos:pos + r] = True
        pos += r
        bit = not bit
    if pos != flat.size:
        raise ValueError("run lengths do not match shape")
    return GridSet(G, res, offset, flat.reshape(shape))


def save(A: GridSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(A))


def load(path) -> GridSet:
    with open(path) as fh:
        return loads(fh.read())
