"""Fiber functions and expansion gap on the ax+b group.

In the chart (u, b) the fiber over u is the line {u} x R, and the kernel of
the modular function is the b-axis.  For a cell set A with b-length L(u) over
u, the right fiber length is r(u) = L(u) and the left one is
l(u) = e^{-u} L(u).  Their ratio ``kappa(u) = r/l = e^u`` is the factor that
weighs the moment chain below; it is the reciprocal of the chart's modular
function e^{-u}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroMeasureError
from .grids import GridSet, bracket, measure, product_pair
from .groups import compose, get_group, inverse


def _require_axb(A: GridSet):
    if A.group.name != "axb":
        raise ValueError("this analysis runs on the ax+b group")


@dataclass
class LeftRightFibers:
    u_edges: np.ndarray
    r_vals: np.ndarray
    l_vals: np.ndarray

    @property
    def u_centers(self) -> np.ndarray:
        return 0.5 * (self.u_edges[:-1] + self.u_edges[1:])

    def kappa_relation_error(self) -> float:
        """max |l - r / kappa| at cell centers."""
        k = np.exp(self.u_centers)
        return float(np.max(np.abs(self.l_vals - self.r_vals / k), initial=0.0))


def left_right_fibers(A: GridSet) -> LeftRightFibers:
    """r(u) = length of the fiber of A g^-1 in the kernel; l(u) likewise for g^-1 A.

    Both come from the group law: the fiber row at u is mapped by right or
    left multiplication with g^-1 = (-u, 0) onto the kernel and measured
    there.  Values are taken at u-cell centers.
    """
    _require_axb(A)
    G = A.group
    hu, hb = A.h
    u0 = A.offset[0]
    n_u = A.cells.shape[0]
    edges = (u0 + np.arange(n_u + 1)) * hu
    centers = 0.5 * (edges[:-1] + edges[1:])
    r = np.zeros(n_u)
    ell = np.zeros(n_u)
    for i, u in enumerate(centers):
        cols = np.flatnonzero(A.cells[i])
        if cols.size == 0:
            continue
        blo = (A.offset[1] + cols) * hb
        pts_lo = np.stack([np.full(cols.size, u), blo], axis=1)
        pts_hi = np.stack([np.full(cols.size, u), blo + hb], axis=1)
        ginv = np.array([[-u, 0.0]])
        # right translate: the kernel coordinate of (u, b)(-u, 0)
        r[i] = float(np.sum(G.law(pts_hi, ginv)[:, 1] - G.law(pts_lo, ginv)[:, 1]))
        ell[i] = float(np.sum(G.law(ginv, pts_hi)[:, 1] - G.law(ginv, pts_lo)[:, 1]))
    return LeftRightFibers(edges, r, ell)


def _moment(A: GridSet, k: int) -> float:
    """Integral of kappa^k l du = integral of e^{(k-1)u} L(u) du, exact per cell."""
    hu, hb = A.h
    L = A.cells.sum(axis=1) * hb
    lo = (A.offset[0] + np.arange(A.cells.shape[0])) * hu
    c = k - 1
    if c == 0:
        w = np.full(lo.shape, hu)
    else:
        w = (np.exp(c * (lo + hu)) - np.exp(c * lo)) / c
    return float(np.sum(w * L))


@dataclass
class HoelderReport:
    moments: dict
    margin: float
    holds: bool
    nu_sq_bound: float
    mu_sq_bound: float
    nu_sq: tuple
    mu_sq: tuple
    bounds_hold: bool
    extrema: dict = field(default_factory=dict)


def hoelder_chain_check(A: GridSet) -> HoelderReport:
    """M1 M0 <= M2 M-1 for M_k = int kappa^k l du, plus the product lower bounds.

    The product bounds are nu(A^2) >= 2(M1 + M2) and mu(A^2) >= 2(M-1 + M0).
    A bound counts as violated only if it exceeds the upper bracket of the
    measured product measure.
    """
    _require_axb(A)
    if A.is_empty():
        raise ZeroMeasureError("empty set")
    M = {k: _moment(A, k) for k in (-1, 0, 1, 2)}
    margin = M[2] * M[-1] - M[1] * M[0]
    scale = abs(M[2] * M[-1]) + abs(M[1] * M[0])
    nu_bound = 2 * (M[1] + M[2])
    mu_bound = 2 * (M[-1] + M[0])
    out, inn = product_pair(A, A)
    nu2 = bracket(out, inn, "right")
    mu2 = bracket(out, inn, "left")
    ok = nu2.upper >= nu_bound * (1 - 1e-12) and mu2.upper >= mu_bound * (1 - 1e-12)
    lo_u = A.offset[0] * A.h[0]
    hi_u = (A.offset[0] + A.cells.shape[0]) * A.h[0]
    G = A.group
    extrema = {"modular_min": float(G.modular(np.array([hi_u, 0.0]))),
               "modular_max": float(G.modular(np.array([lo_u, 0.0])))}
    return HoelderReport(M, margin, margin >= -1e-12 * scale, nu_bound, mu_bound,
                         (nu2.lower, nu2.upper), (mu2.lower, mu2.upper), ok, extrema)


@dataclass
class StrictGap:
    gap: float
    lower: float
    upper: float
    tol: float

    @property
    def resolved(self) -> bool:
        return self.lower > 0

    @property
    def weak_ok(self) -> bool:
        return self.upper >= 0


def _gap(nuA, nuA2, muA, muA2):
    return 1.0 - math.sqrt(nuA / nuA2) - math.sqrt(muA / muA2)


def strict_gap(A: GridSet) -> StrictGap:
    """1 - (nu(A)/nu(A^2))^(1/2) - (mu(A)/mu(A^2))^(1/2) with its bracket."""
    _require_axb(A)
    nuA, muA = measure(A, "right"), measure(A, "left")
    if nuA.upper <= 0:
        raise ZeroMeasureError("empty set")
    out, inn = product_pair(A, A)
    nu2, mu2 = bracket(out, inn, "right"), bracket(out, inn, "left")
    val = _gap(nuA.value, nu2.value, muA.value, mu2.value)
    lo = _gap(nuA.upper, nu2.lower, muA.upper, mu2.lower)
    hi = _gap(nuA.lower, nu2.upper, muA.lower, mu2.upper)
    return StrictGap(val, lo, hi, hi - lo)


@dataclass
class ConjugationReport:
    factor: float
    predicted: float
    chart_modular_inverse: float
    error: float

    @property
    def holds(self) -> bool:
        return self.error <= 1e-9 * max(1.0, self.predicted)


def _kernel_intervals(X: GridSet):
    if X.group.name != "R":
        raise ValueError("kernel sets are given as sets on the b-line R")
    lo, hi = X.boxes((0,))
    return lo[:, 0], hi[:, 0]


def conjugate_kernel(X: GridSet, g) -> tuple:
    """Endpoints of g^-1 X g, pushed through the group law."""
    G = get_group("axb")
    blo, bhi = _kernel_intervals(X)
    gi = inverse(G, g)

    def conj(b):
        return compose(G, gi, compose(G, (0.0, b), g)).coords

    lo, hi = [], []
    for a, b in zip(blo, bhi):
        pa, pb = conj(a), conj(b)
        if abs(pa[0]) > 1e-12 or abs(pb[0]) > 1e-12:
            raise ValueError("conjugate left the kernel")
        lo.append(min(pa[1], pb[1]))
        hi.append(max(pa[1], pb[1]))
    return np.array(lo), np.array(hi)


def conjugation_modulus_check(X: GridSet, g) -> ConjugationReport:
    """Measured mu_H(g^-1 X g) / mu_H(X) against kappa(g)^-1 = e^{-u}."""
    lo, hi = conjugate_kernel(X, g)
    mX = measure(X).value
    if mX <= 0:
        raise ZeroMeasureError("empty kernel set")
    factor = float(np.sum(hi - lo)) / mX
    u = float(np.asarray(getattr(g, "coords", g), float)[0])
    predicted = math.exp(-u)
    G = get_group("axb")
    chart_inv = float(G.modular(G.inv(np.asarray([u, 0.0]))))
    return ConjugationReport(factor, predicted, chart_inv, abs(factor - predicted))


def _union_length(lo, hi) -> float:
    order = np.argsort(lo)
    total, cur_lo, cur_hi = 0.0, None, None
    for a, b in zip(lo[order], hi[order]):
        if cur_hi is None or a > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
        else:
            cur_hi = max(cur_hi, b)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


def fiber_kemperman_check(X1: GridSet, X2: GridSet, g) -> dict:
    """mu_H(g^-1 X1 g X2) >= kappa(g)^-1 mu_H(X1) + mu_H(X2) inside the kernel."""
    c_lo, c_hi = conjugate_kernel(X1, g)
    d_lo, d_hi = _kernel_intervals(X2)
    slo = (c_lo[:, None] + d_lo[None, :]).ravel()
    shi = (c_hi[:, None] + d_hi[None, :]).ravel()
    lhs = _union_length(slo, shi)
    u = float(np.asarray(getattr(g, "coords", g), float)[0])
    rhs = math.exp(-u) * measure(X1).value + measure(X2).value
    return {"lhs": float(lhs), "rhs": float(rhs), "holds": bool(lhs >= rhs - 1e-12 * max(1.0, rhs))}
