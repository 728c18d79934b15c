"""Scalar expansion functionals of pairs of grid sets.

Every functional works on measure brackets.  ``value`` is the midpoint-rule
estimate; ``lower``/``upper`` are sound bounds obtained by pushing the
bracket ends through the formula on the side that makes each bound valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import HypothesisRefused, NonUnimodularError, ZeroMeasureError
from .grids import GridSet, MeasureEstimate, bracket, inverse_pair, measure, product_pair

@dataclass(frozen=True)
class Interval:
    value: float
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _positive(*ms: MeasureEstimate):
    for m in ms:
        if m.upper <= 0.0:
            raise ZeroMeasureError("functional needs sets of positive measure")


# ---------------------------------------------------------------------------
# Brunn-Minkowski coefficient


def solve_bm(x: float, y: float) -> tuple[float, bool]:
    """Root r > 0 of x^(1/r) + y^(1/r) = 1; (0.0, True) when none exists."""
    if not (x > 0 and y > 0):
        raise ZeroMeasureError("ratios must be positive")
    if x >= 1.0 or y >= 1.0:
        return 0.0, True

    # s = 1/r; g(s) = x^s + y^s - 1 is strictly decreasing from 1 to -1
    def g(s):
        return x ** s + y ** s - 1.0

    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
    lo = hi / 2.0
    while g(lo) < 0:
        lo /= 2.0
    s = brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return 1.0 / s, False


@dataclass(frozen=True)
class BMCoefficient:
    r: float
    degenerate: bool
    x: float
    y: float
    lower: float
    upper: float

    def __float__(self):
        return self.r


def bm_from_measures(nuA, muB, nuAB, muAB) -> BMCoefficient:
    """Coefficient from four measure brackets (or plain numbers)."""
    def trip(m):
        if isinstance(m, MeasureEstimate):
            return m.value, m.lower, m.upper
        return float(m), float(m), float(m)

    a, b, c, d = (trip(m) for m in (nuA, muB, nuAB, muAB))
    if min(a[0], b[0], c[0], d[0]) <= 0:
        raise ZeroMeasureError("functional needs sets of positive measure")
    x = min(a[0] / c[0], 1.0)
    y = min(b[0] / d[0], 1.0)
    r, deg = solve_bm(x, y)
    # the root decreases as either ratio grows
    x_hi = min(a[2] / max(c[1], 1e-300), 1.0)
    y_hi = min(b[2] / max(d[1], 1e-300), 1.0)
    x_lo = min(a[1] / c[2], 1.0) if a[1] > 0 else x
    y_lo = min(b[1] / d[2], 1.0) if b[1] > 0 else y
    r_lo, _ = solve_bm(x_hi, y_hi)
    r_hi, _ = solve_bm(x_lo, y_lo)
    return BMCoefficient(r, deg, x, y, min(r_lo, r), max(r_hi, r))


def bm_coefficient(A: GridSet, B: GridSet) -> BMCoefficient:
    """BM(A, B): the r with (nu(A)/nu(AB))^(1/r) + (mu(B)/mu(AB))^(1/r) = 1."""
    out, inn = product_pair(A, B)
    nuA = measure(A, "right")
    muB = measure(B, "left")
    _positive(nuA, muB)
    return bm_from_measures(nuA, muB, bracket(out, inn, "right"), bracket(out, inn, "left"))


# ---------------------------------------------------------------------------
# Ruzsa distance


def _log_ratio(num, den) -> Interval:
    """log2 of prod(num)/prod(den) for measure brackets."""
    v = sum(math.log2(m.value) for m in num) - sum(math.log2(m.value) for m in den)
    lo = sum(math.log2(m.lower) if m.lower > 0 else -math.inf for m in num) \
        - sum(math.log2(m.upper) for m in den)
    hi = sum(math.log2(m.upper) for m in num) \
        - sum(math.log2(m.lower) if m.lower > 0 else -math.inf for m in den)
    return Interval(v, lo, hi)


def ruzsa_distance(A: GridSet, B: GridSet) -> Interval:
    """d(A,B) = log2[nu(AB^-1) mu(AB^-1) / (nu(A) mu(B^-1))]."""
    out, inn = product_pair(A, B, invert_b=True)
    bo, bi = inverse_pair(B)
    nuA = measure(A, "right")
    muBinv = bracket(bo, bi, "left")
    _positive(nuA, muBinv)
    return _log_ratio([bracket(out, inn, "right"), bracket(out, inn, "left")], [nuA, muBinv])


def ruzsa_distance_inv(A: GridSet, B: GridSet) -> Interval:
    """d(A, B^-1) = log2[nu(AB) mu(AB) / (nu(A) mu(B))] without inverting B."""
    out, inn = product_pair(A, B)
    nuA = measure(A, "right")
    muB = measure(B, "left")
    _positive(nuA, muB)
    return _log_ratio([bracket(out, inn, "right"), bracket(out, inn, "left")], [nuA, muB])


# ---------------------------------------------------------------------------
# unimodular functionals


def _require_unimodular(G):
    if not G.unimodular:
        raise NonUnimodularError(f"{G.name} is not unimodular")


def discrepancy(A: GridSet, B: GridSet) -> Interval:
    """mu(AB) - mu(A) - mu(B) on a unimodular group."""
    _require_unimodular(A.group)
    out, inn = product_pair(A, B)
    mAB = bracket(out, inn, "left")
    mA = measure(A)
    mB = measure(B)
    return Interval(mAB.value - mA.value - mB.value,
                    mAB.lower - mA.upper - mB.upper,
                    mAB.upper - mA.lower - mB.lower)


@dataclass(frozen=True)
class KempermanReport:
    margin: float
    tol: float
    branch: str
    muAB: MeasureEstimate
    muA: MeasureEstimate
    muB: MeasureEstimate

    @property
    def holds(self) -> bool:
        return self.margin >= -self.tol


def kemperman_check(A: GridSet, B: GridSet) -> KempermanReport:
    """Margin of mu(AB) >= min(mu(A) + mu(B), mu(G)), conservative sides."""
    G = A.group
    _require_unimodular(G)
    out, inn = product_pair(A, B)
    mAB = bracket(out, inn, "left")
    mA = measure(A)
    mB = measure(B)
    s = mA.upper + mB.upper
    total = G.total_measure
    branch = "sum" if s <= total else "group"
    margin = mAB.lower - min(s, total)
    return KempermanReport(margin, mAB.width + mA.width + mB.width, branch, mAB, mA, mB)


# ---------------------------------------------------------------------------
# dimension bounds


def _floor_log2(K: float) -> int:
    m = math.floor(math.log2(K))
    # guard against log2 rounding just below an exact power of two
    if 2.0 ** (m + 1) <= K:
        m += 1
    return m


def dimension_bound(K: float) -> int:
    """floor(log2 K) * (floor(log2 K) + 1) / 2 for K > 1."""
    if not K > 1:
        raise ValueError("dimension bound needs K > 1")
    m = _floor_log2(K)
    return m * (m + 1) // 2


def half_log_floor(K: float) -> int:
    """floor(log2(K) / 2)."""
    if not K > 1:
        raise ValueError("needs K > 1")
    return math.floor(math.log2(K) / 2 + 1e-12)


@dataclass(frozen=True)
class AsymExpansionReport:
    distance: Interval
    K_hat: float
    K_upper: float
    bm_lower_bound: int
    quotient_dim_bound: int
    dimension_bound_khat: int
    bm_display_lhs: float
    kemperman_floor_ok: bool
    constants: dict


def asym_expansion_report(A: GridSet, B: GridSet) -> AsymExpansionReport:
    """Quantities implied by d(A, B^-1) for the asymmetric expansion bound.

    ``K_hat`` is 2^d at the midpoint estimate, ``K_upper`` at the upper end.
    """
    d = ruzsa_distance_inv(A, B)
    K = 2.0 ** d.value
    K_up = 2.0 ** d.upper
    if K <= 1:
        raise HypothesisRefused("K_hat <= 1 leaves no room for the bound", margin=K - 1)
    m = half_log_floor(K)
    out, inn = product_pair(A, B)
    x = measure(A, "right").value / bracket(out, inn, "right").value
    y = measure(B, "left").value / bracket(out, inn, "left").value
    L = math.log2(K)
    lhs = x ** (2 / L) + y ** (2 / L)
    # noncompact groups force mu(AB) >= mu(A) + mu(B), hence K_hat >= 2
    floor_ok = A.group.compact or K_up >= 2.0
    consts = {
        "approx_group": 64 * K ** 12,
        "cover": 33 * K ** 12,
        "quotient_growth_cubic": 32 * K ** 3,
        "quotient_growth_sixth": 32 * K ** 6,
    }
    return AsymExpansionReport(d, K, K_up, m, m * (m + 1) // 2, dimension_bound(K),
                               lhs, floor_ok, consts)
