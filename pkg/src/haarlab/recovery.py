"""Interval recovery for sets with small sumset on R and on cylinders over R."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, HypothesisRefused, NonUnimodularError
from .grids import GridSet, bracket, measure, product_pair
from .metrics import discrepancy
from .quotient import (QuotientMap, almost_domination_check, equality_domination_check,
                       fiber_profile, superlevel)

NEAR_CONSTANT = 1 / 20
EXCESS_FACTOR = 100


@dataclass
class IntervalRecovery:
    I: tuple
    J: tuple
    excess_I: float
    excess_J: float
    case: str
    checks: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {"kind": "interval-recovery", "case": self.case, "I": list(self.I),
               "J": list(self.J), "excess_I": self.excess_I, "excess_J": self.excess_J}
        rec.update({k: v for k, v in self.checks.items()
                    if isinstance(v, (bool, int, float, str))})
        return rec


@dataclass
class ProgressionCertificate:
    I: tuple
    P: list
    claimed_cover: bool = True

    def validate(self):
        if len(self.I) != 2 or not self.I[0] <= self.I[1]:
            raise CertificateError("I must be a closed interval (a, b) with a <= b")
        for gen in self.P:
            if len(gen) != 2:
                raise CertificateError("each generator needs (step, length)")
            step, length = gen
            if int(length) != length or length < 1 or not math.isfinite(step):
                raise CertificateError("progression lengths must be positive integers")

    def intervals(self) -> list:
        """I + P as a sorted list of merged closed intervals."""
        self.validate()
        a, b = self.I
        shifts = [0.0]
        for step, length in self.P:
            shifts = [s + k * step for s in shifts for k in range(int(length))]
        ivs = sorted((a + s, b + s) for s in shifts)
        merged = [list(ivs[0])]
        for lo, hi in ivs[1:]:
            if lo <= merged[-1][1] + 1e-12:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return [tuple(m) for m in merged]


def hull(X: GridSet) -> tuple:
    lo, hi = X.bbox()
    return float(lo[0]), float(hi[0])


def _check_line(X: GridSet):
    if X.group.dim != 1 or X.group.circle_axes:
        raise ValueError("interval recovery works on R")


def freiman_3k4(A: GridSet, B: GridSet) -> IntervalRecovery:
    """Hull intervals of A and B when lambda(A+B) < lambda(A)+lambda(B)+min."""
    _check_line(A)
    _check_line(B)
    out, inn = product_pair(A, B)
    lAB = bracket(out, inn)
    lA, lB = measure(A), measure(B)
    threshold = lA.lower + lB.lower + min(lA.lower, lB.lower)
    # strict inequality, so equality up to rounding is refused
    if not lAB.upper < threshold * (1 - 1e-12):
        raise HypothesisRefused("lambda(A+B) is not below lambda(A)+lambda(B)+min",
                                margin=threshold - lAB.upper)
    I, J = hull(A), hull(B)
    tol = lAB.width + lA.width + lB.width + 1e-9
    lenI, lenJ = I[1] - I[0], J[1] - J[0]
    checks = {
        "I_bound": lenI <= lAB.value - lB.value + tol,
        "J_bound": lenJ <= lAB.value - lA.value + tol,
        "I_slack": lAB.value - lB.value - lenI,
        "J_slack": lAB.value - lA.value - lenJ,
        "margin": threshold - lAB.upper,
    }
    return IntervalRecovery(I, J, lenI - lA.value, lenJ - lB.value, "exact" if
                            max(lenI - lA.value, lenJ - lB.value) <= tol else "near", checks)


def _cylinder_measure(q: QuotientMap, iv: tuple) -> float:
    return iv[1] - iv[0]


def inverse_kemperman(q: QuotientMap, A: GridSet, B: GridSet) -> IntervalRecovery:
    """Recover intervals I, J with A in chi^-1(I), B in chi^-1(J).

    Exact case: zero discrepancy and both sets are full cylinders.  Near case:
    0 < d < min(mu(A), mu(B)) / 20 with both excesses below 100 d.
    """
    G = q.total
    if not G.unimodular:
        raise NonUnimodularError(f"{G.name} is not unimodular")
    if len(q.base_axes) != 1:
        raise ValueError("inverse Kemperman recovery needs a cylinder over R")
    out, inn = product_pair(A, B)
    nuAB, muAB = bracket(out, inn, "right"), bracket(out, inn, "left")
    nuA, muB = measure(A, "right"), measure(B, "left")
    lhs = math.sqrt(nuA.lower / nuAB.upper) + math.sqrt(muB.lower / muAB.upper)
    if not lhs > 1:
        raise HypothesisRefused("square-root expansion hypothesis fails", margin=lhs - 1)
    d = discrepancy(A, B)
    mA, mB = measure(A), measure(B)
    tol = d.width + 1e-9
    pa, pb = fiber_profile(q, A), fiber_profile(q, B)
    I, J = hull(superlevel(pa, 0)), hull(superlevel(pb, 0))
    exI = _cylinder_measure(q, I) - mA.value
    exJ = _cylinder_measure(q, J) - mB.value
    guard = NEAR_CONSTANT * min(mA.value, mB.value)
    checks = {"hypothesis_lhs": lhs, "discrepancy": d.value, "guard": guard,
              "guard_margin": guard - d.value}
    if abs(d.value) <= tol:
        eq = equality_domination_check(q, A, B, n=1)
        base = freiman_3k4(eq.A_base, eq.B_base) if eq.A_base is not None else None
        ok = (eq.status == "equality verified"
              and A.within_layer(q.preimage(eq.A_base, A.res), 1)
              and B.within_layer(q.preimage(eq.B_base, B.res), 1)
              and exI <= tol + _layer(A) and exJ <= tol + _layer(B))
        checks.update({"domination": eq.status, "preimage_ok": ok,
                       "base_I_bound": bool(base and base.checks["I_bound"])})
        return IntervalRecovery(I, J, exI, exJ, "exact" if ok else "exact-failed", checks)
    if 0 < d.value < guard:
        ad = almost_domination_check(q, A, B)
        checks["domination"] = ad.status
        if ad.A_base is not None:
            try:
                base = freiman_3k4(ad.A_base, ad.B_base)
                checks["inner_I"] = list(base.I)
                checks["inner_J"] = list(base.J)
            except HypothesisRefused as err:
                checks["base_refused_margin"] = err.margin
        bound = EXCESS_FACTOR * d.value
        checks["excess_bound"] = bound
        checks["excess_ok"] = exI < bound + tol and exJ < bound + tol
        return IntervalRecovery(I, J, exI, exJ, "near", checks)
    return IntervalRecovery(I, J, exI, exJ, "outside recovery range", checks)


def _layer(A: GridSet) -> float:
    """Measure of one boundary cell layer of A."""
    return measure(A.dilate(1) - A).value


def verify_progression_cover(A: GridSet, cert: ProgressionCertificate, q: QuotientMap | None = None) -> bool:
    """True iff the projection of A lies in I + P, cell by cell."""
    ivs = cert.intervals()
    base = superlevel(fiber_profile(q, A), 0) if q is not None else A
    _check_line(base)
    lo = base.lower_corners()[:, 0]
    hi = lo + base.h[0]
    starts = np.array([a for a, _ in ivs])
    ends = np.array([b for _, b in ivs])
    k = np.searchsorted(starts, lo + 1e-12, side="right") - 1
    ok = (k >= 0) & (hi <= ends[np.clip(k, 0, None)] + 1e-12)
    return bool(ok.all())
