"""Fiber-length functions over the torus factor of cylinder groups R^d x T^k."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisRefused, NonUnimodularError
from .grids import GridSet, bracket, measure, product_pair
from .groups import EuclideanTorus, GroupModel, get_group
from .metrics import discrepancy

LADDER_LEVELS = 64
LAYER_LEVELS = 256


@dataclass(frozen=True)
class QuotientMap:
    total: GroupModel
    base: GroupModel
    base_axes: tuple
    fiber_axes: tuple

    @property
    def fiber_measure_total(self) -> float:
        return 1.0

    def project(self, x) -> np.ndarray:
        return np.asarray(x, float)[..., list(self.base_axes)]

    def base_res(self, A: GridSet) -> tuple:
        return tuple(A.res[a] for a in self.base_axes)

    def preimage(self, X: GridSet, res) -> GridSet:
        """Full-fiber cylinder over a base set, on the total group's grid."""
        res = tuple(res)
        shape = list(X.cells.shape) + [res[a] for a in self.fiber_axes]
        arr = np.broadcast_to(X.cells.reshape(X.cells.shape + (1,) * len(self.fiber_axes)), shape)
        order = list(self.base_axes) + list(self.fiber_axes)
        arr = np.transpose(arr, np.argsort(order))
        off = [0] * self.total.dim
        for i, a in enumerate(self.base_axes):
            off[a] = X.offset[i]
        return GridSet(self.total, res, off, np.ascontiguousarray(arr))


def quotient_map(G: GroupModel | str) -> QuotientMap:
    """Projection of R^d x T^k onto R^d; other groups are refused."""
    if isinstance(G, str):
        G = get_group(G)
    if not isinstance(G, EuclideanTorus) or not G.circle_axes or G.compact:
        raise ValueError(f"{G.name} is not a cylinder group R^d x T^k")
    base_axes = tuple(a for a in range(G.dim) if a not in G.circle_axes)
    fiber_axes = tuple(sorted(G.circle_axes))
    d = len(base_axes)
    base = get_group("R" if d == 1 else f"R^{d}")
    return QuotientMap(G, base, base_axes, fiber_axes)


@dataclass
class FiberProfile:
    """Normalized fiber measure of a set per base cell."""

    values: np.ndarray
    offset: tuple
    res: tuple
    base: GroupModel
    set_ref: GridSet | None = field(default=None, repr=False)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(1.0 / np.asarray(self.res, float)))

    @property
    def alpha(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def integral(self) -> float:
        return float(self.values.sum()) * self.cell_volume

    def to_record(self) -> dict:
        return {"base": self.base.name, "res": list(self.res), "offset": list(self.offset),
                "shape": list(self.values.shape), "values": self.values.ravel().tolist()}


def fiber_profile(q: QuotientMap, A: GridSet) -> FiberProfile:
    if A.group is not q.total:
        raise ValueError("set does not live on the quotient's total group")
    n_fib = int(np.prod([A.res[a] for a in q.fiber_axes]))
    vals = A.cells.sum(axis=q.fiber_axes) / n_fib
    off = tuple(A.offset[a] for a in q.base_axes)
    return FiberProfile(vals, off, q.base_res(A), q.base, A)


def superlevel(p: FiberProfile, t: float) -> GridSet:
    """Base cells with profile >= t (strictly positive at t = 0)."""
    if t < 0:
        raise ValueError("level must be nonnegative")
    cells = p.values > 0 if t == 0 else p.values >= t - 1e-12
    return GridSet(p.base, p.res, p.offset, cells)


def layer_cake(p: FiberProfile, levels: int = LAYER_LEVELS, power: float = 1.0) -> float:
    """Midpoint-rule integral of mu(L+(t)) over t in (0, alpha].

    With ``power`` n the integrand is n s^(n-1) mu(L+(s^n)), the same
    integral written in the variable s = t^(1/n).
    """
    a = p.alpha
    if a == 0:
        return 0.0
    vals = p.values.ravel()
    vol = p.cell_volume
    if power == 1.0:
        t = (np.arange(levels) + 0.5) * a / levels
        sizes = (vals[None, :] >= t[:, None]).sum(axis=1) * vol
        return float(sizes.sum() * a / levels)
    top = a ** (1.0 / power)
    s = (np.arange(levels) + 0.5) * top / levels
    sizes = (vals[None, :] >= (s ** power)[:, None]).sum(axis=1) * vol
    return float(np.sum(power * s ** (power - 1) * sizes) * top / levels)


def superlevel_product_inclusion(q: QuotientMap, A: GridSet, B: GridSet, t1: float, t2: float) -> bool:
    """Is L+_A(t1) L+_B(t2) inside L+_AB(max(t1, t2)), cellwise?

    The left side uses the inner base product and the right side the fiber
    profile of the outer product, so a failure is a genuine violation.
    """
    pa, pb = fiber_profile(q, A), fiber_profile(q, B)
    LA, LB = superlevel(pa, t1), superlevel(pb, t2)
    if LA.is_empty() or LB.is_empty():
        return True
    _, inner = product_pair(LA, LB)
    outer_AB, _ = product_pair(A, B)
    return inner.issubset(superlevel(fiber_profile(q, outer_AB), max(t1, t2)))


# ---------------------------------------------------------------------------
# domination checks


@dataclass
class DominationVerdict:
    status: str
    A_base: GridSet | None = None
    B_base: GridSet | None = None
    gap: float = float("nan")
    tol: float = 0.0
    details: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {"status": self.status, "gap": self.gap, "tol": self.tol}
        rec.update({k: v for k, v in self.details.items() if isinstance(v, (int, float, str, bool))})
        return rec


def _root_gap(mAB, mA, mB, n):
    gap = mAB.value ** (1 / n) - mA.value ** (1 / n) - mB.value ** (1 / n)
    tol = sum(m.upper ** (1 / n) - m.lower ** (1 / n) for m in (mAB, mA, mB))
    return gap, tol + 1e-9


def equality_domination_check(q: QuotientMap, A: GridSet, B: GridSet, n: int | None = None) -> DominationVerdict:
    G = q.total
    if not G.unimodular:
        raise NonUnimodularError(f"{G.name} is not unimodular")
    lo, hi = G.bm_bracket()
    if lo != hi:
        return DominationVerdict("disabled", details={"reason": "BM bracket is not a single value"})
    n = G.ndim if n is None else n
    out, inn = product_pair(A, B)
    mAB = bracket(out, inn)
    mA, mB = measure(A), measure(B)
    gap, tol = _root_gap(mAB, mA, mB, n)
    if abs(gap) > tol:
        return DominationVerdict("hypothesis not met", gap=gap, tol=tol)
    Ab = superlevel(fiber_profile(q, A), 0)
    Bb = superlevel(fiber_profile(q, B), 0)
    a_ok = A.within_layer(q.preimage(Ab, A.res), 1)
    b_ok = B.within_layer(q.preimage(Bb, B.res), 1)
    bo, bi = product_pair(Ab, Bb)
    bgap, btol = _root_gap(bracket(bo, bi), measure(Ab), measure(Bb), n)
    ok = a_ok and b_ok and abs(bgap) <= btol + tol
    return DominationVerdict("equality verified" if ok else "equality failed", Ab, Bb, gap, tol,
                             {"A_is_cylinder": a_ok, "B_is_cylinder": b_ok, "base_gap": bgap})


def _ladder_symdiff(p: FiberProfile, levels: np.ndarray) -> np.ndarray:
    """mu(A symdiff preimage(L+(t))) for each level t."""
    v = p.values.ravel()
    inside = v[None, :] >= levels[:, None] - 1e-12
    per = np.where(inside, 1.0 - v[None, :], v[None, :])
    return per.sum(axis=1) * p.cell_volume


def almost_domination_check(q: QuotientMap, A: GridSet, B: GridSet,
                            levels: int = LADDER_LEVELS, max_pairs: int = 64) -> DominationVerdict:
    """Search superlevel witnesses A', B' for the quotient domination bounds.

    Pairs are tried in order of total symmetric difference; the discrepancy
    of the base pair is evaluated lazily until both bounds hold.
    """
    G = q.total
    if not G.unimodular:
        raise NonUnimodularError(f"{G.name} is not unimodular")
    d = discrepancy(A, B)
    mA, mB = measure(A), measure(B)
    limit = min(mA.lower, mB.lower)
    if d.value >= limit:
        raise HypothesisRefused("discrepancy is not below min(mu(A), mu(B))", margin=limit - d.value)
    pa, pb = fiber_profile(q, A), fiber_profile(q, B)
    ta = pa.alpha * np.arange(1, levels + 1) / levels
    tb = pb.alpha * np.arange(1, levels + 1) / levels
    sa = _ladder_symdiff(pa, ta)
    sb = _ladder_symdiff(pb, tb)
    order = np.argsort((sa[:, None] + sb[None, :]).ravel(), kind="stable")
    tol = d.width + 1e-9
    dd = max(d.value, 0.0)
    best = None
    for k in order[:max_pairs]:
        i, j = divmod(int(k), levels)
        Ab, Bb = superlevel(pa, ta[i]), superlevel(pb, tb[j])
        if Ab.is_empty() or Bb.is_empty():
            continue
        db = discrepancy(Ab, Bb)
        rec = {"t_A": float(ta[i]), "t_B": float(tb[j]), "symdiff_A": float(sa[i]),
               "symdiff_B": float(sb[j]), "base_discrepancy": db.value, "discrepancy": d.value}
        ok = (sa[i] <= 3 * dd + tol and sb[j] <= 3 * dd + tol and db.value <= 7 * dd + tol + db.width)
        if best is None or ok:
            best = (Ab, Bb, rec, ok)
        if ok:
            break
    if best is None:
        return DominationVerdict("no witness", gap=d.value, tol=tol)
    Ab, Bb, rec, ok = best
    return DominationVerdict("witness found" if ok else "no witness", Ab, Bb, d.value, tol, rec)


@dataclass
class PushforwardReport:
    K: float
    alpha: float
    N: float
    mu_pA: float
    mu_pA1: float
    mu_pA2: float
    mu_pA1sq: float
    mu_pAsq: float
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def pushforward_expansion_check(q: QuotientMap, A: GridSet, K: float | None = None) -> PushforwardReport:
    """Threshold split of the projection and the resulting growth bounds."""
    G = q.total
    if not G.unimodular:
        raise NonUnimodularError(f"{G.name} is not unimodular")
    out, inn = product_pair(A, A)
    mA = measure(A)
    K_meas = bracket(out, inn).upper / mA.lower
    if K is None:
        K = K_meas
    elif K < K_meas:
        raise HypothesisRefused("mu(A^2) <= K mu(A) fails", margin=K - K_meas)
    p = fiber_profile(q, A)
    alpha = p.alpha
    N = 2 * K
    pA = superlevel(p, 0)
    pA1 = superlevel(p, alpha / N)
    pA2 = pA - pA1
    m = lambda S: measure(S).value  # noqa: E731 - base sets are Lebesgue-exact
    pA1sq = product_pair(pA1, pA1)[0]
    pAsq = product_pair(pA, pA)[0]
    checks = {
        "low_part": m(pA2) <= 2 * (K - 1) * m(pA1) + 1e-9,
        "high_part_growth": m(pA1sq) <= K * (2 * K - 1) * m(pA1) + 1e-9,
        "sixth_power": m(pAsq) <= 32 * K ** 6 * m(pA) + 1e-9,
        "cubic_power": m(pAsq) <= 32 * K ** 3 * m(pA) + 1e-9,
    }
    return PushforwardReport(K, alpha, N, m(pA), m(pA1), m(pA2), m(pA1sq), m(pAsq), checks)
