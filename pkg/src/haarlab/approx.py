"""Ruzsa coverings, approximate measure stabilizers and approximate groups."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisRefused, SoundnessError, ZeroMeasureError
from .grids import (GridSet, MeasureEstimate, bracket, inverse_pair, measure,
                    product_pair, translate)
from .groups import element
from .metrics import Interval, ruzsa_distance_inv


@dataclass
class CoveringCertificate:
    direction: str
    omega: list
    K_claimed: float
    verified: bool

    def to_record(self) -> dict:
        return {
            "kind": "covering",
            "direction": self.direction,
            "omega": [list(w.coords) for w in self.omega],
            "K_claimed": self.K_claimed,
            "verified": self.verified,
        }


@dataclass
class StabilizerResult:
    """Approximate stabilizer.

    ``S`` holds grid points whose membership is certain under the measure
    brackets; ``S_outer`` those whose membership cannot be ruled out.
    """

    S: GridSet
    epsilon: float
    S_outer: GridSet
    symmetric: bool
    overlap: dict = field(default_factory=dict, repr=False)


@dataclass
class ApproxGroupCertificate:
    H: GridSet
    K_param: float
    omega_witness: list
    symmetric: bool
    contains_identity: bool

    @property
    def K_meas(self) -> int:
        return len(self.omega_witness)

    def to_record(self) -> dict:
        return {
            "kind": "approximate-group",
            "K_param": self.K_param,
            "K_meas": self.K_meas,
            "omega": [list(w.coords) for w in self.omega_witness],
            "symmetric": self.symmetric,
            "contains_identity": self.contains_identity,
        }


# ---------------------------------------------------------------------------
# small helpers


def contains_closed(A: GridSet, x) -> bool:
    """Does the closed cell union contain the point x?"""
    x = np.asarray(x, float).reshape(1, A.dim)
    return bool(A.box_touches(x - 1e-7, x + 1e-7)[0])


def _vertices(A: GridSet) -> np.ndarray:
    lo = A.lower_corners()
    h = A.h
    corners = [lo + np.asarray(bits) * h for bits in itertools.product((0, 1), repeat=A.dim)]
    return np.unique(np.concatenate(corners), axis=0)


def max_modular_vertex(A: GridSet) -> np.ndarray:
    """Grid vertex of A with the largest modular value (lexicographic ties)."""
    v = _vertices(A)
    d = A.group.modular(v)
    best = np.flatnonzero(d >= d.max() * (1 - 1e-12))
    return v[best[0]]


def _right_overlap(A: GridSet, g):
    """Brackets of nu(A cap Ag) from inner/outer images of Ag."""
    out, inn = translate(A, g, "right")
    lo = measure(A & inn, "right")
    hi = measure(A & out, "right")
    return lo.lower, hi.upper, 0.5 * (lo.value + hi.value)


# ---------------------------------------------------------------------------
# Ruzsa covering


def _greedy_pack(candidates, images):
    """Greedy maximal family of pairwise cell-disjoint images."""
    chosen = []
    occupied = None
    for c in candidates:
        img = images(c)
        if occupied is not None and not (img & occupied).is_empty():
            continue
        chosen.append(c)
        occupied = img if occupied is None else occupied | img
    return chosen


def ruzsa_cover(A: GridSet, B: GridSet, direction: str = "left") -> CoveringCertificate:
    """Greedy covering certificate.

    ``left``: B inside A^-1 A Omega with Omega in B, K = nu(AB)/nu(A).
    ``right``: A inside Omega B B^-1 with Omega in A, K = mu(AB)/mu(B).
    Packed translates are pairwise cell-disjoint, so by invariance of the
    relevant Haar measure their number is at most K.
    """
    G = A.group
    out, inn = product_pair(A, B)
    if direction == "left":
        num = bracket(out, inn, "right").upper
        den = measure(A, "right").lower
        cands = B.centers()
        pack = _greedy_pack(cands, lambda y: translate(A, y, "right")[0])
        Ainv, _ = inverse_pair(A)
        core, _ = product_pair(Ainv, A)
        target = B
        cover_side = "right"
    elif direction == "right":
        num = bracket(out, inn, "left").upper
        den = measure(B, "left").lower
        cands = A.centers()
        pack = _greedy_pack(cands, lambda x: translate(B, x, "left")[0])
        core, _ = product_pair(B, B, invert_b=True)
        target = A
        cover_side = "left"
    else:
        raise ValueError("direction must be 'left' or 'right'")
    if den <= 0:
        raise ZeroMeasureError("covering needs positive measure")
    K = num / den
    omega = [element(G, w) for w in pack]
    cert = CoveringCertificate(direction, omega, K, False)
    if len(omega) > np.floor(K + 1e-9):
        raise SoundnessError(f"packing of size {len(omega)} exceeds K = {K:.6g}")
    cert.verified = _covered(target, core, pack, cover_side)
    if not cert.verified:
        raise SoundnessError("greedy covering failed cellwise containment")
    return cert


def _covered(target: GridSet, core: GridSet, omega, side: str) -> bool:
    union = None
    for w in omega:
        img = translate(core, w, side)[0]
        union = img if union is None else union | img
    return union is not None and target.issubset(union)


def verify_covering(cert: CoveringCertificate, A: GridSet, B: GridSet) -> bool:
    """Re-check a covering certificate against its sets."""
    pts = [np.asarray(w.coords) for w in cert.omega]
    if len(pts) > np.floor(cert.K_claimed + 1e-9):
        return False
    if cert.direction == "left":
        Ainv, _ = inverse_pair(A)
        core, _ = product_pair(Ainv, A)
        return _covered(B, core, pts, "right")
    core, _ = product_pair(B, B, invert_b=True)
    return _covered(A, core, pts, "left")


# ---------------------------------------------------------------------------
# approximate stabilizer


def approximate_stabilizer(A: GridSet, epsilon: float) -> StabilizerResult:
    """Grid points g with nu(A minus Ag) < epsilon.

    Candidates are cell centers of A^-1 A, outside of which A and Ag are
    disjoint.  A cell joins ``S`` when the upper bound of nu(A minus Ag) is
    below epsilon and ``S_outer`` when the lower bound is.
    """
    G = A.group
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    nuA = measure(A, "right")
    if nuA.upper <= 0:
        raise ZeroMeasureError("stabilizer of a null set")
    if epsilon >= nuA.lower and not G.compact:
        raise HypothesisRefused(
            "epsilon >= nu(A): the stabilizer is not precompact",
            margin=nuA.lower - epsilon)
    Ainv, _ = inverse_pair(A)
    cand_set, _ = product_pair(Ainv, A)
    cells = cand_set.indices()
    centers = (cells + 0.5) * A.h
    sure = np.zeros(len(cells), bool)
    maybe = np.zeros(len(cells), bool)
    overlap = {}
    for i, g in enumerate(centers):
        lo, hi, mid = _right_overlap(A, g)
        overlap[tuple(cells[i])] = (lo, hi, mid)
        sure[i] = nuA.upper - lo < epsilon
        maybe[i] = nuA.lower - hi < epsilon
    ident = np.floor(G.identity * np.asarray(A.res) + 1e-9).astype(np.int64)[None, :]
    S = GridSet.from_indices(G, A.res, np.concatenate([cells[sure], ident]))
    S_out = GridSet.from_indices(G, A.res, np.concatenate([cells[maybe], ident]))
    Sinv, _ = inverse_pair(S)
    return StabilizerResult(S, epsilon, S_out, S.within_layer(Sinv, 1), overlap)


# ---------------------------------------------------------------------------
# growth bounds


@dataclass
class Prop45Report:
    K: float
    epsilon: float
    nuS: MeasureEstimate
    muA: MeasureEstimate
    size_floor: float
    size_ok: bool
    energy_on_S: Interval
    energy_floor: float
    rows: list

    @property
    def passed(self) -> bool:
        return self.size_ok and all(r["holds"] for r in self.rows)


def normalize_left(A: GridSet):
    """(g1^-1 A, g1) with g1 the vertex of A of largest modular value."""
    g1 = max_modular_vertex(A)
    ginv = A.group.inv(g1[None, :])[0]
    if np.allclose(g1, 0):
        return A, g1
    return translate(A, ginv, "left")[0], g1


def normalize_right(B: GridSet):
    g2 = B.lower_corners()[0] if not B.is_empty() else B.group.identity
    ginv = B.group.inv(g2[None, :])[0]
    if np.allclose(g2, 0):
        return B, g2
    return translate(B, ginv, "right")[0], g2


def energy_on_stabilizer(A: GridSet, stab: StabilizerResult) -> Interval:
    """Integral over S of (1_{A^-1} * 1_A)^2 against nu.

    The convolution at x equals nu(A cap A x^-1); the integral is a midpoint
    sum over the cells of S with the overlap brackets carried through.
    """
    G = A.group
    S = stab.S
    val = lo = hi = 0.0
    for c in S.centers():
        xinv = G.inv(c[None, :])[0]
        f_lo, f_hi, f_mid = _right_overlap(A, xinv)
        w = float(G.density(c[None, :], "right")[0]) * S.cell_volume
        val += w * f_mid ** 2
        lo += w * f_lo ** 2
        hi += w * f_hi ** 2
    return Interval(val, lo, hi)


def prop45_check(A: GridSet, n_max: int = 2, *, K: float | None = None,
                 normalize: bool = True) -> Prop45Report:
    """Check nu(S) >= mu(A)/2K and nu(A S^n A^-1) <= 2^n K^(2n+1) mu(A).

    Upper-bound claims use the possible stabilizer ``S_outer`` and outer
    products; lower-bound claims use the certain stabilizer ``S``.
    """
    if not 1 <= n_max <= 5:
        raise ValueError("n_max must lie in 1..5")
    if normalize:
        A, _ = normalize_left(A)
    muA = measure(A, "left")
    nuA = measure(A, "right")
    out, inn = product_pair(A, A, invert_b=True)
    K_meas = bracket(out, inn, "right").upper / muA.lower
    if K is None:
        K = K_meas
    elif K < K_meas:
        raise HypothesisRefused(f"nu(AA^-1) <= K mu(A) fails for K={K}", margin=K - K_meas)
    eps = (2 * K - 1) * nuA.value / (2 * K)
    stab = approximate_stabilizer(A, eps)
    nuS = measure(stab.S, "right")
    floor = muA.upper / (2 * K)
    energy = energy_on_stabilizer(A, stab)
    e_floor = nuA.value ** 2 * muA.value / (2 * K)
    rows = []
    Sn = stab.S_outer
    for n in range(1, n_max + 1):
        if n > 1:
            Sn = product_pair(Sn, stab.S_outer)[0]
        left = product_pair(A, Sn)[0]
        full = product_pair(left, A, invert_b=True)[0]
        lhs = measure(full, "right").upper
        rhs = 2 ** n * K ** (2 * n + 1) * muA.lower
        rows.append({"n": n, "lhs": lhs, "bound": rhs, "holds": lhs <= rhs})
    return Prop45Report(K, eps, nuS, muA, floor, nuS.lower >= floor, energy, e_floor, rows)


# ---------------------------------------------------------------------------
# approximate-group pipeline


def _greedy_translate_cover(target: GridSet, piece: GridSet, side: str):
    """Cover target by translates of piece, sweeping uncovered cells in storage order.

    Each translate carries the first cell of piece onto the first uncovered
    cell, so the piece extends forward into what is still uncovered.
    """
    G = target.group
    y_inv = G.inv(piece.centers()[:1])
    omega = []
    remaining = target
    while not remaining.is_empty():
        c = remaining.centers()[:1]
        x = (G.law(c, y_inv) if side == "left" else G.law(y_inv, c))[0]
        nxt = remaining - translate(piece, x, side)[0]
        if nxt == remaining:
            raise SoundnessError("translate failed to cover its own center")
        omega.append(element(G, x))
        remaining = nxt
    return omega


def approx_group_certificate(H: GridSet, K_param: float) -> ApproxGroupCertificate:
    H2 = product_pair(H, H)[0]
    omega = _greedy_translate_cover(H2, H, "left")
    Hinv, _ = inverse_pair(H)
    return ApproxGroupCertificate(H, K_param, omega, H.within_layer(Hinv, 1),
                                  contains_closed(H, H.group.identity))


@dataclass
class PipelineReport:
    stabilizer: StabilizerResult
    approx_group: ApproxGroupCertificate
    cover_A: CoveringCertificate
    cover_B: CoveringCertificate
    K: float
    distance: Interval
    nuS_floor_ok: bool
    bounds: dict
    normalized: dict

    def as_tuple(self):
        return self.stabilizer, self.approx_group, self.cover_A, self.cover_B


def tao_pipeline(A: GridSet, B: GridSet) -> PipelineReport:
    """Extract an approximate group commensurable with A and B.

    K is 2^d(A, B^-1) at the upper end of its bracket; the stabilizer is
    taken at epsilon = (2K-1) nu(A) / 2K and H is the outer grid set of S^2
    joined with its own outer inverse.
    """
    G = A.group
    A1, g1 = normalize_left(A)
    B1, g2 = normalize_right(B)
    dist = ruzsa_distance_inv(A1, B1)
    K = 2.0 ** dist.upper
    nuA = measure(A1, "right")
    muA = measure(A1, "left")
    eps = (2 * K - 1) * nuA.value / (2 * K)
    stab = approximate_stabilizer(A1, eps)
    H = product_pair(stab.S, stab.S)[0]
    # inversion padding can leave S^2 a few layers short of symmetric
    H = H | inverse_pair(H)[0]
    cert = approx_group_certificate(H, 64 * K ** 12)
    cover_A = ruzsa_cover(A1, stab.S, "right")
    cover_B = ruzsa_cover(stab.S, B1, "left")
    nuS = measure(stab.S, "right")
    max_mod = float(G.modular(_vertices(A1)).max())
    normalized = {
        "g1": tuple(float(v) for v in g1), "g2": tuple(float(v) for v in g2),
        "identity_in_A": contains_closed(A1, G.identity),
        "identity_in_B": contains_closed(B1, G.identity),
        "max_modular_A": max_mod,
    }
    bounds = {
        "K_meas": cert.K_meas, "approx_bound": 64 * K ** 12,
        "omega_A": len(cover_A.omega), "omega_B": len(cover_B.omega),
        "cover_bound": 33 * K ** 12,
    }
    bounds["holds"] = (cert.K_meas <= bounds["approx_bound"]
                       and max(bounds["omega_A"], bounds["omega_B"]) <= bounds["cover_bound"])
    return PipelineReport(stab, cert, cover_A, cover_B, K, dist,
                          nuS.lower >= muA.upper / (2 * K), bounds, normalized)
