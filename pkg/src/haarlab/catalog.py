"""Invariant checks for catalog group models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import bracket, box_set, inverse_pair, measure, translate
from .groups import GroupModel, get_group


@dataclass(frozen=True)
class Violation:
    invariant: str
    witness: tuple
    detail: str = ""


@dataclass
class CatalogReport:
    group: str
    bm_bracket: tuple
    violations: list = field(default_factory=list)
    checked: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations


def random_points(G: GroupModel, rng, n, scale=1.0):
    pts = rng.uniform(-scale, scale, size=(n, G.dim))
    return G.reduce(pts)


def random_box(G: GroupModel, rng, res, side=(0.25, 0.5), spread=1.0):
    """A grid-aligned box inside [-spread, spread] on every axis."""
    lo = np.empty(G.dim)
    hi = np.empty(G.dim)
    for ax in range(G.dim):
        w = rng.uniform(*side)
        a = rng.uniform(-spread, spread - w)
        if ax in G.circle_axes:
            a = a % 1.0
        lo[ax] = np.floor(a * res) / res
        hi[ax] = lo[ax] + max(1, round(w * res)) / res
    return lo, hi


def _overlap(a, b, tol=1e-12):
    lo = max(a[0], b[0])
    hi = min(a[1], b[1])
    return lo <= hi + tol * max(1.0, abs(hi))


def catalog_check(G: GroupModel | str, *, seed: int = 0, samples: int = 20,
                  res: int = 16, law_samples: int = 200) -> CatalogReport:
    """Verify the algebraic and measure invariants of a group model.

    Measure identities are checked as bracket overlap: each side is enclosed
    in a sound interval and the two intervals must meet.
    """
    if isinstance(G, str):
        G = get_group(G)
    rng = np.random.default_rng(seed)
    report = CatalogReport(G.name, G.bm_bracket())
    bad = report.violations

    if G.ndim < 3 * G.hdim:
        bad.append(Violation("n >= 3h", (G.ndim, G.hdim),
                             f"ndim {G.ndim} < 3 * hdim {G.hdim}"))

    e = G.identity
    x = random_points(G, rng, law_samples)
    y = random_points(G, rng, law_samples)
    z = random_points(G, rng, law_samples)
    E = np.broadcast_to(e, x.shape)

    def dist(p, q):
        d = np.abs(G.reduce(p) - G.reduce(q))
        for ax in G.circle_axes:
            d[:, ax] = np.minimum(d[:, ax], 1.0 - d[:, ax])
        return d.max(axis=1)

    checks = {
        "left identity": dist(G.law(E, x), x),
        "right identity": dist(G.law(x, E), x),
        "inverse": dist(G.law(x, G.inv(x)), E),
        "associativity": dist(G.law(G.law(x, y), z), G.law(x, G.law(y, z))),
    }
    for name, d in checks.items():
        report.checked[name] = float(d.max())
        i = int(np.argmax(d))
        if d[i] > 1e-9:
            bad.append(Violation(name, tuple(x[i]), f"error {d[i]:.3g}"))

    mod = G.modular(x)
    is_one = bool(np.allclose(mod, 1.0, rtol=0, atol=1e-12))
    if is_one != G.unimodular:
        i = int(np.argmax(np.abs(mod - 1.0)))
        bad.append(Violation("unimodular flag", tuple(x[i]),
                             f"flag {G.unimodular}, modular {mod[i]:.6g}"))

    worst_scale = worst_inv = 0.0
    for _ in range(samples):
        lo, hi = random_box(G, rng, res)
        X = box_set(G, res, lo, hi)
        g = random_points(G, rng, 1)[0]
        delta = float(G.modular(g))
        mX = measure(X, "left")
        nX = measure(X, "right")
        out, inn = translate(X, g, side="right")
        mXg = bracket(out, inn, "left")
        if not _overlap(tuple(mXg), (delta * mX.lower, delta * mX.upper)):
            bad.append(Violation("mu(Xx) = modular(x) mu(X)", tuple(g),
                                 f"{tuple(mXg)} vs {delta * mX.lower, delta * mX.upper}"))
        out, inn = translate(X, g, side="left")
        ngX = bracket(out, inn, "right")
        if not _overlap(tuple(ngX), (nX.lower / delta, nX.upper / delta)):
            bad.append(Violation("nu(xX) = nu(X) / modular(x)", tuple(g),
                                 f"{tuple(ngX)} vs {nX.lower / delta, nX.upper / delta}"))
        worst_scale = max(worst_scale, abs(mXg.value - delta * mX.value))
        out, inn = inverse_pair(X)
        mInv = bracket(out, inn, "left")
        if not _overlap(tuple(mInv), tuple(nX)):
            bad.append(Violation("nu(X) = mu(X^-1)", tuple(lo),
                                 f"{tuple(mInv)} vs {tuple(nX)}"))
        worst_inv = max(worst_inv, abs(mInv.value - nX.value))
    report.checked["translation scaling"] = worst_scale
    report.checked["inverse measure"] = worst_inv
    return report
