"""Convexity test and the cutting loop that builds a convex inner approximation.

Each non-affine piece of the set is checked for its minimum boundary
curvature.  Where that minimum is certified negative, an affine cut tangent
to the piece at the minimizer removes the negatively curved neighbourhood,
and the same piece is checked again with the cut in place.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curvature import build_curvature_problem
from .extract import CertifiedOptimum, Status, certify
from .polycore import Polynomial
from .semialg import SemialgebraicSet

log = logging.getLogger(__name__)

POLICIES = ("all", "first", "max-gradient")


def separating_halfspace(p: Polynomial, x_star, eps: float = 0.0) -> Polynomial:
    """Affine cut ``g(x*).(x - x*) / |g(x*)| + eps`` where g is the gradient of p.

    The cut vanishes on the tangent line at x* (eps = 0) and is positive on
    the side the gradient points to.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x_star = np.asarray(x_star, dtype=float)
    g = np.array([q.eval(x_star) for q in p.gradient()])
    nrm = np.linalg.norm(g)
    if not nrm > 1e-12:
        raise ValueError(f"gradient vanishes at {x_star.tolist()}; no separating cut")
    g = g / nrm
    return Polynomial.affine(g, float(eps - g @ x_star))


class Convexity(enum.Enum):
    CONVEX = "convex"
    NONCONVEX = "nonconvex"
    INCONCLUSIVE = "inconclusive"


@dataclass
class ConvexityResult:
    verdict: Convexity
    pieces: dict[int, CertifiedOptimum] = field(default_factory=dict)
    witness: dict | None = None   # piece, x, y and curvature of a negatively curved point
    annotation: str = ""


def is_convex(S: SemialgebraicSet, max_order: int = 5, tol_curv: float = 1e-6,
              **certify_opts) -> ConvexityResult:
    """Decide convexity from the minimum curvature of every non-affine piece.

    A bound that is only a lower bound still proves convexity when it is
    nonnegative.  A negative lower bound without a certificate leaves the
    question open.
    """
    pieces: dict[int, CertifiedOptimum] = {}
    open_bounds = []
    for i, p in enumerate(S.ineqs):
        if p.degree <= 1:
            continue
        prob = build_curvature_problem(S, i)
        res = certify(prob, max(max_order, _kmin(prob)), **certify_opts)
        pieces[i] = res
        if res.status is Status.INFEASIBLE or res.bound >= -tol_curv:
            continue
        if res.status is Status.CERTIFIED:
            w = {"piece": i, "x": res.x_minimizers[0].tolist(), "y": res.y_minimizers[0].tolist(),
                 "curvature": res.bound}
            return ConvexityResult(Convexity.NONCONVEX, pieces, w)
        open_bounds.append((i, res.bound))
    if open_bounds:
        worst = min(b for _, b in open_bounds)
        note = ""
        if worst > -1e-2:
            note = f"numerically convex: curvature lower bound {worst:.3e} is close to zero"
        return ConvexityResult(Convexity.INCONCLUSIVE, pieces, annotation=note)
    return ConvexityResult(Convexity.CONVEX, pieces)


def _kmin(prob) -> int:
    from .moment import min_relaxation_order
    return min_relaxation_order(prob)


class FinalStatus(enum.Enum):
    CONVEX_CERTIFIED = "convex_certified"
    MAX_ITERS = "max_iters"
    INCONCLUSIVE = "inconclusive"


@dataclass
class LogEntry:
    piece: int
    order: int | None
    bound: float
    status: int
    n_constraints: int
    minimizers: list[list[float]] = field(default_factory=list)
    chosen: list[list[float]] = field(default_factory=list)
    cuts: list[dict] = field(default_factory=list)
    note: str = ""
    # bound of the re-check with the piece's own cuts pushed inward, and the push used
    margin_bound: float | None = None
    margin: float | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class InnerApproximation:
    base: SemialgebraicSet
    cuts: list[Polynomial]
    log: list[LogEntry]
    final_status: FinalStatus

    @property
    def set(self) -> SemialgebraicSet:
        """The approximation: base polynomials followed by the cuts."""
        return self.base.add(*self.cuts)

    def log_json(self) -> list[dict]:
        return [e.to_json() for e in self.log]

    def save(self, sbar_path, log_path=None) -> None:
        self.set.save(sbar_path)
        if log_path is not None:
            Path(log_path).write_text(json.dumps({"final_status": self.final_status.value,
                                                  "iterations": self.log_json()}, indent=2))


def _choose(minimizers, p: Polynomial, policy: str):
    # distinct x points only; y sign copies were merged already
    xs: list[np.ndarray] = []
    for x in minimizers:
        if not any(np.linalg.norm(x - q) <= 1e-6 * (1 + np.linalg.norm(q)) for q in xs):
            xs.append(np.asarray(x))
    if policy == "all":
        return xs
    if policy == "first":
        return xs[:1]
    if policy == "max-gradient":
        norms = [np.linalg.norm([g.eval(x) for g in p.gradient()]) for x in xs]
        return [xs[int(np.argmax(norms))]]
    raise ValueError(f"unknown minimizer policy {policy!r}; choose from {POLICIES}")


def _is_contact(x, points, tol: float = 1e-4) -> bool:
    return any(np.linalg.norm(x - q) <= tol * (1 + np.linalg.norm(q)) for q in points)


def inner_approximation(S: SemialgebraicSet, eps: float = 1e-6, max_order: int = 5,
                        max_cuts: int = 20, minimizer_policy: str = "all",
                        tol_curv: float = 1e-6, contact_margins=(1e-3, 1e-2),
                        **certify_opts) -> InnerApproximation:
    """Append affine cuts until every non-affine piece has nonnegative curvature.

    Pieces are visited in the given order.  Cuts join the constraint list
    (so they constrain later curvature problems) but, being affine, are never
    visited themselves.

    A tangent cut with small eps still touches its piece at the point it was
    built from, and that point keeps its negative curvature.  When every
    minimizer of a re-check is such a contact point, the piece is checked
    once more with those cuts pushed inward by each of ``contact_margins`` in
    turn (for the curvature problem only); the first nonnegative bound
    settles the piece.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if max_cuts < 1:
        raise ValueError("max_cuts must be at least 1")
    if minimizer_policy not in POLICIES:
        raise ValueError(f"unknown minimizer policy {minimizer_policy!r}; choose from {POLICIES}")
    cuts: list[Polynomial] = []
    origins: list[tuple[int, np.ndarray]] = []   # (piece, generating point) per cut
    cut_values: dict[int, float] = {}            # piece -> curvature at its latest cut points
    entries: list[LogEntry] = []
    inconclusive = False
    i = 0
    while i < S.m + len(cuts):
        current = S.add(*cuts)
        p = current.ineqs[i]
        if p.degree <= 1:
            i += 1
            continue
        prob = build_curvature_problem(current, i)
        res = certify(prob, max(max_order, _kmin(prob)), **certify_opts)
        entry = LogEntry(i, res.order_used, float(res.bound), res.status.value, current.m,
                         [x.tolist() for x in res.x_minimizers])
        entries.append(entry)
        log.info("piece %d with %d constraints: status %d bound %.6g", i, current.m,
                 res.status.value, res.bound)
        if res.status is Status.INFEASIBLE:
            entry.note = "curvature problem infeasible; piece inactive"
            i += 1
            continue
        if res.bound >= -tol_curv:
            entry.note = "nonnegative curvature"
            i += 1
            continue
        own = [x for (j, x) in origins if j == i]
        # the re-check only found the points the cuts were built at (or, without a
        # certificate, stalled at the same value)
        stuck = (res.status is Status.BOUND_ONLY and i in cut_values
                 and abs(res.bound - cut_values[i]) <= 1e-4 * (1 + abs(cut_values[i])))
        contact = res.status is Status.CERTIFIED and all(_is_contact(x, own) for x in res.x_minimizers)
        if own and (contact or stuck):
            ok, note, entry.margin, entry.margin_bound = _check_away_from_contacts(
                S, cuts, origins, i, contact_margins, max_order, tol_curv, certify_opts)
            entry.note = note
            if not ok:
                inconclusive = True
            i += 1
            continue
        if res.status is Status.BOUND_ONLY:
            entry.note = "negative lower bound without certificate"
            inconclusive = True
            i += 1
            continue
        cut_values[i] = res.bound
        chosen = _choose(res.x_minimizers, p, minimizer_policy)
        if len(cuts) + len(chosen) > max_cuts:
            entry.note = "cut budget exhausted"
            return InnerApproximation(S, cuts, entries, FinalStatus.MAX_ITERS)
        for x in chosen:
            c = separating_halfspace(p, x, eps)
            cuts.append(c)
            origins.append((i, np.asarray(x)))
            entry.chosen.append(x.tolist())
            entry.cuts.append(c.to_json())
        entry.note = f"{len(chosen)} cut(s) added; re-checking piece {i}"
    status = FinalStatus.INCONCLUSIVE if inconclusive else FinalStatus.CONVEX_CERTIFIED
    return InnerApproximation(S, cuts, entries, status)


def _check_away_from_contacts(S, cuts, origins, i, margins, max_order, tol_curv, certify_opts):
    """Curvature of piece i with its own cuts shifted inward by a margin.

    Returns (settled, note, margin, bound); bound is None when the shifted
    problem is infeasible.
    """
    notes = []
    for delta in margins:
        shifted = [c + delta if j == i else c for c, (j, _) in zip(cuts, origins)]
        prob = build_curvature_problem(S.add(*shifted), i)
        res = certify(prob, max(max_order, _kmin(prob)), **certify_opts)
        if res.status is Status.INFEASIBLE:
            return True, f"minimizers are cut contact points; piece inactive beyond margin {delta:g}", delta, None
        if res.bound >= -tol_curv:
            kind = "certified" if res.status is Status.CERTIFIED else "lower bound"
            return True, (f"minimizers are cut contact points; curvature {kind} {res.bound:.6g} "
                          f"beyond margin {delta:g}"), delta, float(res.bound)
        notes.append(f"{delta:g}: {res.bound:.3g}")
    return (False, "minimizers are cut contact points; negative bounds beyond margins " + ", ".join(notes),
            delta, float(res.bound))
