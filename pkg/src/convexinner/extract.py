"""Flatness test, minimizer extraction and the certification driver.

A relaxation is declared exact only when its moment matrix has a flat
truncation, the support points recovered from it are feasible, and their
objective values match the relaxation bound.  The last two checks are done
by plain re-substitution, so a wrong numerical rank decision can cost a
certificate but can never produce a false one.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .curvature import PolyOptProblem
from .moment import MomentBasis, build_relaxation, min_relaxation_order, moment_matrix
from .sdp import DEFAULT_MAX_ITERS, SdpStatus, solve_sdp

log = logging.getLogger(__name__)

# an SDP run that stopped this far from its tolerance still yields a usable bound
USABLE_ERROR = 1e-3
# relative singular-value cutoff for numerical rank; interior-point moment
# matrices keep residual eigenvalues near sqrt(gap), far above 1e-6
DEFAULT_RANK_TOL = 1e-3


class Status(enum.Enum):
    INFEASIBLE = -1
    BOUND_ONLY = 0
    CERTIFIED = 1


@dataclass
class OrderRecord:
    """Outcome of one relaxation order."""

    order: int
    status: Status
    bound: float
    sdp_status: str
    sdp_error: float
    rank_profile: list[int]
    flat_rank: int | None
    minimizers: list[np.ndarray] = field(default_factory=list)
    seconds: float = 0.0

    def to_json(self, prob: PolyOptProblem | None = None) -> dict:
        out = {
            "order": self.order,
            "status": self.status.value,
            "bound": self.bound,
            "sdp_status": self.sdp_status,
            "sdp_error": self.sdp_error,
            "rank_profile": self.rank_profile,
            "flat_rank": self.flat_rank,
            "seconds": round(self.seconds, 3),
        }
        out.update(_minimizer_json(self.minimizers, prob))
        return out


@dataclass
class CertifiedOptimum:
    status: Status
    bound: float
    order_used: int | None
    minimizers: list[np.ndarray]        # full points in the problem's variables
    x_minimizers: list[np.ndarray]
    y_minimizers: list[np.ndarray]
    rank_profile: list[int]
    antipodal_quotient: bool = False    # True when +-y duplicates were merged
    records: list[OrderRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "bound": self.bound,
            "order_used": self.order_used,
            "x_minimizers": [x.tolist() for x in self.x_minimizers],
            "y_minimizers": [y.tolist() for y in self.y_minimizers],
            "rank_profile": self.rank_profile,
            "antipodal_quotient": self.antipodal_quotient,
        }


def _minimizer_json(points, prob) -> dict:
    if prob is None:
        return {"minimizers": [np.asarray(p).tolist() for p in points]}
    xs, ys = [], []
    for z in points:
        x, y = prob.split(z)
        xs.append(x.tolist())
        ys.append(y.tolist())
    return {"x_minimizers": xs, "y_minimizers": ys}


def numerical_rank(M: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values >= rank_tol * sigma_max."""
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] <= 0:
        return 0
    return int(np.sum(s >= rank_tol * s[0]))


def rank_profile(moment_block: np.ndarray, basis: MomentBasis, rank_tol: float = DEFAULT_RANK_TOL) -> list[int]:
    """Ranks of the truncations M_0, M_1, ..., M_k."""
    return [numerical_rank(moment_block[:basis.size_upto(d), :basis.size_upto(d)], rank_tol)
            for d in range(basis.order + 1)]


def check_flatness(moment_block: np.ndarray, basis: MomentBasis, rank_tol: float = DEFAULT_RANK_TOL,
                   shift: int = 1, min_degree: int = 1) -> tuple[int, int] | None:
    """Find a flat truncation: rank M_s == rank M_{s-shift} for some s.

    Scans s from the top order down and returns ``(r, s)``, or None.
    ``min_degree`` is the smallest s tried; it must be >= shift.
    """
    ranks = rank_profile(moment_block, basis, rank_tol)
    for s in range(basis.order, max(min_degree, shift) - 1, -1):
        if ranks[s] == ranks[s - shift]:
            return ranks[s], s
    return None


def _greedy_pivots(V: np.ndarray, r: int, tol: float) -> list[int]:
    """First r rows of V (in order) that are linearly independent."""
    pivots: list[int] = []
    Q = np.zeros((0, V.shape[1]))
    scale = np.abs(V).max()
    for i, row in enumerate(V):
        res = row - Q.T @ (Q @ row) if len(Q) else row.copy()
        nrm = np.linalg.norm(res)
        if nrm > tol * scale:
            pivots.append(i)
            Q = np.vstack([Q, res / nrm])
            if len(pivots) == r:
                break
    return pivots


def extract_minimizers(moment_block: np.ndarray, basis: MomentBasis, r: int,
                       degree: int | None = None, seed: int = 0,
                       pivot_tol: float = DEFAULT_RANK_TOL) -> list[np.ndarray]:
    """Recover r atoms from a flat moment matrix.

    ``degree`` is the truncation order s at which flatness holds (defaults to
    the full order).  Uses a rank-r factorisation, its column echelon form,
    the multiplication matrices of each variable and an ordered real Schur
    form of a random convex combination of them.
    """
    n = basis.nvars
    s = basis.order if degree is None else degree
    size = basis.size_upto(s)
    M = 0.5 * (moment_block[:size, :size] + moment_block[:size, :size].T)
    w, Uv = np.linalg.eigh(M)
    idx = np.argsort(w)[::-1][:r]
    V = Uv[:, idx] * np.sqrt(np.clip(w[idx], 0.0, None))
    monos = basis.monos[:size]
    pivots = _greedy_pivots(V, r, pivot_tol)
    if len(pivots) < r:
        return []
    W = V @ np.linalg.inv(V[pivots])          # echelon form: W[pivots] = I
    index = {e: i for i, e in enumerate(monos)}
    mults = []
    for j in range(n):
        rows = []
        for p in pivots:
            e = list(monos[p])
            e[j] += 1
            e = tuple(e)
            if e not in index:
                return []
            rows.append(index[e])
        mults.append(W[rows])
    if r == 1:
        return [np.array([Nj[0, 0] for Nj in mults])]
    rng = np.random.default_rng(seed)
    lam = rng.random(n)
    lam /= lam.sum()
    Nc = sum(l * Nj for l, Nj in zip(lam, mults))
    T, Q = sla.schur(Nc, output="real")
    pts = []
    for k in range(r):
        q = Q[:, k]
        pts.append(np.array([q @ Nj @ q for Nj in mults]))
    return pts


def _polish(prob: PolyOptProblem, z0: np.ndarray, radius: float = 1e-2) -> np.ndarray:
    """Local SLSQP refinement of an extracted point; returns z0 if it wanders off."""
    obj = prob.objective
    grad_obj = obj.gradient()
    cons = []
    for h in prob.eqs:
        gh = h.gradient()
        cons.append({"type": "eq", "fun": h.eval,
                     "jac": lambda z, gh=gh: np.array([g.eval(z) for g in gh])})
    for g in prob.ineqs:
        gg = g.gradient()
        cons.append({"type": "ineq", "fun": lambda z, g=g: -g.eval(z),
                     "jac": lambda z, gg=gg: -np.array([q.eval(z) for q in gg])})
    try:
        res = minimize(obj.eval, z0, jac=lambda z: np.array([q.eval(z) for q in grad_obj]),
                       constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 100})
    except (ValueError, np.linalg.LinAlgError):
        return z0
    z = np.asarray(res.x)
    if not np.all(np.isfinite(z)) or np.linalg.norm(z - z0) > radius:
        return z0
    return z


def verify_points(prob: PolyOptProblem, points, bound: float, feas_tol: float = 1e-6,
                  obj_tol: float = 1e-5, polish: bool = True) -> list[np.ndarray] | None:
    """Feasible points whose objective is within obj_tol of ``bound``, or None."""
    out = []
    scale = 1.0 + abs(bound)
    for z in points:
        z = np.asarray(z, dtype=float)
        candidates = [z, _polish(prob, z)] if polish else [z]
        good = None
        for c in candidates:
            if prob.violation(c) <= feas_tol and abs(prob.objective.eval(c) - bound) <= obj_tol * scale:
                good = c
                break
        if good is None:
            return None
        out.append(good)
    return out


def quotient_antipodal(prob: PolyOptProblem, points, tol: float = 1e-4):
    """Merge points that differ only by the sign of the y-block.

    Returns (representatives, merged flag).  The representative has the
    first clearly nonzero y entry positive.
    """
    nx = prob.nvars if prob.nx is None else prob.nx
    if nx == prob.nvars:
        return list(points), False
    reps: list[np.ndarray] = []
    merged = False
    for z in points:
        x, y = z[:nx], z[nx:]
        big = np.flatnonzero(np.abs(y) > tol)
        if len(big) and y[big[0]] < 0:
            z = np.concatenate([x, -y])
        if any(np.linalg.norm(z - q) <= tol * (1 + np.linalg.norm(q)) for q in reps):
            merged = True
            continue
        reps.append(z)
    return reps, merged


def _dedup(points, tol: float = 1e-6):
    out: list[np.ndarray] = []
    for z in points:
        if not any(np.linalg.norm(z - q) <= tol * (1 + np.linalg.norm(q)) for q in out):
            out.append(z)
    return out


def certify(prob: PolyOptProblem, max_order: int = 5, min_order: int | None = None,
            rank_tol: float = DEFAULT_RANK_TOL, sdp_tol: float | None = None,
            sdp_max_iters: int = DEFAULT_MAX_ITERS, feas_tol: float = 1e-6,
            obj_tol: float = 1e-5, polish: bool = True, seed: int = 0,
            quotient: bool = True, on_order=None) -> CertifiedOptimum:
    """Climb the relaxation hierarchy until the bound is certified.

    ``on_order`` is called with each OrderRecord as soon as it is available.
    Status INFEASIBLE is returned as soon as one order is infeasible; after
    ``max_order`` without a certificate the best bound is returned as
    BOUND_ONLY.
    """
    import time

    kmin = min_relaxation_order(prob) if min_order is None else max(min_order, min_relaxation_order(prob))
    if max_order < kmin:
        raise ValueError(f"max_order {max_order} below the minimal relaxation order {kmin}")
    records: list[OrderRecord] = []
    best_bound = -np.inf
    last_profile: list[int] = []
    last_order = None
    any_solved = False
    for k in range(kmin, max_order + 1):
        t0 = time.perf_counter()
        R = build_relaxation(prob, k)
        sol = solve_sdp(R, tol=sdp_tol, max_iters=sdp_max_iters)
        err = sol.residuals.get("rel_error", np.inf)
        rec = OrderRecord(k, Status.BOUND_ONLY, float("nan"), sol.status.value, float(err), [], None)
        if sol.status is SdpStatus.INFEASIBLE:
            rec.status = Status.INFEASIBLE
            rec.seconds = time.perf_counter() - t0
            records.append(rec)
            if on_order:
                on_order(rec)
            return CertifiedOptimum(Status.INFEASIBLE, float("nan"), k, [], [], [], [],
                                    records=records)
        if sol.status is SdpStatus.UNBOUNDED:
            rec.bound = -np.inf
        elif sol.status is SdpStatus.OPTIMAL or err <= USABLE_ERROR:
            any_solved = True
            # the multiplier side is a valid lower bound whenever it is feasible
            if sol.residuals["dual_residual"] <= 1e-6 * (1 + np.abs(R.c).max()):
                rec.bound = float(min(sol.dual_obj, sol.primal_obj))
            else:
                rec.bound = float(sol.primal_obj)
            best_bound = max(best_bound, rec.bound)
            Mk = moment_matrix(R, sol.moment_values)
            rec.rank_profile = rank_profile(Mk, R.basis, rank_tol)
            last_profile, last_order = rec.rank_profile, k
            flat = check_flatness(Mk, R.basis, rank_tol)
            if flat is not None:
                r, s = flat
                rec.flat_rank = r
                pts = extract_minimizers(Mk, R.basis, r, degree=s, seed=seed)
                good = verify_points(prob, pts, rec.bound, feas_tol, obj_tol, polish) if pts else None
                if good:
                    good = _dedup(good)
                    rec.status = Status.CERTIFIED
                    rec.minimizers = good
        rec.seconds = time.perf_counter() - t0
        records.append(rec)
        if on_order:
            on_order(rec)
        log.info("order %d: sdp %s (err %.1e) bound %.8g status %s ranks %s", k, sol.status.value,
                 err, rec.bound, rec.status.name, rec.rank_profile)
        if rec.status is Status.CERTIFIED:
            pts, merged = quotient_antipodal(prob, rec.minimizers) if quotient else (rec.minimizers, False)
            xs = [prob.split(z)[0] for z in pts]
            ys = [prob.split(z)[1] for z in pts]
            return CertifiedOptimum(Status.CERTIFIED, rec.bound, k, pts, xs, ys, rec.rank_profile,
                                    merged, records)
    if not any_solved:
        return CertifiedOptimum(Status.INFEASIBLE, float("nan"), None, [], [], [], [],
                                records=records)
    return CertifiedOptimum(Status.BOUND_ONLY, best_bound, last_order, [], [], [], last_profile,
                            records=records)
