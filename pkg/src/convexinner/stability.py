"""Discrete-time stability regions in coefficient/controller space.

Two families are provided: the monic cubic ``x1 + x2 z + x3 z^2 + z^3`` and
the closed loop of ``(-2z^2 + 1)/(z^3 + z^2 + a)`` with the first-order
controller ``(x1 z + x2)/(z + 1)``.  Root radii from companion matrices serve
as the independent oracle for every membership claim.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from .polycore import Polynomial
from .semialg import SemialgebraicSet, rasterize

log = logging.getLogger(__name__)


class RegionKind(enum.Enum):
    SCHUR3 = "schur3"
    SCHUR4 = "schur4"


@dataclass
class StabilityRegionSpec:
    kind: RegionKind
    set: SemialgebraicSet
    char_poly_map: Callable[[np.ndarray], np.ndarray]   # x -> monic coefficients, highest first
    a: float | None = None
    bbox: list[tuple[float, float]] = field(default_factory=list)
    annotations: list[str] = field(default_factory=list)

    def char_poly(self, x) -> np.ndarray:
        return self.char_poly_map(np.asarray(x, dtype=float))

    def spectral_radius(self, x) -> float:
        return spectral_radius(self.char_poly(x))


def spectral_radius(coeffs) -> float:
    """Largest root modulus of the polynomial with coefficients highest-degree first."""
    c = np.asarray(coeffs, dtype=float)
    if len(c) < 2:
        return 0.0
    return float(np.abs(np.linalg.eigvals(sla.companion(c))).max())


def schur3_region() -> StabilityRegionSpec:
    """Stability region of ``x1 + x2 z + x3 z^2 + z^3``: two planes and a saddle."""
    n = 3
    x1, x2, x3 = Polynomial.variables(n)
    one = Polynomial.constant(n, 1.0)
    p1 = -x1 - x2 - x3 - one
    p2 = x1 - x2 + x3 - one
    p3 = x1 * x1 - x1 * x3 + x2 - one
    S = SemialgebraicSet(n, (p1, p2, p3), names=("p1", "p2", "p3"))
    return StabilityRegionSpec(RegionKind.SCHUR3, S, lambda x: np.array([1.0, x[2], x[1], x[0]]),
                               bbox=[(-1.0, 1.0), (-3.0, 3.0), (-3.0, 3.0)])


# rows map (q0, ..., q4) of a quartic to the five affine stability conditions
SCHUR4_MATRIX = np.array([
    [-1, 1, -1, 1, -1],
    [4, -2, 0, 2, -4],
    [-6, 0, 2, 0, -6],
    [4, 2, 0, -2, -4],
    [-1, -1, -1, -1, -1],
], dtype=float)


def schur4_char_coeffs(x, a: float) -> np.ndarray:
    """(q0, ..., q4) of z^4 + 2(1-x1) z^3 + (1-2x2) z^2 + (a+x1) z + a + x2."""
    x1, x2 = x
    return np.array([a + x2, a + x1, 1 - 2 * x2, 2 * (1 - x1), 1.0])


def schur4_region(a: float, cubic_scale: float = 1.0 / 64.0) -> StabilityRegionSpec:
    """Five affine conditions and one cubic for the fourth-order closed loop.

    The cubic is ``-cubic_scale * (-p2 p3 p4 + p2^2 p5 + p1 p4^2)``.  The
    default 1/64 gives integer coefficients (for a = 0 exactly
    6x1^2x2 + 3x1^2 - 10x1x2 - 2x1 - 3x2^3 + 6x2^2 + x2); curvature values
    scale linearly with it, the set does not change.
    """
    if not cubic_scale > 0:
        raise ValueError("cubic_scale must be positive")
    n = 2
    x1, x2 = Polynomial.variables(n)
    one = Polynomial.constant(n, 1.0)
    q = [a * one + x2, a * one + x1, one - 2.0 * x2, 2.0 * (one - x1), one]
    p = []
    for row in SCHUR4_MATRIX:
        acc = Polynomial.zero(n)
        for c, qk in zip(row, q):
            if c:
                acc = acc + float(c) * qk
        p.append(acc)
    p1, p2, p3, p4, p5 = p
    # the determinant-type combination is positive on the stable side
    p6_raw = -p2 * p3 * p4 + p2 * p2 * p5 + p1 * p4 * p4
    p6 = p6_raw.scale(-cubic_scale)
    S = SemialgebraicSet(n, (p1, p2, p3, p4, p5, p6), names=("p1", "p2", "p3", "p4", "p5", "p6"))
    bbox = _polytope_bbox([p1, p2, p3, p4, p5], pad=0.05)
    notes = [f"cubic condition is -{cubic_scale:g} * (-p2 p3 p4 + p2^2 p5 + p1 p4^2): the "
             "combination itself is positive on stable controllers"]
    return StabilityRegionSpec(RegionKind.SCHUR4, S,
                               lambda x: schur4_char_coeffs(x, a)[::-1].copy(), a=a, bbox=bbox,
                               annotations=notes)


def _polytope_bbox(affine: list[Polynomial], pad: float = 0.0) -> list[tuple[float, float]]:
    """Bounding box of {x : p(x) <= 0 for affine p} by 2n linear programs."""
    n = affine[0].n
    A = np.array([[p.coef(tuple(int(i == j) for i in range(n))) for j in range(n)] for p in affine])
    b = -np.array([p.coef((0,) * n) for p in affine])
    box = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        lo = linprog(e, A_ub=A, b_ub=b, bounds=[(None, None)] * n)
        hi = linprog(-e, A_ub=A, b_ub=b, bounds=[(None, None)] * n)
        if lo.status != 0 or hi.status != 0:
            raise ValueError("affine pieces do not bound a nonempty polytope")
        w = hi.x[j] - lo.x[j]
        box.append((lo.x[j] - pad * w, hi.x[j] + pad * w))
    return box


# --- analytic center ----------------------------------------------------------

@dataclass
class AnalyticCenterResult:
    x_star: np.ndarray
    gradient_norm: float
    barrier_value: float
    iterations: int = 0


class AnalyticCenterError(RuntimeError):
    def __init__(self, msg: str, best: np.ndarray | None = None):
        super().__init__(msg)
        self.best = best


def _barrier(polys, x):
    vals = np.array([p.eval(x) for p in polys])
    if np.any(vals >= 0):
        return np.inf, vals
    return float(-np.sum(np.log(-vals))), vals


def analytic_center(S: SemialgebraicSet, x0, tol: float = 1e-8,
                    max_iters: int = 500) -> AnalyticCenterResult:
    """Minimize -sum log(-p_i(x)) over the interior of S by damped Newton.

    The Hessian is shifted to positive definite when a nonconvex piece makes
    it indefinite; the step is backtracked to stay strictly feasible with
    sufficient decrease.
    """
    polys = list(S.ineqs)
    grads = [p.gradient() for p in polys]
    hessians = [p.hessian() for p in polys]
    x = np.asarray(x0, dtype=float).copy()
    f, vals = _barrier(polys, x)
    if not np.isfinite(f):
        raise ValueError(f"x0 = {x.tolist()} is not strictly feasible")
    gnorm = np.inf
    for it in range(max_iters):
        g = np.zeros(S.n)
        H = np.zeros((S.n, S.n))
        for v, gp, hp in zip(vals, grads, hessians):
            gv = np.array([q.eval(x) for q in gp])
            hv = np.array([[q.eval(x) for q in row] for row in hp])
            g += gv / -v
            H += hv / -v + np.outer(gv, gv) / v ** 2
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return AnalyticCenterResult(x, gnorm, f, it)
        shift = 0.0
        while True:
            try:
                L = np.linalg.cholesky(H + shift * np.eye(S.n))
                break
            except np.linalg.LinAlgError:
                shift = max(2 * shift, 1e-8 * max(1.0, np.abs(H).max()))
        d = -sla.cho_solve((L, True), g)
        t = 1.0
        slope = float(g @ d)
        while t > 1e-16:
            xn = x + t * d
            fn, vn = _barrier(polys, xn)
            if fn <= f + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            raise AnalyticCenterError("line search failed", x)
        if fn >= f and abs(fn - f) <= 1e-15 * max(1.0, abs(f)) and gnorm <= 1e3 * tol:
            return AnalyticCenterResult(xn, gnorm, fn, it + 1)
        x, f, vals = xn, fn, vn
    raise AnalyticCenterError(f"no convergence in {max_iters} iterations (|grad| = {gnorm:.2e})", x)


# --- sampling verification ----------------------------------------------------

@dataclass
class StabilityReport:
    resolution: int
    n_points: int
    n_inside: int
    violations: list[list[float]]     # inside the region but with a root outside the closed disk
    marginal: list[list[float]]       # root radius within tol of one
    max_radius: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"resolution": self.resolution, "n_points": self.n_points,
                "n_inside": self.n_inside, "n_violations": len(self.violations),
                "violations": self.violations[:100], "n_marginal": len(self.marginal),
                "max_radius": self.max_radius}


def verify_stability_sampling(spec: StabilityRegionSpec, region: SemialgebraicSet | None = None,
                              resolution: int = 200, bbox=None, tol: float = 1e-9) -> StabilityReport:
    """Check the root radius at every raster point of ``region`` (default: spec.set)."""
    region = spec.set if region is None else region
    bbox = spec.bbox if bbox is None else bbox
    R = rasterize(region, bbox, resolution)
    pts = R.inside_points()
    viol, marg = [], []
    rmax = 0.0
    for x in pts:
        r = spec.spectral_radius(x)
        rmax = max(rmax, r)
        if r > 1 + tol:
            viol.append(x.tolist())
        elif r >= 1 - tol:
            marg.append(x.tolist())
    return StabilityReport(resolution, int(R.mask.size), len(pts), viol, marg, rmax)
