"""Flat-output trajectory optimization for the double integrator.

The state is ``x = (f, f')`` and the input ``u = f''`` for a scalar flat
output ``f(t) = sum_k alpha_k b_k(t)`` on a clamped cubic B-spline basis.
Path constraints ``p(x(t_i)) <= 0`` are enforced at N uniform instants, the
boundary states are linear equalities in alpha, and the cost is the sum of
``u(t_i)^2`` (optionally weighted by the instant spacing).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.optimize import minimize

from .polycore import Polynomial
from .semialg import SemialgebraicSet

log = logging.getLogger(__name__)

# demo data: steer (0.3, -0.8) to (-0.3, -0.8) in 2.5 time units
DEMO_T0, DEMO_TF = 0.0, 2.5
DEMO_X0 = (0.3, -0.8)
DEMO_XF = (-0.3, -0.8)
# curvature minimizers of the waterdrop boundary, used for its tangent cuts
WATERDROP_CUT_POINTS = ((0.048909, -0.14079), (-0.048909, -0.14079))


@dataclass
class BSplineBasis:
    """Clamped B-spline basis with uniform interior knots on [t0, tf]."""
    t0: float = 0.0
    tf: float = 1.0
    segments: int = 5
    degree: int = 3

    def __post_init__(self):
        if not self.tf > self.t0:
            raise ValueError("tf must exceed t0")
        if self.segments < 1 or self.degree < 1:
            raise ValueError("need at least one segment and degree >= 1")
        inner = np.linspace(self.t0, self.tf, self.segments + 1)
        k = self.degree
        self.knots = np.concatenate([[self.t0] * k, inner, [self.tf] * k])

    @property
    def size(self) -> int:
        return self.segments + self.degree

    def matrix(self, t, deriv: int = 0) -> np.ndarray:
        """Rows of basis values (or derivatives) at the times t: f^(deriv)(t) = B @ alpha."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if deriv not in (0, 1, 2):
            raise ValueError("deriv must be 0, 1 or 2")
        span = self.tf - self.t0
        if np.any(t < self.t0 - 1e-12 * span) or np.any(t > self.tf + 1e-12 * span):
            raise ValueError(f"time outside [{self.t0}, {self.tf}]")
        t = np.clip(t, self.t0, self.tf)
        spline = BSpline(self.knots, np.eye(self.size), self.degree, extrapolate=False)
        if deriv:
            spline = spline.derivative(deriv)
        return spline(t)


def bspline_eval(basis: BSplineBasis, alpha, t, deriv: int = 0):
    """f, f' or f'' at t (scalar or array) by de Boor evaluation."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (basis.size,):
        raise ValueError(f"need {basis.size} coefficients, got {alpha.shape}")
    vals = basis.matrix(t, deriv) @ alpha
    return float(vals[0]) if np.ndim(t) == 0 else vals


@dataclass
class FlatProgram:
    basis: BSplineBasis
    x0: np.ndarray
    xf: np.ndarray
    times: np.ndarray               # constraint instants t_1 < ... < t_N
    constraints: list[Polynomial]   # path inequalities p(x1, x2) <= 0
    weighted: bool = True           # cost sum u^2 dt instead of sum u^2
    B0: np.ndarray = field(init=False, repr=False)
    B1: np.ndarray = field(init=False, repr=False)
    B2: np.ndarray = field(init=False, repr=False)
    A_eq: np.ndarray = field(init=False, repr=False)
    b_eq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = self.basis
        self.B0, self.B1, self.B2 = (b.matrix(self.times, d) for d in (0, 1, 2))
        ends = [b.t0, b.tf]
        self.A_eq = np.vstack([b.matrix(ends, 0), b.matrix(ends, 1)])
        self.b_eq = np.array([self.x0[0], self.xf[0], self.x0[1], self.xf[1]])
        self._grads = [p.gradient() for p in self.constraints]

    @property
    def weight(self) -> float:
        if not self.weighted:
            return 1.0
        return (self.basis.tf - self.basis.t0) / len(self.times)

    @property
    def n_path(self) -> int:
        return len(self.constraints) * len(self.times)

    def cost(self, alpha) -> float:
        u = self.B2 @ alpha
        return float(self.weight * u @ u)

    def cost_grad(self, alpha) -> np.ndarray:
        return 2.0 * self.weight * self.B2.T @ (self.B2 @ alpha)

    def states(self, alpha) -> np.ndarray:
        return np.column_stack([self.B0 @ alpha, self.B1 @ alpha])

    def path_values(self, alpha) -> np.ndarray:
        """p_j(x(t_i)) stacked constraint by constraint (feasible when all <= 0)."""
        X = self.states(alpha)
        if not self.constraints:
            return np.zeros(0)
        return np.concatenate([p.eval_many(X) for p in self.constraints])

    def path_jacobian(self, alpha) -> np.ndarray:
        X = self.states(alpha)
        rows = []
        for g in self._grads:
            g1, g2 = g[0].eval_many(X), g[1].eval_many(X)
            rows.append(g1[:, None] * self.B0 + g2[:, None] * self.B1)
        return np.vstack(rows) if rows else np.zeros((0, self.basis.size))

    def violation(self, alpha) -> float:
        v = self.path_values(alpha)
        return float(max(0.0, v.max())) if v.size else 0.0

    def boundary_error(self, alpha) -> float:
        return float(np.abs(self.A_eq @ alpha - self.b_eq).max())


def build_flat_program(x0, xf, t0: float, tf: float, N: int, constraint_set: SemialgebraicSet | None,
                       segments: int = 5, weighted: bool = True) -> FlatProgram:
    """Discretize the path constraints at the midpoints of N equal subintervals.

    ``constraint_set`` None drops the path constraints.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    constraints: list[Polynomial] = []
    if constraint_set is not None:
        if constraint_set.n != 2:
            raise ValueError("path constraints must be over (x1, x2)")
        constraints = constraint_set.all_constraints()
        for name, x in (("x0", x0), ("xf", xf)):
            if not constraint_set.contains(x):
                raise ValueError(f"boundary state {name} = {x.tolist()} violates the path constraints")
    h = (tf - t0) / N
    times = t0 + h * (np.arange(N) + 0.5)
    return FlatProgram(BSplineBasis(t0, tf, segments), x0, xf, times, constraints, weighted)


@dataclass
class TrajectoryResult:
    alpha_star: np.ndarray
    cost: float
    max_constraint_violation: float
    boundary_error: float
    iterations: int
    wall_time: float
    starts: int = 1
    start_costs: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        return {"cost": self.cost, "violation": self.max_constraint_violation,
                "boundary_error": self.boundary_error, "iterations": self.iterations,
                "time": self.wall_time, "starts": self.starts, "start_costs": self.start_costs}


class TrajectoryError(RuntimeError):
    pass


def straight_line_start(fp: FlatProgram) -> np.ndarray:
    """Coefficients of the least-squares fit to the straight line from x0_1 to xf_1.

    The boundary equalities are imposed exactly (KKT system of the fit).
    """
    b = fp.basis
    ts = np.linspace(b.t0, b.tf, 4 * b.size)
    line = fp.x0[0] + (fp.xf[0] - fp.x0[0]) * (ts - b.t0) / (b.tf - b.t0)
    B = b.matrix(ts)
    n, m = b.size, len(fp.b_eq)
    K = np.block([[B.T @ B, fp.A_eq.T], [fp.A_eq, np.zeros((m, m))]])
    rhs = np.concatenate([B.T @ line, fp.b_eq])
    return np.linalg.lstsq(K, rhs, rcond=None)[0][:n]


def _solve_from(fp: FlatProgram, alpha0, max_iters: int, ftol: float):
    cons = [{"type": "eq", "fun": lambda a: fp.A_eq @ a - fp.b_eq, "jac": lambda a: fp.A_eq}]
    if fp.constraints:
        cons.append({"type": "ineq", "fun": lambda a: -fp.path_values(a),
                     "jac": lambda a: -fp.path_jacobian(a)})
    return minimize(fp.cost, alpha0, jac=fp.cost_grad, constraints=cons, method="SLSQP",
                    options={"maxiter": max_iters, "ftol": ftol})


def solve_flat_program(fp: FlatProgram, starts: int = 1, seed: int = 0, perturbation: float = 0.3,
                       max_iters: int = 500, ftol: float = 1e-12, feas_tol: float = 1e-6,
                       boundary_tol: float = 1e-8) -> TrajectoryResult:
    """SQP from the straight-line start, plus ``starts - 1`` seeded perturbations of it.

    The best feasible local solution is returned.
    """
    if starts < 1:
        raise ValueError("starts must be at least 1")
    rng = np.random.default_rng(seed)
    base = straight_line_start(fp)
    t_start = time.perf_counter()
    best, iters, costs, diag = None, 0, [], []
    for k in range(starts):
        a0 = base if k == 0 else base + perturbation * rng.standard_normal(base.shape)
        res = _solve_from(fp, a0, max_iters, ftol)
        iters += int(res.nit)
        viol, berr = fp.violation(res.x), fp.boundary_error(res.x)
        cost = fp.cost(res.x)
        diag.append(f"start {k}: {res.message} (cost {cost:.6g}, violation {viol:.2e})")
        log.debug(diag[-1])
        if viol > feas_tol or berr > boundary_tol:
            costs.append(float("nan"))
            continue
        costs.append(cost)
        if best is None or cost < best[1]:
            best = (res.x, cost, viol, berr)
    wall = time.perf_counter() - t_start
    if best is None:
        raise TrajectoryError("no start reached a feasible solution:\n" + "\n".join(diag))
    return TrajectoryResult(best[0], best[1], best[2], best[3], iters, wall, starts, costs)


def resample_violation(fp: FlatProgram, alpha, factor: int = 10) -> float:
    """Largest path-constraint value on a grid ``factor`` times finer than fp.times."""
    b = fp.basis
    ts = np.linspace(b.t0, b.tf, factor * len(fp.times))
    X = np.column_stack([b.matrix(ts, 0) @ alpha, b.matrix(ts, 1) @ alpha])
    if not fp.constraints:
        return 0.0
    return float(max(0.0, max(p.eval_many(X).max() for p in fp.constraints)))


def trajectory_table(fp: FlatProgram, alpha, n_samples: int = 201) -> np.ndarray:
    """Columns t, x1, x2, u on a uniform grid."""
    b = fp.basis
    ts = np.linspace(b.t0, b.tf, n_samples)
    return np.column_stack([ts] + [b.matrix(ts, d) @ alpha for d in (0, 1, 2)])


def waterdrop_inner(points=WATERDROP_CUT_POINTS) -> SemialgebraicSet:
    """The waterdrop with tangent cuts at the given boundary points (no offset)."""
    from .fixtures import waterdrop
    from .inner import separating_halfspace

    S = waterdrop()
    p = S.ineqs[0]
    return S.add(*(separating_halfspace(p, x, 0.0) for x in points))


def demo_program(kind: str, N: int, weighted: bool = True, cut_points=WATERDROP_CUT_POINTS) -> FlatProgram:
    """The steering demo over the waterdrop ('nonconvex'), its inner set ('convex') or no set."""
    from .fixtures import waterdrop

    sets = {"nonconvex": lambda: waterdrop(), "convex": lambda: waterdrop_inner(cut_points),
            "unconstrained": lambda: None}
    if kind not in sets:
        raise ValueError(f"unknown program kind {kind!r}; choose from {sorted(sets)}")
    return build_flat_program(DEMO_X0, DEMO_XF, DEMO_T0, DEMO_TF, N, sets[kind](), weighted=weighted)
