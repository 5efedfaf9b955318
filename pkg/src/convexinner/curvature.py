"""Minimum-curvature polynomial programs over one boundary piece of a set.

For piece ``p_i`` of ``S`` the program is

    minimize    y' H_i(x) y
    subject to  p_i(x) = 0,  y' g_i(x) = 0,  y'y = 1,  p_j(x) <= 0 (j != i)

in the joint ring of (x_1..x_n, y_1..y_n).  A nonnegative optimum on every
non-affine piece means the set is convex (under nondegeneracy of the pieces).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .polycore import Polynomial, dot, quadratic_form
from .semialg import SemialgebraicSet


@dataclass(frozen=True)
class PolyOptProblem:
    """``min objective`` s.t. ``eqs == 0`` and ``ineqs <= 0`` over ``nvars`` variables."""

    nvars: int
    objective: Polynomial
    eqs: tuple[Polynomial, ...] = ()
    ineqs: tuple[Polynomial, ...] = ()
    # size of the leading x-block; the rest are auxiliary (tangent direction) variables
    nx: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "eqs", tuple(self.eqs))
        object.__setattr__(self, "ineqs", tuple(self.ineqs))
        for p in (self.objective, *self.eqs, *self.ineqs):
            if p.n != self.nvars:
                raise ValueError(f"polynomial in {p.n} variables, problem has {self.nvars}")

    @property
    def max_degree(self) -> int:
        return max(p.degree for p in (self.objective, *self.eqs, *self.ineqs))

    def split(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        nx = self.nvars if self.nx is None else self.nx
        return z[:nx], z[nx:]

    def violation(self, z) -> float:
        """Largest constraint violation at ``z`` (0 when feasible)."""
        v = 0.0
        for h in self.eqs:
            v = max(v, abs(h.eval(z)))
        for g in self.ineqs:
            v = max(v, g.eval(z))
        return v

    def to_json(self) -> dict:
        return {
            "nvars": self.nvars,
            "nx": self.nx,
            "objective": self.objective.to_json(),
            "eqs": [p.to_json() for p in self.eqs],
            "ineqs": [p.to_json() for p in self.ineqs],
        }

    @classmethod
    def from_json(cls, obj) -> "PolyOptProblem":
        return cls(
            int(obj["nvars"]),
            Polynomial.from_json(obj["objective"]),
            tuple(Polynomial.from_json(p) for p in obj.get("eqs", [])),
            tuple(Polynomial.from_json(p) for p in obj.get("ineqs", [])),
            obj.get("nx"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _piece(S: SemialgebraicSet, i: int) -> Polynomial:
    if not 0 <= i < S.m:
        raise IndexError(f"piece index {i} out of range for a set with {S.m} polynomials")
    return S.ineqs[i]


def build_curvature_problem(S: SemialgebraicSet, i: int) -> PolyOptProblem:
    """Curvature program for piece ``i`` (0-based) of ``S``.

    Raises ValueError for affine pieces, which have zero curvature and are
    never optimized over.
    """
    p = _piece(S, i)
    if p.degree <= 1:
        raise ValueError(f"piece {i} is affine; its curvature is identically zero")
    n = S.n
    N = 2 * n
    px = p.embed(N)
    grad = [g.embed(N) for g in p.gradient()]
    hess = [[h.embed(N) for h in row] for row in p.hessian()]
    y = [Polynomial.variable(N, n + j) for j in range(n)]
    objective = quadratic_form(hess, y)
    tangent = dot(grad, y)
    sphere = dot(y, y) - 1.0
    others = [q.embed(N) for j, q in enumerate(S.ineqs) if j != i]
    ball = S.ball_polynomial()
    if ball is not None:
        others.append(ball.embed(N))
    return PolyOptProblem(N, objective, (px, tangent, sphere), tuple(others), nx=n)


def build_singularity_problem(S: SemialgebraicSet, i: int) -> PolyOptProblem:
    """Feasibility system p_i = 0, grad p_i = 0, p_j <= 0 with zero objective."""
    p = _piece(S, i)
    others = [q for j, q in enumerate(S.ineqs) if j != i]
    ball = S.ball_polynomial()
    if ball is not None:
        others.append(ball)
    eqs = [p] + [g for g in p.gradient() if not g.is_zero()]
    return PolyOptProblem(S.n, Polynomial.zero(S.n), tuple(eqs), tuple(others), nx=S.n)


class Nondegeneracy(enum.Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    UNKNOWN = "unknown"


@dataclass
class NondegeneracyResult:
    status: Nondegeneracy
    witness: np.ndarray | None = None
    order_used: int | None = None
    notes: list[str] = field(default_factory=list)


def check_assumption_nondegenerate(S: SemialgebraicSet, i: int, max_order: int = 4,
                                   **certify_opts) -> NondegeneracyResult:
    """Decide whether p_i and its gradient have a common zero on the other pieces.

    Certified infeasibility of the relaxation means no such point exists;
    an extracted point is a witness of a singular boundary point.
    """
    from .extract import Status, certify

    p = _piece(S, i)
    grad = p.gradient()
    if p.degree <= 1:
        if any(not g.is_zero() for g in grad):
            return NondegeneracyResult(Nondegeneracy.HOLDS, notes=["affine with nonzero gradient"])
        return NondegeneracyResult(Nondegeneracy.VIOLATED, notes=["constant polynomial"])
    prob = build_singularity_problem(S, i)
    try:
        res = certify(prob, max(max_order, prob.max_degree // 2 + (prob.max_degree % 2)),
                      **certify_opts)
    except Exception as exc:  # relaxation failure is reported, not raised
        return NondegeneracyResult(Nondegeneracy.UNKNOWN, notes=[f"relaxation failed: {exc}"])
    if res.status is Status.INFEASIBLE:
        return NondegeneracyResult(Nondegeneracy.HOLDS, order_used=res.order_used)
    if res.status is Status.CERTIFIED:
        return NondegeneracyResult(Nondegeneracy.VIOLATED, witness=res.minimizers[0],
                                   order_used=res.order_used)
    return NondegeneracyResult(Nondegeneracy.UNKNOWN, order_used=res.order_used)
