"""Named example sets: the planar quartics, the hyperbola and the stability regions."""
from __future__ import annotations

from .polycore import Polynomial
from .semialg import SemialgebraicSet


def _p2(terms) -> Polynomial:
    return Polynomial(2, terms)


def hyperbola(ball_radius: float | None = 10.0) -> SemialgebraicSet:
    """{x1 x2 <= 1}, unbounded, so a compactifying ball is attached by default."""
    return SemialgebraicSet(2, (_p2({(1, 1): 1.0, (0, 0): -1.0}),), ball_radius)


def egg() -> SemialgebraicSet:
    """x1^4 + x2^4 + x1^2 + x2 <= 0, smooth and convex."""
    return SemialgebraicSet(2, (_p2({(4, 0): 1.0, (0, 4): 1.0, (2, 0): 1.0, (0, 1): 1.0}),))


def waterdrop() -> SemialgebraicSet:
    """x1^4 + x2^4 + x1^2 + x2^3 <= 0, with a cusp at the origin."""
    return SemialgebraicSet(2, (_p2({(4, 0): 1.0, (0, 4): 1.0, (2, 0): 1.0, (0, 3): 1.0}),))


def singular(eps: float = 0.0) -> SemialgebraicSet:
    """x1^4 + x2^4 + x2^3 + eps <= 0; singular at the origin when eps = 0."""
    terms = {(4, 0): 1.0, (0, 4): 1.0, (0, 3): 1.0}
    if eps:
        terms[(0, 0)] = eps
    return SemialgebraicSet(2, (_p2(terms),))


def empty() -> SemialgebraicSet:
    """{x : 1 + x1^2 + x2^2 <= 0}, which has no real points."""
    return SemialgebraicSet(2, (_p2({(0, 0): 1.0, (2, 0): 1.0, (0, 2): 1.0}),))


def named_set(name: str) -> SemialgebraicSet:
    from .stability import schur3_region, schur4_region

    table = {
        "hyperbola": hyperbola,
        "egg": egg,
        "waterdrop": waterdrop,
        "singular": singular,
        "empty": empty,
        "schur3": lambda: schur3_region().set,
        "schur4": lambda: schur4_region(0.0).set,
    }
    if name not in table:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(table)}")
    return table[name]()


FIXTURE_NAMES = ("hyperbola", "egg", "waterdrop", "singular", "empty", "schur3", "schur4")
