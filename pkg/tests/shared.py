"""Expensive solves shared between test modules, each computed once per session."""
from __future__ import annotations

import functools

from convexinner import fixtures as F
from convexinner.curvature import build_curvature_problem
from convexinner.extract import certify
from convexinner.inner import inner_approximation
from convexinner.stability import schur3_region, schur4_region


def named(name: str):
    table = {"hyperbola": F.hyperbola, "egg": F.egg, "waterdrop": F.waterdrop,
             "singular": F.singular, "singular+": lambda: F.singular(1e-3),
             "singular-": lambda: F.singular(-1e-3), "empty": F.empty,
             "schur3": lambda: schur3_region().set,
             "schur4": lambda: schur4_region(0.0).set,
             "schur4-0.75": lambda: schur4_region(-0.75, cubic_scale=1.0).set}
    return table[name]()


PIECE = {"schur3": 2, "schur4": 5, "schur4-0.75": 5}


@functools.cache
def curvature(name: str, max_order: int, min_order: int | None = None):
    S = named(name)
    prob = build_curvature_problem(S, PIECE.get(name, 0))
    return prob, certify(prob, max_order=max_order, min_order=min_order)


@functools.cache
def inner(name: str, eps: float = 0.0, max_order: int = 5):
    return inner_approximation(named(name), eps=eps, max_order=max_order)


# one (criterion, passed, detail) entry per acceptance check, printed in the session summary
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, checks: list[tuple[str, bool]], detail: str = "") -> bool:
    ok = all(c for _, c in checks)
    parts = [f"{name}: {'ok' if c else 'FAILED'}" for name, c in checks]
    text = "; ".join(parts) + (f" | {detail}" if detail else "")
    ACCEPTANCE[criterion] = (ok, text)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {text}")
    return ok
