"""Sparse multivariate polynomials with real coefficients.

A polynomial in ``n`` variables is a mapping from exponent tuples to float
coefficients.  Exact zeros are pruned, nothing else is.
"""
from __future__ import annotations

import math
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple


def grlex_key(exp: Sequence[int]):
    """Sort key for graded-lexicographic order (degree first, then lex descending)."""
    return (sum(exp), tuple(-e for e in exp))


def monomials_upto(n: int, d: int) -> list[tuple[int, ...]]:
    """All exponent vectors in ``n`` variables of total degree <= ``d``, grlex ordered.

    Within a degree block the order is lexicographic with x1 largest first,
    so for n=2, d=2: 1, x1, x2, x1^2, x1 x2, x2^2.
    """
    out = []
    for deg in range(d + 1):
        block = [e for e in _compositions(deg, n)]
        block.sort(key=lambda e: tuple(-v for v in e))
        out.extend(block)
    return out


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class Polynomial:
    """Immutable sparse polynomial.

    Parameters
    ----------
    n : int
        Number of variables.
    terms : mapping or iterable of (exponent, coefficient)
        Exponent tuples must have length ``n``.
    """

    __slots__ = ("n", "_terms", "_hash")

    def __init__(self, n: int, terms: Mapping | Iterable = ()):
        if n < 0:
            raise ValueError("dimension must be nonnegative")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple[int, ...], float] = {}
        for exp, coef in items:
            exp = tuple(int(e) for e in exp)
            if len(exp) != n:
                raise ValueError(f"exponent {exp} has length {len(exp)}, expected {n}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            acc[exp] = acc.get(exp, 0.0) + float(coef)
        self.n = n
        self._terms = {e: c for e, c in acc.items() if c != 0.0}
        self._hash = None

    # construction helpers
    @classmethod
    def constant(cls, n: int, c: float) -> "Polynomial":
        return cls(n, {(0,) * n: c})

    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls(n)

    @classmethod
    def variable(cls, n: int, j: int) -> "Polynomial":
        """The coordinate x_j (0-based index)."""
        if not 0 <= j < n:
            raise IndexError(f"variable index {j} out of range for n={n}")
        exp = [0] * n
        exp[j] = 1
        return cls(n, {tuple(exp): 1.0})

    @classmethod
    def variables(cls, n: int) -> list["Polynomial"]:
        return [cls.variable(n, j) for j in range(n)]

    @classmethod
    def affine(cls, coefs: Sequence[float], const: float = 0.0) -> "Polynomial":
        """``const + sum coefs[j] * x_j``."""
        n = len(coefs)
        terms = {(0,) * n: const}
        for j, c in enumerate(coefs):
            e = [0] * n
            e[j] = 1
            terms[tuple(e)] = c
        return cls(n, terms)

    # basic properties
    @property
    def terms(self) -> dict[tuple[int, ...], float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coef(self, exp: Sequence[int]) -> float:
        return self._terms.get(tuple(exp), 0.0)

    @property
    def degree(self) -> int:
        if not self._terms:
            return 0
        return max(sum(e) for e in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, frozenset(self._terms.items())))
        return self._hash

    def allclose(self, other: "Polynomial", atol: float = 1e-12) -> bool:
        if self.n != other.n:
            return False
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coef(k) - other.coef(k)) <= atol for k in keys)

    # evaluation
    def __call__(self, x) -> float:
        return self.eval(x)

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.n},)")
        total = 0.0
        for exp, c in self._terms.items():
            term = c
            for xi, e in zip(x, exp):
                if e:
                    term *= xi ** e
            total += term
        return float(total)

    def eval_many(self, pts) -> np.ndarray:
        """Vectorized evaluation on an array of shape (..., n)."""
        pts = np.asarray(pts, dtype=float)
        if pts.shape[-1] != self.n:
            raise ValueError(f"points have trailing dimension {pts.shape[-1]}, expected {self.n}")
        out = np.zeros(pts.shape[:-1])
        for exp, c in self._terms.items():
            term = np.full(pts.shape[:-1], c)
            for j, e in enumerate(exp):
                if e:
                    term = term * pts[..., j] ** e
            out = out + term
        return out

    # calculus
    def diff(self, j: int) -> "Polynomial":
        """Partial derivative with respect to x_j (0-based)."""
        if not 0 <= j < self.n:
            raise IndexError(f"variable index {j} out of range for n={self.n}")
        terms = {}
        for exp, c in self._terms.items():
            if exp[j]:
                e = list(exp)
                e[j] -= 1
                terms[tuple(e)] = c * exp[j]
        return Polynomial(self.n, terms)

    def gradient(self) -> list["Polynomial"]:
        return [self.diff(j) for j in range(self.n)]

    def hessian(self) -> list[list["Polynomial"]]:
        g = self.gradient()
        H = [[None] * self.n for _ in range(self.n)]
        for j in range(self.n):
            for k in range(j, self.n):
                H[j][k] = H[k][j] = g[j].diff(k)
        return H

    # arithmetic
    def _check(self, other: "Polynomial"):
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self.n, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Polynomial(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[tuple[int, ...], float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0.0) + c1 * c2
        return Polynomial(self.n, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0 or int(k) != k:
            raise ValueError("only nonnegative integer powers")
        out = Polynomial.constant(self.n, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def scale(self, s: float) -> "Polynomial":
        return Polynomial(self.n, {e: c * s for e, c in self._terms.items()})

    # change of ring
    def embed(self, n_new: int, offset: int = 0) -> "Polynomial":
        """Same polynomial viewed in ``n_new`` variables, own variables at ``offset``."""
        if offset + self.n > n_new:
            raise ValueError("embedding does not fit")
        terms = {}
        for e, c in self._terms.items():
            full = [0] * n_new
            full[offset:offset + self.n] = e
            terms[tuple(full)] = c
        return Polynomial(n_new, terms)

    def restrict(self, n_new: int) -> "Polynomial":
        """Drop trailing variables; they must not occur."""
        terms = {}
        for e, c in self._terms.items():
            if any(e[n_new:]):
                raise ValueError("polynomial depends on dropped variables")
            terms[e[:n_new]] = c
        return Polynomial(n_new, terms)

    def compose_affine(self, A, b) -> "Polynomial":
        """p(A z + b) as a polynomial in z, with A of shape (n, m)."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        m = A.shape[1]
        lin = [Polynomial.affine(A[j], b[j]) for j in range(self.n)]
        out = Polynomial.zero(m)
        for exp, c in self._terms.items():
            term = Polynomial.constant(m, c)
            for j, e in enumerate(exp):
                if e:
                    term = term * lin[j] ** e
            out = out + term
        return out

    # presentation
    def sorted_terms(self):
        return sorted(self._terms.items(), key=lambda t: grlex_key(t[0]))

    def __repr__(self):
        return f"Polynomial({self.n}, {self.to_str()!r})"

    def to_str(self, names: Sequence[str] | None = None) -> str:
        if not self._terms:
            return "0"
        names = names or [f"x{j + 1}" for j in range(self.n)]
        parts = []
        for exp, c in self.sorted_terms():
            mono = "*".join(
                nm if e == 1 else f"{nm}^{e}" for nm, e in zip(names, exp) if e
            )
            if not mono:
                parts.append(f"{c:+.10g}")
            elif c == 1.0:
                parts.append(f"+{mono}")
            elif c == -1.0:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c:+.10g}*{mono}")
        s = " ".join(parts)
        return s[1:] if s.startswith("+") else s

    # serialization
    def to_json(self) -> dict:
        return {
            "n": self.n,
            "terms": [{"exp": list(e), "coef": c} for e, c in self.sorted_terms()],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Polynomial":
        try:
            n = int(obj["n"])
            terms = [(t["exp"], t["coef"]) for t in obj["terms"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed polynomial JSON: {exc}") from exc
        return cls(n, terms)


def poly_eval(p: Polynomial, x) -> float:
    return p.eval(x)


def poly_diff(p: Polynomial, j: int) -> Polynomial:
    return p.diff(j)


def poly_gradient(p: Polynomial) -> list[Polynomial]:
    return p.gradient()


def poly_hessian(p: Polynomial) -> list[list[Polynomial]]:
    return p.hessian()


def poly_arith(kind: str, p: Polynomial, q) -> Polynomial:
    """Binary arithmetic by name: ``add``, ``sub``, ``mul`` or ``scale``."""
    if kind == "add":
        return p + q
    if kind == "sub":
        return p - q
    if kind == "mul":
        return p * q
    if kind == "scale":
        return p.scale(float(q))
    raise ValueError(f"unknown operation {kind!r}")


def quadratic_form(M: Sequence[Sequence[Polynomial]], v: Sequence[Polynomial]) -> Polynomial:
    """v^T M v for a polynomial matrix and polynomial vector in the same ring."""
    out = Polynomial.zero(v[0].n)
    k = len(v)
    for a in range(k):
        for b in range(k):
            if not M[a][b].is_zero():
                out = out + M[a][b] * v[a] * v[b]
    return out


def dot(u: Sequence[Polynomial], v: Sequence[Polynomial]) -> Polynomial:
    out = Polynomial.zero(u[0].n)
    for a, b in zip(u, v):
        out = out + a * b
    return out


def eval_gradient(p: Polynomial, x) -> np.ndarray:
    return np.array([g.eval(x) for g in p.gradient()])


def eval_hessian(p: Polynomial, x) -> np.ndarray:
    H = p.hessian()
    return np.array([[h.eval(x) for h in row] for row in H])


def n_monomials(n: int, d: int) -> int:
    return math.comb(n + d, d)
