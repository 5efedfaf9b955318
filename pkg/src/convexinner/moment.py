"""Moment (Lasserre) relaxations of polynomial programs as block SDPs.

Pseudo-moments ``m_a`` are indexed by all monomials of degree <= 2k in
graded-lex order.  A relaxation of order k has

* one moment matrix ``M_k(m)`` (PSD),
* one localizing matrix of order ``k - ceil(deg g / 2)`` for each ``-g`` with
  ``g <= 0`` (PSD),
* linear constraints ``L(h * x^b) = 0`` for every equality ``h = 0`` and every
  ``|b| <= 2k - deg h``,
* the normalization ``m_0 = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .curvature import PolyOptProblem
from .polycore import Polynomial, monomials_upto


@dataclass
class MomentBasis:
    """Graded-lex monomials of degree <= ``order`` in ``nvars`` variables."""

    nvars: int
    order: int
    monos: list[tuple[int, ...]] = field(init=False)

    def __post_init__(self):
        self.monos = monomials_upto(self.nvars, self.order)

    def __len__(self):
        return len(self.monos)

    def size_upto(self, d: int) -> int:
        """Number of leading monomials with degree <= d."""
        return math.comb(self.nvars + d, d)

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.array([np.prod(z ** np.array(e)) for e in self.monos])


@dataclass
class SdpProblem:
    """``min c'v + c0`` s.t. ``A_eq v = b_eq`` and ``F_b(v) >= 0`` (PSD) for each block.

    ``blocks[b]`` is a sparse matrix of shape (n_b * n_b, nvars) with
    ``vec(F_b(v)) = blocks[b] @ v`` (row-major, both triangles stored).
    """

    nvars: int
    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    blocks: list[sp.csr_matrix]
    block_sizes: list[int]
    c0: float = 0.0
    # moment bookkeeping, None for hand-built problems
    moment_index: dict | None = None
    moment_monos: list | None = None
    basis: MomentBasis | None = None
    order: int | None = None
    block_labels: list[str] = field(default_factory=list)
    # optional per-block column bases U_b; the PSD constraint is then U_b' F_b(v) U_b >= 0
    projections: list[np.ndarray | None] | None = None

    def __post_init__(self):
        if self.projections is None:
            self.projections = [None] * len(self.blocks)

    def block_matrix(self, b: int, v) -> np.ndarray:
        """Full (unprojected) block ``F_b(v)``."""
        n = self.block_sizes[b]
        return (self.blocks[b] @ np.asarray(v, dtype=float)).reshape(n, n)

    def psd_block(self, b: int, v) -> np.ndarray:
        """The matrix actually constrained to be PSD."""
        F = self.block_matrix(b, v)
        U = self.projections[b]
        return F if U is None else U.T @ F @ U

    def objective(self, v) -> float:
        return float(self.c @ v + self.c0)

    def scaled(self, lam: float) -> "SdpProblem":
        """Same feasible set, objective multiplied by ``lam``."""
        return SdpProblem(self.nvars, self.c * lam, self.A_eq, self.b_eq, self.blocks,
                          self.block_sizes, self.c0 * lam, self.moment_index,
                          self.moment_monos, self.basis, self.order, list(self.block_labels),
                          list(self.projections))

    # text format
    def write(self, path) -> None:
        Path(path).write_text(format_sdp(self))

    @classmethod
    def read(cls, path) -> "SdpProblem":
        return parse_sdp(Path(path).read_text())


def min_relaxation_order(prob: PolyOptProblem) -> int:
    return max(1, math.ceil(prob.max_degree / 2))


def dirac_moments(monos, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.array([np.prod(z ** np.array(e)) for e in monos])


def _kernel_complement(eqs, nvars: int, order: int) -> np.ndarray | None:
    """Orthonormal basis of the complement of span{coef(h x^b)} in degree <= order.

    The equality constraints force every localizing matrix of this order to
    annihilate those coefficient vectors, so restricting the PSD constraint to
    the complement is exact and restores a strictly feasible moment side.
    """
    bas = monomials_upto(nvars, order)
    pos = {e: i for i, e in enumerate(bas)}
    vecs = []
    for h in eqs:
        if h.degree > order:
            continue
        for b in monomials_upto(nvars, order - h.degree):
            v = np.zeros(len(bas))
            for g, cg in h.items():
                v[pos[tuple(u + w for u, w in zip(g, b))]] += cg
            vecs.append(v)
    if not vecs:
        return None
    K = np.array(vecs).T
    U, sv, _ = np.linalg.svd(K, full_matrices=True)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    return U[:, rank:]


def build_relaxation(prob: PolyOptProblem, k: int, reduce_kernel: bool = True) -> SdpProblem:
    """Order-``k`` moment relaxation of ``prob``.

    With ``reduce_kernel`` the PSD blocks are compressed onto the complement
    of the kernel implied by the equality constraints (same feasible set).
    """
    kmin = min_relaxation_order(prob)
    if k < kmin:
        raise ValueError(f"relaxation order {k} below the minimum {kmin}")
    N = prob.nvars
    monos = monomials_upto(N, 2 * k)
    index = {e: i for i, e in enumerate(monos)}
    M = len(monos)

    def add(a, b):
        return tuple(u + v for u, v in zip(a, b))

    basis = MomentBasis(N, k)
    blocks, sizes, labels, projs = [], [], [], []

    def localizing(weight: Polynomial, order: int):
        bas = monomials_upto(N, order)
        n = len(bas)
        rows, cols, vals = [], [], []
        wt = list(weight.items())
        for a in range(n):
            for b in range(n):
                ab = add(bas[a], bas[b])
                for g, cg in wt:
                    rows.append(a * n + b)
                    cols.append(index[add(ab, g)])
                    vals.append(cg)
        P = sp.csr_matrix((vals, (rows, cols)), shape=(n * n, M))
        P.sum_duplicates()
        return P, n

    orders = [k] + [k - math.ceil(g.degree / 2) for g in prob.ineqs]
    weights = [Polynomial.constant(N, 1.0)] + [-g for g in prob.ineqs]
    for j, (order, wt) in enumerate(zip(orders, weights)):
        P, n = localizing(wt, order)
        blocks.append(P)
        sizes.append(n)
        labels.append("moment" if j == 0 else f"ineq{j - 1}")
        projs.append(_kernel_complement(prob.eqs, N, order) if reduce_kernel else None)

    rows, cols, vals, rhs = [0], [0], [1.0], [1.0]
    r = 1
    for h in prob.eqs:
        for b in monomials_upto(N, 2 * k - h.degree):
            for g, cg in h.items():
                rows.append(r)
                cols.append(index[add(b, g)])
                vals.append(cg)
            rhs.append(0.0)
            r += 1
    A_eq = sp.csr_matrix((vals, (rows, cols)), shape=(r, M))
    A_eq.sum_duplicates()

    c = np.zeros(M)
    for e, ce in prob.objective.items():
        c[index[e]] += ce
    return SdpProblem(M, c, A_eq, np.array(rhs), blocks, sizes, 0.0, index, monos,
                      basis, k, labels, projs)


def moment_matrix(prob: SdpProblem, v, order: int | None = None) -> np.ndarray:
    """Moment matrix block, optionally truncated to monomials of degree <= order."""
    Mk = prob.block_matrix(0, v)
    if order is None:
        return Mk
    s = prob.basis.size_upto(order)
    return Mk[:s, :s]


# --- sparse text format -----------------------------------------------------
#
#   nvars <M>
#   nblocks <B>
#   blocks <n_1> ... <n_B>
#   const <c0>
#   c <var> <value>                 (1-based var)
#   eq <row> <var> <value>          (1-based row and var)
#   rhs <row> <value>
#   entry <block> <i> <j> <var> <value>   (1-based, i <= j only)
#   proj <block> <ncols>            followed by `u <block> <i> <j> <value>` lines
#
# Lines starting with '#' are comments.

def _num(v) -> str:
    # shortest round-trip repr of a plain float
    return repr(float(v))


def format_sdp(prob: SdpProblem) -> str:
    out = ["# convexinner sparse SDP v1",
           f"nvars {prob.nvars}",
           f"nblocks {len(prob.blocks)}",
           "blocks " + " ".join(str(n) for n in prob.block_sizes),
           f"const {_num(prob.c0)}"]
    for i in np.flatnonzero(prob.c):
        out.append(f"c {i + 1} {_num(prob.c[i])}")
    A = prob.A_eq.tocoo()
    for r, cidx, v in zip(A.row, A.col, A.data):
        out.append(f"eq {r + 1} {cidx + 1} {_num(v)}")
    for r, v in enumerate(prob.b_eq):
        if v != 0.0:
            out.append(f"rhs {r + 1} {_num(v)}")
    out.append(f"neq {prob.A_eq.shape[0]}")
    for b, (P, n) in enumerate(zip(prob.blocks, prob.block_sizes)):
        Pc = P.tocoo()
        for flat, var, v in zip(Pc.row, Pc.col, Pc.data):
            i, j = divmod(int(flat), n)
            if i <= j:
                out.append(f"entry {b + 1} {i + 1} {j + 1} {var + 1} {_num(v)}")
    for b, U in enumerate(prob.projections):
        if U is None:
            continue
        out.append(f"proj {b + 1} {U.shape[1]}")
        for (i, j), v in np.ndenumerate(U):
            if v != 0.0:
                out.append(f"u {b + 1} {i + 1} {j + 1} {_num(v)}")
    return "\n".join(out) + "\n"


def parse_sdp(text: str) -> SdpProblem:
    nvars = nblocks = neq = None
    sizes: list[int] = []
    c0 = 0.0
    cvals, eqs, rhs, entries = {}, [], {}, []
    proj_cols, proj_vals = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        try:
            key = tok[0]
            if key == "nvars":
                nvars = int(tok[1])
            elif key == "nblocks":
                nblocks = int(tok[1])
            elif key == "blocks":
                sizes = [int(t) for t in tok[1:]]
            elif key == "const":
                c0 = float(tok[1])
            elif key == "c":
                cvals[int(tok[1]) - 1] = float(tok[2])
            elif key == "eq":
                eqs.append((int(tok[1]) - 1, int(tok[2]) - 1, float(tok[3])))
            elif key == "rhs":
                rhs[int(tok[1]) - 1] = float(tok[2])
            elif key == "neq":
                neq = int(tok[1])
            elif key == "proj":
                proj_cols[int(tok[1]) - 1] = int(tok[2])
            elif key == "u":
                proj_vals.append((int(tok[1]) - 1, int(tok[2]) - 1, int(tok[3]) - 1,
                                  float(tok[4])))
            elif key == "entry":
                entries.append((int(tok[1]) - 1, int(tok[2]) - 1, int(tok[3]) - 1,
                                int(tok[4]) - 1, float(tok[5])))
            else:
                raise ValueError(f"unknown keyword {key!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if nvars is None or nblocks is None or len(sizes) != nblocks:
        raise ValueError("missing or inconsistent header")
    if neq is None:
        neq = 1 + max([r for r, _, _ in eqs] + list(rhs) + [-1])
    c = np.zeros(nvars)
    for i, v in cvals.items():
        c[i] = v
    if eqs:
        r, col, v = zip(*eqs)
    else:
        r, col, v = (), (), ()
    A_eq = sp.csr_matrix((v, (r, col)), shape=(neq, nvars))
    b_eq = np.zeros(neq)
    for i, v in rhs.items():
        b_eq[i] = v
    per_block = [([], [], []) for _ in range(nblocks)]
    for b, i, j, var, v in entries:
        n = sizes[b]
        rows, cols, vals = per_block[b]
        rows.append(i * n + j)
        cols.append(var)
        vals.append(v)
        if i != j:
            rows.append(j * n + i)
            cols.append(var)
            vals.append(v)
    blocks = [sp.csr_matrix((vals, (rows, cols)), shape=(n * n, nvars))
              for (rows, cols, vals), n in zip(per_block, sizes)]
    projs = [None] * nblocks
    for b, ncols in proj_cols.items():
        projs[b] = np.zeros((sizes[b], ncols))
    for b, i, j, v in proj_vals:
        projs[b][i, j] = v
    return SdpProblem(nvars, c, A_eq, b_eq, blocks, sizes, c0, projections=projs)
