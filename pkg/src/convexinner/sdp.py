"""Primal-dual interior-point solver for small dense block SDPs.

The problem handed in is an ``SdpProblem``: free variables ``v`` with linear
equalities and PSD blocks linear in ``v``.  Equalities are eliminated once
(``v = v0 + N z`` with orthonormal ``N``), which leaves the LMI problem

    (D)  max  b'z   s.t.  Z = C - sum_i z_i A_i  >= 0

with ``A_i = -F(N e_i)``, ``C = F(v0)`` and ``b = -N'c``.  Its conic dual is

    (P)  min  <C, X>  s.t.  <A_i, X> = b_i,  X >= 0.

Iterations follow the Nesterov-Todd search direction (HKM optional) with a
Mehrotra predictor-corrector from scaled-identity starting blocks.  The
X-side step is projected back onto A(X) = b with the constant Gram matrix of
A, which keeps that residual at roundoff level on degenerate moment problems.
"""
from __future__ import annotations

import enum
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .moment import SdpProblem

log = logging.getLogger(__name__)

DEFAULT_TOL = float(os.environ.get("CONVEXINNER_SDP_TOL", "1e-8"))
DEFAULT_MAX_ITERS = 200
REPORT_TOL = 1e-7
STALL_ITERS = 8
# a phase-one margin below -INFEASIBLE_MARGIN certifies infeasibility
INFEASIBLE_MARGIN = 1e-6


class SdpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass
class SdpSolution:
    status: SdpStatus
    primal_obj: float  # objective of the moment (v) side
    dual_obj: float    # objective of the multiplier (X) side; a lower bound when feasible
    moment_values: np.ndarray
    block_matrices: list[np.ndarray]
    dual_blocks: list[np.ndarray]
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status is SdpStatus.OPTIMAL


@dataclass
class _Reduced:
    """The equality-free LMI form of an SdpProblem."""

    v0: np.ndarray
    N: np.ndarray
    b: np.ndarray
    C: list[np.ndarray]
    Pr: list[np.ndarray]        # per block, (r*r, m): vec(U' F_b(N z) U) = Pr z
    Pcsc: list                  # per block sparse P (n*n, M) in CSC
    U: list                     # per block projection (n, r) or None
    full_sizes: list[int]
    sizes: list[int]
    cv0: float


def _reduce(prob: SdpProblem, tol: float) -> _Reduced | None:
    A = prob.A_eq.toarray()
    b_eq = prob.b_eq
    M = prob.nvars
    if A.shape[0] == 0:
        v0 = np.zeros(M)
        N = np.eye(M)
    else:
        Q, R, piv = sla.qr(A.T, mode="full", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > max(A.shape) * np.finfo(float).eps * max(diag[0], 1.0) * 10))
        v0, *_ = np.linalg.lstsq(A, b_eq, rcond=None)
        if np.linalg.norm(A @ v0 - b_eq, np.inf) > 1e3 * tol * (1 + np.linalg.norm(b_eq, np.inf)):
            return None
        N = Q[:, rank:]
        # keep v0 orthogonal to the free directions
        v0 = v0 - N @ (N.T @ v0)
    m = N.shape[1]
    Pr, C, Pcsc, Us, full, sizes = [], [], [], [], [], []
    kept = [k for k, U in enumerate(prob.projections) if U is None or U.shape[1]]
    for k in kept:
        P, n, U = prob.blocks[k], prob.block_sizes[k], prob.projections[k]
        Pc = P.tocsc()
        PN = np.asarray(P @ N).reshape(n, n, m)
        Cb = (P @ v0).reshape(n, n)
        if U is not None:
            PN = np.einsum("ai,abk,bj->ijk", U, PN, U, optimize=True)
            Cb = U.T @ Cb @ U
        r = Cb.shape[0]
        Pcsc.append(Pc)
        Pr.append(PN.reshape(r * r, m))
        C.append(0.5 * (Cb + Cb.T))
        Us.append(U)
        full.append(n)
        sizes.append(r)
    return _Reduced(v0, N, -(N.T @ prob.c), C, Pr, Pcsc, Us, full, sizes,
                    float(prob.c @ v0 + prob.c0))


def _Aop(red: _Reduced, X: list[np.ndarray]) -> np.ndarray:
    """z-vector with entries <A_i, X>."""
    out = np.zeros(red.N.shape[1])
    for Pr, Xb in zip(red.Pr, X):
        out -= Pr.T @ Xb.ravel()
    return out


def _ATop(red: _Reduced, z: np.ndarray) -> list[np.ndarray]:
    """sum_i z_i A_i, blockwise."""
    out = []
    for Pr, n in zip(red.Pr, red.sizes):
        F = (Pr @ z).reshape(n, n)
        out.append(-0.5 * (F + F.T))
    return out


def _schur(red: _Reduced, X: list[np.ndarray], Zinv: list[np.ndarray]) -> np.ndarray:
    """Schur complement H_ij = tr(A_i X A_j Z^-1) for the HKM direction.

    Evaluated on the sparse unprojected blocks: with A = U'FU the trace equals
    tr(F_i (U X U') F_j (U Z^-1 U')).
    """
    m = red.N.shape[1]
    H = np.zeros((m, m))
    for Pc, n, U, Xb, Zi in zip(red.Pcsc, red.full_sizes, red.U, X, Zinv):
        if U is not None:
            Xb = U @ Xb @ U.T
            Zi = U @ Zi @ U.T
        cols = np.flatnonzero(np.diff(Pc.indptr))
        W = np.empty((len(cols), n * n))
        for k, a in enumerate(cols):
            lo, hi = Pc.indptr[a], Pc.indptr[a + 1]
            r, c = np.divmod(Pc.indices[lo:hi], n)
            W[k] = ((Xb[:, r] * Pc.data[lo:hi]) @ Zi[c, :]).ravel()
        HB = np.asarray(Pc[:, cols].T @ W.T)  # (cols, cols): <B_beta, X B_alpha Zinv>
        Nc = red.N[cols]
        H += Nc.T @ HB @ Nc
    return 0.5 * (H + H.T)


def _max_step(Mat: np.ndarray, dM: np.ndarray) -> float:
    """Largest alpha with Mat + alpha dM PSD (Mat must be PD)."""
    try:
        L = np.linalg.cholesky(Mat)
    except np.linalg.LinAlgError:
        return 0.0
    Li = sla.solve_triangular(L, np.eye(len(L)), lower=True)
    T = Li @ dM @ Li.T
    lam = np.linalg.eigvalsh(0.5 * (T + T.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _inner(A: list[np.ndarray], B: list[np.ndarray]) -> float:
    return float(sum(np.vdot(a, b) for a, b in zip(A, B)))


def _fro(A: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(np.vdot(a, a) for a in A)))


def _solve_spd(H: np.ndarray, r: np.ndarray) -> np.ndarray:
    try:
        cf = sla.cho_factor(H, check_finite=False)
        return sla.cho_solve(cf, r, check_finite=False)
    except np.linalg.LinAlgError:
        reg = 1e-14 * max(1.0, np.abs(np.diag(H)).max())
        return np.linalg.lstsq(H + reg * np.eye(len(H)), r, rcond=None)[0]


def _ipm(red: _Reduced, tol: float, max_iters: int, verbose: bool, nt: bool = True) -> dict:
    m = red.N.shape[1]
    sizes = red.sizes
    ntot = sum(sizes)
    b, C = red.b, red.C

    normA = np.sqrt(sum(np.sum(Pr ** 2, axis=0) for Pr in red.Pr)) if m else np.zeros(0)
    normC = _fro(C)
    normb = np.linalg.norm(b)
    xi = max(10.0, np.sqrt(max(sizes)), *(np.sqrt(max(sizes)) * (1 + np.abs(b)) / (1 + normA)))
    eta = max(10.0, np.sqrt(max(sizes)), normC, *(normA if m else [0.0]))
    X = [xi * np.eye(n) for n in sizes]
    Z = [eta * np.eye(n) for n in sizes]
    y = np.zeros(m)
    # Gram matrix of the constraint operator, used to pull dX back onto A(dX) = rp
    gram = None
    if m:
        G = sum(Pr.T @ Pr for Pr in red.Pr)
        try:
            gram = sla.cho_factor(G + 1e-14 * np.trace(G) / m * np.eye(m), check_finite=False)
        except np.linalg.LinAlgError:
            gram = None

    history = []
    status = SdpStatus.NUMERICAL_FAILURE
    it = 0
    best = None  # (error, iteration, X, y, Z)
    for it in range(1, max_iters + 1):
        ATy = _ATop(red, y)
        Rd = [Cb - Zb - Ab for Cb, Zb, Ab in zip(C, Z, ATy)]
        AX = _Aop(red, X)
        rp = b - AX
        mu = _inner(X, Z) / ntot
        pobj = _inner(C, X)
        dobj = float(b @ y)
        pinf = np.linalg.norm(rp) / (1 + normb)
        dinf = _fro(Rd) / (1 + normC)
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        history.append((it, red.cv0 - dobj, red.cv0 - pobj, pinf, dinf, gap))
        if verbose:
            log.info("it %3d  mom %.9e  sos %.9e  pinf %.1e dinf %.1e gap %.1e",
                     it, red.cv0 - dobj, red.cv0 - pobj, pinf, dinf, gap)
        err = max(pinf, dinf, gap)
        if best is None or err < best[0]:
            best = (err, it, [Xb.copy() for Xb in X], y.copy(), [Zb.copy() for Zb in Z])
        if err <= tol:
            status = SdpStatus.OPTIMAL
            break
        if it - best[1] >= STALL_ITERS:
            break
        # infeasibility of the moment side: X ray with A(X) ~ 0 and <C,X> < 0
        normX = _fro(X)
        if pobj < 0 and normX > 1e3:
            if np.linalg.norm(AX) / -pobj < tol * 10 and -pobj > 1 / tol:
                status = SdpStatus.INFEASIBLE
                break
        # unboundedness of the moment side: improving z ray
        if dobj > 0 and np.linalg.norm(y) > 1e3:
            Zpart = [Ab + Zb for Ab, Zb in zip(ATy, Z)]
            if _fro(Zpart) / dobj < tol * 10 and dobj > 1 / tol:
                status = SdpStatus.UNBOUNDED
                break
        if max(normX, np.linalg.norm(y)) > 1e14 / tol:
            # iterates diverged without a clean certificate
            status = SdpStatus.INFEASIBLE if pobj < 0 else SdpStatus.UNBOUNDED
            break

        try:
            Zinv, Wl = [], []
            for Xb, Zb in zip(X, Z):
                L = np.linalg.cholesky(Zb)
                Li = sla.solve_triangular(L, np.eye(len(L)), lower=True)
                Zinv.append(Li.T @ Li)
                if nt:
                    Lx = np.linalg.cholesky(Xb)
                    _, sv, Vt = np.linalg.svd(L.T @ Lx)
                    G = Lx @ (Vt.T / np.sqrt(sv))
                    Wl.append(G @ G.T)
        except np.linalg.LinAlgError:
            break
        # scaling pair (P, Q): dX = comp - sym(P dZ Q); HKM uses (X, Z^-1), NT uses (W, W)
        P, Q = (Wl, Wl) if nt else (X, Zinv)
        H = _schur(red, P, Q)
        XRdZi = [Pb @ Rb @ Qb for Pb, Rb, Qb in zip(P, Rd, Q)]

        def direction(sigma_mu, corr):
            comp = [sigma_mu * Zi - Xb for Zi, Xb in zip(Zinv, X)]
            if corr is not None:
                comp = [c - dx @ dz @ Zi for c, (dx, dz), Zi in zip(comp, corr, Zinv)]
            rhs = rp - _Aop(red, [c - XR for c, XR in zip(comp, XRdZi)])
            dy = _solve_spd(H, rhs)
            dy += _solve_spd(H, rhs - H @ dy)
            ATdy = _ATop(red, dy)
            dZ = [Rb - Ab for Rb, Ab in zip(Rd, ATdy)]
            dX = []
            for cb, Pb, dz, Qb in zip(comp, P, dZ, Q):
                d = cb - Pb @ dz @ Qb
                dX.append(0.5 * (d + d.T))
            return dX, dy, dZ

        def project(dX):
            # pull dX back onto A(dX) = rp with a correction X A*(t) X, which is
            # small in the metric of X and so rarely shortens the step
            r = rp - _Aop(red, dX)
            if np.linalg.norm(r) <= 0.1 * tol * (1 + normb):
                return dX
            HX = _schur(red, X, X)
            t = _solve_spd(HX, r)
            corr = [Xb @ a @ Xb for Xb, a in zip(X, _ATop(red, t))]
            return [d + 0.5 * (c + c.T) for d, c in zip(dX, corr)]

        def steps(dX, dZ):
            ap = min(_max_step(Xb, d) for Xb, d in zip(X, dX))
            ad = min(_max_step(Zb, d) for Zb, d in zip(Z, dZ))
            return ap, ad

        dXa, dya, dZa = direction(0.0, None)
        ap, ad = steps(dXa, dZa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = _inner([Xb + ap * d for Xb, d in zip(X, dXa)],
                        [Zb + ad * d for Zb, d in zip(Z, dZa)]) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        dX, dy, dZ = direction(sigma * mu, list(zip(dXa, dZa)))
        dX = project(dX)
        ap, ad = steps(dX, dZ)
        gamma = 0.9 + 0.09 * min(ap, ad, 1.0)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        if verbose:
            log.info("      sigma %.2e  steps %.2e %.2e  mu %.2e", sigma, ap, ad, mu)
        if ap < 1e-12 and ad < 1e-12:
            break
        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        y = y + ad * dy
        Z = [Zb + ad * d for Zb, d in zip(Z, dZ)]

    if status is SdpStatus.NUMERICAL_FAILURE and best is not None:
        err, _, X, y, Z = best
        # accuracy stalled; accept the best iterate if it meets the reporting tolerance
        if err <= max(tol, REPORT_TOL):
            status = SdpStatus.OPTIMAL
    else:
        err = max(history[-1][3:]) if history else np.inf
    return {"status": status, "X": X, "y": y, "Z": Z, "err": err, "it": it,
            "history": history}


def phase_one_problem(prob: SdpProblem) -> SdpProblem:
    """max t  s.t.  F_b(v) - t I >= 0 for every block,  t <= 1,  same equalities.

    Two variables are appended: t, and s pinned to 1 so that ``s - t >= 0``
    can be written as a linear block.  The optimal t is the largest uniform
    eigenvalue margin; a negative value proves the original problem infeasible.
    """
    M = prob.nvars
    t, s1 = M, M + 1
    blocks = []
    for P, n in zip(prob.blocks, prob.block_sizes):
        eye = sp.csr_matrix(np.eye(n).reshape(n * n, 1))
        blocks.append(sp.hstack([P, -eye, sp.csr_matrix((n * n, 1))], format="csr"))
    blocks.append(sp.csr_matrix(([-1.0, 1.0], ([0, 0], [t, s1])), shape=(1, M + 2)))
    A = sp.vstack([sp.hstack([prob.A_eq, sp.csr_matrix((prob.A_eq.shape[0], 2))]),
                   sp.csr_matrix(([1.0], ([0], [s1])), shape=(1, M + 2))], format="csr")
    c = np.zeros(M + 2)
    c[t] = -1.0
    return SdpProblem(M + 2, c, A, np.append(prob.b_eq, 1.0), blocks,
                      list(prob.block_sizes) + [1], 0.0,
                      block_labels=list(prob.block_labels) + ["margin"],
                      projections=list(prob.projections) + [None])


def solve_sdp(prob: SdpProblem, tol: float | None = None, max_iters: int = DEFAULT_MAX_ITERS,
              verbose: bool = False, check_infeasible: bool = True) -> SdpSolution:
    """Solve ``prob`` to relative gap and feasibility ``tol``.

    Never raises on numerical trouble; the status field carries the
    outcome and ``residuals['rel_error']`` how far from ``tol`` it stopped.
    A run that ends without convergence is followed by the phase-one problem
    (see ``phase_one_problem``); a clearly negative margin turns the status
    into infeasible.
    """
    tol = DEFAULT_TOL if tol is None else tol
    red = _reduce(prob, tol)
    if red is None:
        nan = float("nan")
        return SdpSolution(SdpStatus.INFEASIBLE, nan, nan, np.full(prob.nvars, nan), [], [],
                           {"reason": "inconsistent linear equalities"})
    run = _ipm(red, tol, max_iters, verbose)
    history = run["history"]
    margin = None
    if check_infeasible and run["status"] is SdpStatus.NUMERICAL_FAILURE:
        ph = solve_sdp(phase_one_problem(prob), tol, max_iters, check_infeasible=False)
        if ph.residuals.get("rel_error", np.inf) <= REPORT_TOL * 10:
            margin = -ph.primal_obj
            if margin < -INFEASIBLE_MARGIN:
                run["status"] = SdpStatus.INFEASIBLE

    X, y = run["X"], run["y"]
    b, C = red.b, red.C
    v = red.v0 + red.N @ y
    pobj_m = red.cv0 - float(b @ y)
    dobj_m = red.cv0 - _inner(C, X)
    dual_residual = float(np.linalg.norm(_Aop(red, X) - b, np.inf))
    blocks = [prob.psd_block(k, v) for k in range(len(prob.blocks))]
    blocks = [B for B in blocks if B.size]
    res = {
        "primal_residual": float(np.abs(prob.A_eq @ v - prob.b_eq).max(initial=0.0)),
        "dual_residual": dual_residual,
        "gap": float(abs(pobj_m - dobj_m)),
        "min_block_eig": float(min(np.linalg.eigvalsh(B)[0] for B in blocks)) if blocks else 0.0,
        "rel_error": float(run["err"]),
    }
    if margin is not None:
        res["phase_one_margin"] = float(margin)
    return SdpSolution(run["status"], pobj_m, dobj_m, v, blocks, X, res, len(history), history)


def kkt_residuals(prob: SdpProblem, sol: SdpSolution) -> dict:
    """Recompute optimality residuals from the returned blocks only.

    Uses the original (non-eliminated) data: equalities on ``v``, PSD blocks
    ``F_b(v)``, and dual feasibility of ``X`` through the adjoint of the block
    maps restricted to the null space of the equalities.
    """
    v = sol.moment_values
    eq = np.linalg.norm(prob.A_eq @ v - prob.b_eq, np.inf) if prob.A_eq.shape[0] else 0.0
    keep = [k for k in range(len(prob.blocks))
            if prob.projections[k] is None or prob.projections[k].shape[1]]
    blocks = [prob.psd_block(k, v) for k in keep]
    min_eig_primal = min(np.linalg.eigvalsh(0.5 * (B + B.T))[0] for B in blocks)
    min_eig_dual = min(np.linalg.eigvalsh(0.5 * (X + X.T))[0] for X in sol.dual_blocks)
    comp = sum(float(np.vdot(B, X)) for B, X in zip(blocks, sol.dual_blocks))
    # stationarity: c - sum_b P_b' vec(X_b) must lie in the row space of A_eq
    g = prob.c.copy()
    for k, X in zip(keep, sol.dual_blocks):
        U = prob.projections[k]
        Xf = X if U is None else U @ X @ U.T
        g -= prob.blocks[k].T @ Xf.ravel()
    A = prob.A_eq.toarray()
    if A.shape[0]:
        lam, *_ = np.linalg.lstsq(A.T, g, rcond=None)
        stat = np.linalg.norm(g - A.T @ lam, np.inf)
    else:
        stat = np.linalg.norm(g, np.inf)
    scale = 1 + abs(sol.primal_obj)
    return {
        "equality": float(eq),
        "min_eig_moment_side": float(min_eig_primal),
        "min_eig_multiplier_side": float(min_eig_dual),
        "complementarity": float(comp),
        "complementarity_rel": float(comp / scale),
        "stationarity": float(stat),
    }
