import numpy as np
import pytest
import scipy.sparse as sp

from convexinner.curvature import build_curvature_problem
from convexinner.fixtures import egg, empty, hyperbola
from convexinner.moment import SdpProblem, build_relaxation
from convexinner.sdp import SdpStatus, kkt_residuals, phase_one_problem, solve_sdp


def tiny(c=1.0):
    # min c*m s.t. [m] >= 0 with m pinned to the half-line by the block
    return SdpProblem(1, np.array([c]), sp.csr_matrix((0, 1)), np.zeros(0),
                      [sp.csr_matrix(np.array([[1.0]]))], [1])


def test_one_by_one_block():
    sol = solve_sdp(tiny())
    assert sol.ok and abs(sol.primal_obj) < 1e-7


def test_unbounded_is_not_optimal():
    sol = solve_sdp(tiny(-1.0), max_iters=60)
    assert sol.status is not SdpStatus.OPTIMAL


def test_egg_order3_value():
    sol = solve_sdp(build_relaxation(build_curvature_problem(egg(), 0), 3))
    assert sol.ok
    assert sol.primal_obj == pytest.approx(2.0, abs=1e-3)
    assert sol.dual_obj == pytest.approx(sol.primal_obj, abs=1e-6)


def test_infeasible_relaxation_detected():
    sol = solve_sdp(build_relaxation(build_curvature_problem(empty(), 0), 1))
    assert sol.status is SdpStatus.INFEASIBLE


def test_inconsistent_equalities():
    prob = SdpProblem(1, np.array([1.0]), sp.csr_matrix(np.array([[1.0], [1.0]])),
                      np.array([1.0, 2.0]), [sp.csr_matrix(np.array([[1.0]]))], [1])
    assert solve_sdp(prob).status is SdpStatus.INFEASIBLE


def test_phase_one_shape():
    R = build_relaxation(build_curvature_problem(egg(), 0), 2)
    P = phase_one_problem(R)
    assert P.nvars == R.nvars + 2
    assert len(P.blocks) == len(R.blocks) + 1


@pytest.mark.parametrize("name,order", [("egg", 2), ("egg", 3), ("hyperbola", 2)])
def test_kkt_residuals_small(name, order):
    S = {"egg": egg(), "hyperbola": hyperbola()}[name]
    R = build_relaxation(build_curvature_problem(S, 0), order)
    sol = solve_sdp(R)
    k = kkt_residuals(R, sol)
    assert k["equality"] <= 1e-6
    assert k["min_eig_moment_side"] >= -1e-6
    assert k["min_eig_multiplier_side"] >= -1e-6
    assert abs(k["complementarity_rel"]) <= 1e-6
    assert k["stationarity"] <= 1e-6


def test_matches_cvxopt_reference():
    cvxopt = pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers
    import scipy.linalg as sla

    R = build_relaxation(build_curvature_problem(egg(), 0), 2, reduce_kernel=False)
    A = R.A_eq.toarray()
    _, Rr, piv = sla.qr(A.T, pivoting=True)
    rank = int((np.abs(np.diag(Rr)) > 1e-9).sum())
    rows = sorted(piv[:rank])
    Gs = [matrix(-P.toarray()) for P in R.blocks]
    hs = [matrix(np.zeros((n, n))) for n in R.block_sizes]
    solvers.options.update(show_progress=False, abstol=1e-9, reltol=1e-9, feastol=1e-9)
    ref = solvers.sdp(matrix(R.c), Gs=Gs, hs=hs, A=matrix(A[rows]), b=matrix(R.b_eq[rows]))
    ours = solve_sdp(build_relaxation(build_curvature_problem(egg(), 0), 2))
    assert ref["status"] == "optimal"
    assert ours.primal_obj == pytest.approx(ref["primal objective"] + R.c0, abs=1e-5)
