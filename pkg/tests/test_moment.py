import numpy as np
import pytest

from convexinner.curvature import PolyOptProblem, build_curvature_problem
from convexinner.fixtures import egg, hyperbola, waterdrop
from convexinner.moment import (MomentBasis, SdpProblem, build_relaxation, dirac_moments,
                                min_relaxation_order, moment_matrix)
from convexinner.polycore import Polynomial
from convexinner.sdp import solve_sdp


def square_problem():
    x = Polynomial.variable(1, 0)
    return PolyOptProblem(1, x * x)


def test_min_order():
    assert min_relaxation_order(build_curvature_problem(hyperbola(), 0)) == 1
    assert min_relaxation_order(build_curvature_problem(egg(), 0)) == 2
    assert min_relaxation_order(build_curvature_problem(waterdrop(), 0)) == 2


def test_square_relaxation():
    R = build_relaxation(square_problem(), 1)
    assert R.block_sizes[0] == 2
    v = np.zeros(R.nvars)
    v[R.moment_index[(1,)]] = 0.3
    v[R.moment_index[(2,)]] = 0.5
    v[R.moment_index[(0,)]] = 1.0
    assert np.allclose(moment_matrix(R, v), [[1, 0.3], [0.3, 0.5]])
    assert R.objective(v) == pytest.approx(0.5)
    sol = solve_sdp(R)
    assert sol.ok and abs(sol.primal_obj) < 1e-6


def test_dirac_moments_are_feasible():
    # moments of a feasible point satisfy every block of the relaxation
    prob = build_curvature_problem(hyperbola(), 0)
    R = build_relaxation(prob, 2, reduce_kernel=False)
    z = np.array([1.0, 1.0, 1 / np.sqrt(2), -1 / np.sqrt(2)])
    v = dirac_moments(R.moment_monos, z)
    assert np.abs(R.A_eq @ v - R.b_eq).max() < 1e-12
    for b in range(len(R.blocks)):
        assert np.linalg.eigvalsh(R.psd_block(b, v))[0] > -1e-12
    assert R.objective(v) == pytest.approx(-1.0)


def test_kernel_reduction_keeps_value():
    prob = build_curvature_problem(hyperbola(), 0)
    full = solve_sdp(build_relaxation(prob, 2, reduce_kernel=False))
    red = solve_sdp(build_relaxation(prob, 2))
    assert full.ok and red.ok
    assert red.primal_obj == pytest.approx(full.primal_obj, abs=1e-5)
    assert red.primal_obj == pytest.approx(-1.0, abs=1e-5)


def test_text_format_roundtrip(tmp_path):
    R = build_relaxation(build_curvature_problem(egg(), 0), 2)
    R.write(tmp_path / "r.sdp")
    T = SdpProblem.read(tmp_path / "r.sdp")
    assert T.nvars == R.nvars and T.block_sizes == R.block_sizes
    v = np.random.default_rng(1).standard_normal(R.nvars)
    assert T.objective(v) == pytest.approx(R.objective(v))
    for b in range(len(R.blocks)):
        assert np.allclose(T.psd_block(b, v), R.psd_block(b, v))
    assert np.allclose(T.A_eq.toarray(), R.A_eq.toarray())


def test_basis_sizes():
    B = MomentBasis(2, 3)
    assert len(B) == 10 and B.size_upto(1) == 3
    assert np.allclose(B.evaluate([2.0, 3.0])[:3], [1, 2, 3])
