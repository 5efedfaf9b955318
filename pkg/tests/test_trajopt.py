import numpy as np
import pytest

from convexinner.fixtures import waterdrop
from convexinner.trajopt import (DEMO_X0, BSplineBasis, bspline_eval, build_flat_program, demo_program,
                                 resample_violation, solve_flat_program, waterdrop_inner)


def test_basis_partition_of_unity():
    b = BSplineBasis(0.0, 2.5, 5)
    assert b.size == 8
    ts = np.linspace(0, 2.5, 37)
    ones = np.ones(b.size)
    assert np.allclose(bspline_eval(b, ones, ts), 1.0)
    assert np.allclose(bspline_eval(b, ones, ts, 1), 0.0, atol=1e-12)
    assert np.allclose(bspline_eval(b, ones, ts, 2), 0.0, atol=1e-10)


def test_clamped_ends():
    b = BSplineBasis(0.0, 2.5, 5)
    alpha = np.random.default_rng(0).standard_normal(b.size)
    assert bspline_eval(b, alpha, 0.0) == pytest.approx(alpha[0])
    assert bspline_eval(b, alpha, 2.5) == pytest.approx(alpha[-1])


def test_derivatives_match_differences():
    b = BSplineBasis(0.0, 2.5, 5)
    alpha = np.random.default_rng(1).standard_normal(b.size)
    t, h = 1.23, 1e-5
    d1 = (bspline_eval(b, alpha, t + h) - bspline_eval(b, alpha, t - h)) / (2 * h)
    d2 = (bspline_eval(b, alpha, t + h, 1) - bspline_eval(b, alpha, t - h, 1)) / (2 * h)
    assert bspline_eval(b, alpha, t, 1) == pytest.approx(d1, rel=1e-6)
    assert bspline_eval(b, alpha, t, 2) == pytest.approx(d2, rel=1e-6)


def test_c2_at_interior_knots():
    b = BSplineBasis(0.0, 1.0, 5)
    alpha = np.random.default_rng(2).standard_normal(b.size)
    for k in b.knots[4:-4]:
        for d in (0, 1, 2):
            lo, hi = bspline_eval(b, alpha, k - 1e-9, d), bspline_eval(b, alpha, k + 1e-9, d)
            assert lo == pytest.approx(hi, abs=1e-6 * (1 + abs(hi)))


def test_eval_errors():
    b = BSplineBasis(0.0, 1.0)
    with pytest.raises(ValueError):
        bspline_eval(b, np.ones(b.size), 1.5)
    with pytest.raises(ValueError):
        bspline_eval(b, np.ones(b.size), 0.5, 3)
    with pytest.raises(ValueError):
        BSplineBasis(1.0, 0.0)


def test_program_shapes():
    assert waterdrop().ineqs[0].eval(DEMO_X0) == pytest.approx(-0.0043)
    fp = build_flat_program(DEMO_X0, (-0.3, -0.8), 0.0, 2.5, 1, waterdrop())
    assert fp.times.tolist() == [1.25] and fp.n_path == 1
    fp = build_flat_program(DEMO_X0, (-0.3, -0.8), 0.0, 2.5, 7, waterdrop_inner())
    assert fp.n_path == 21
    with pytest.raises(ValueError):
        build_flat_program((0.5, 0.5), (-0.3, -0.8), 0.0, 2.5, 10, waterdrop())
    with pytest.raises(ValueError):
        build_flat_program(DEMO_X0, (-0.3, -0.8), 0.0, 2.5, 0, waterdrop())


def test_path_jacobian_matches_differences():
    fp = demo_program("convex", 12)
    a = np.random.default_rng(3).standard_normal(fp.basis.size) * 0.1
    J = fp.path_jacobian(a)
    h = 1e-6
    fd = np.column_stack([(fp.path_values(a + h * e) - fp.path_values(a - h * e)) / (2 * h)
                          for e in np.eye(fp.basis.size)])
    assert np.allclose(J, fd, atol=1e-6)


@pytest.mark.parametrize("N", [10, 100])
def test_cost_ordering_and_feasibility(N):
    free = solve_flat_program(demo_program("unconstrained", N))
    nonconvex_fp = demo_program("nonconvex", N)
    nonconvex = solve_flat_program(nonconvex_fp, starts=5)
    convex_fp = demo_program("convex", N)
    convex = solve_flat_program(convex_fp)
    assert free.cost <= nonconvex.cost + 1e-9 <= convex.cost + 2e-9
    for fp, r in ((nonconvex_fp, nonconvex), (convex_fp, convex)):
        assert r.max_constraint_violation <= 1e-6
        assert r.boundary_error <= 1e-8
        assert resample_violation(fp, r.alpha_star) <= 2e-2


def test_unweighted_cost_scales():
    a = solve_flat_program(demo_program("convex", 20))
    b = solve_flat_program(demo_program("convex", 20, weighted=False))
    assert b.cost == pytest.approx(a.cost * 20 / 2.5, rel=1e-6)


def test_multistart_deterministic():
    fp = demo_program("nonconvex", 20)
    r1 = solve_flat_program(fp, starts=3, seed=7)
    r2 = solve_flat_program(fp, starts=3, seed=7)
    assert np.array_equal(r1.alpha_star, r2.alpha_star)
