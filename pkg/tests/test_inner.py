import json

import numpy as np
import pytest

from convexinner.fixtures import egg, hyperbola
from convexinner.inner import Convexity, FinalStatus, inner_approximation, is_convex, separating_halfspace
from convexinner.polycore import Polynomial
from convexinner.semialg import rasterize
from convexinner.stability import schur3_region

import shared


def test_halfspace_hyperbola():
    p = hyperbola().ineqs[0]
    c = separating_halfspace(p, [1.0, 1.0])
    assert c.scale(np.sqrt(2)).allclose(Polynomial.affine([1.0, 1.0], -2.0), atol=1e-12)


def test_halfspace_schur3_paraboloid():
    p = schur3_region().set.ineqs[2]
    c = separating_halfspace(p, [0.0, 1.0, 0.0])
    assert c.allclose(Polynomial.affine([0.0, 1.0, 0.0], -1.0), atol=1e-9)


def test_halfspace_vanishes_at_point_and_offsets():
    p = egg().ineqs[0]
    x = np.array([0.3, -0.0942])
    assert separating_halfspace(p, x).eval(x) == pytest.approx(0.0, abs=1e-15)
    assert separating_halfspace(p, x, 0.1).eval(x) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        separating_halfspace(p, x, -1e-3)
    with pytest.raises(ValueError):
        separating_halfspace(Polynomial.variable(2, 0) ** 2, [0.0, 0.0])


def test_is_convex_egg_and_hyperbola():
    assert is_convex(egg(), max_order=3).verdict is Convexity.CONVEX
    res = is_convex(hyperbola(), max_order=3)
    assert res.verdict is Convexity.NONCONVEX
    assert res.witness["curvature"] == pytest.approx(-1.0, abs=1e-3)


def test_inner_egg_is_invariant():
    approx = shared.inner("egg")
    assert approx.cuts == [] and approx.final_status is FinalStatus.CONVEX_CERTIFIED
    assert approx.set == egg()


def test_inner_hyperbola_slab(tmp_path):
    approx = shared.inner("hyperbola")
    assert approx.final_status is FinalStatus.CONVEX_CERTIFIED
    cuts = sorted((c.scale(np.sqrt(2)) for c in approx.cuts), key=lambda c: c.coef((1, 0)))
    assert cuts[0].allclose(Polynomial.affine([-1.0, -1.0], -2.0), atol=1e-6)
    assert cuts[1].allclose(Polynomial.affine([1.0, 1.0], -2.0), atol=1e-6)
    approx.save(tmp_path / "s.json", tmp_path / "log.json")
    log = json.loads((tmp_path / "log.json").read_text())
    assert log["final_status"] == "convex_certified" and log["iterations"]


def test_inner_subset_of_set():
    approx = shared.inner("hyperbola")
    box = [(-5, 5), (-5, 5)]
    inside_bar = rasterize(approx.set, box, 200).mask
    inside = rasterize(hyperbola(), box, 200).mask
    assert not np.any(inside_bar & ~inside)


def test_inner_options_validated():
    with pytest.raises(ValueError):
        inner_approximation(egg(), eps=-1)
    with pytest.raises(ValueError):
        inner_approximation(egg(), minimizer_policy="best")
    with pytest.raises(ValueError):
        inner_approximation(egg(), max_cuts=0)


def test_first_policy_cuts_one_at_a_time():
    approx = inner_approximation(hyperbola(), eps=0.0, max_order=3, minimizer_policy="first")
    assert all(len(e.cuts) <= 1 for e in approx.log)
    assert approx.final_status is FinalStatus.CONVEX_CERTIFIED


def test_cut_budget():
    approx = inner_approximation(hyperbola(), eps=0.0, max_order=3, max_cuts=1)
    assert approx.final_status is FinalStatus.MAX_ITERS and len(approx.cuts) <= 1
