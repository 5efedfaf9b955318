import json

import numpy as np
import pytest

from convexinner.fixtures import egg, empty, hyperbola, waterdrop
from convexinner.polycore import Polynomial
from convexinner.semialg import SemialgebraicSet, auto_bbox, membership, membership_many, rasterize


def slab():
    return hyperbola().add(Polynomial.affine([1.0, 1.0], -2.0), Polynomial.affine([-1.0, -1.0], -2.0))


def test_membership_examples():
    assert membership(waterdrop(), [0.0, 0.0])
    assert not membership(hyperbola(), [2.0, 2.0])
    assert membership(slab(), [1.0, 1.0])
    assert not membership(slab(), [1.5, 1.0])


def test_membership_tolerance():
    S = waterdrop()
    assert not membership(S, [0.0, 0.01])
    assert membership(S, [0.0, 0.01], tol=1e-5)
    with pytest.raises(ValueError):
        membership(S, [0, 0], tol=-1)


def test_ball_is_a_constraint():
    assert not membership(hyperbola(10.0), [11.0, 0.0])
    assert membership(hyperbola(None), [11.0, 0.0])


def test_raster_examples():
    R = rasterize(egg(), [(-1, 1), (-1, 1)], 101)
    assert R.mask.any()
    i, j = 50, 25  # (0, -0.5)
    assert np.allclose(R.points()[i, j], [0.0, -0.5]) and R.mask[i, j]
    assert not rasterize(empty(), [(-1, 1), (-1, 1)], 50).mask.any()


def test_raster_errors():
    with pytest.raises(ValueError):
        rasterize(egg(), [(-1, 1)], 10)
    with pytest.raises(ValueError):
        rasterize(egg(), [(-1, 1), (-1, 1)], 1)


def test_membership_many_agrees(tmp_path):
    S = waterdrop()
    pts = np.random.default_rng(0).uniform(-1, 1, (200, 2))
    assert list(membership_many(S, pts)) == [membership(S, x) for x in pts]


def test_json_roundtrip(tmp_path):
    S = slab()
    path = tmp_path / "s.json"
    S.save(path)
    T = SemialgebraicSet.load(path)
    assert T == S and T.ball_radius == 10.0
    with pytest.raises(ValueError):
        SemialgebraicSet.from_json({"ineqs": []})
    json.loads(path.read_text())


def test_raster_csv(tmp_path):
    R = rasterize(waterdrop(), auto_bbox(waterdrop()), 20)
    R.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,inside" and len(lines) == 401


def test_auto_bbox_covers_set():
    box = auto_bbox(waterdrop())
    assert box[1][0] < -1.0 < 0.0 < box[1][1]
