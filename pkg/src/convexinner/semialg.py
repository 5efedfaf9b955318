"""Basic closed semialgebraic sets {x : p_i(x) <= 0} and grid rasters of them."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .polycore import Polynomial


@dataclass(frozen=True)
class SemialgebraicSet:
    """Intersection of sublevel sets ``p(x) <= 0``, in the order given.

    ``ball_radius`` adds ``|x|^2 <= R^2`` for compactness of moment
    relaxations.  It is not a boundary piece for the inner approximation loop
    and is not written into emitted inner-approximation definitions.
    """

    n: int
    ineqs: tuple[Polynomial, ...]
    ball_radius: float | None = None
    names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ineqs", tuple(self.ineqs))
        for p in self.ineqs:
            if p.n != self.n:
                raise ValueError(f"polynomial in {p.n} variables, set has n={self.n}")
        if self.ball_radius is not None and not self.ball_radius > 0:
            raise ValueError("ball_radius must be positive")

    @property
    def m(self) -> int:
        return len(self.ineqs)

    def ball_polynomial(self) -> Polynomial | None:
        """``|x|^2 - R^2`` or None."""
        if self.ball_radius is None:
            return None
        terms = {(0,) * self.n: -self.ball_radius ** 2}
        for j in range(self.n):
            e = [0] * self.n
            e[j] = 2
            terms[tuple(e)] = 1.0
        return Polynomial(self.n, terms)

    def all_constraints(self) -> list[Polynomial]:
        out = list(self.ineqs)
        ball = self.ball_polynomial()
        if ball is not None:
            out.append(ball)
        return out

    def with_ineqs(self, ineqs: Sequence[Polynomial]) -> "SemialgebraicSet":
        return SemialgebraicSet(self.n, tuple(ineqs), self.ball_radius)

    def add(self, *polys: Polynomial) -> "SemialgebraicSet":
        return self.with_ineqs(list(self.ineqs) + list(polys))

    def contains(self, x, tol: float = 0.0) -> bool:
        return membership(self, x, tol)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "ineqs": [p.to_json() for p in self.ineqs],
            "ball_radius": self.ball_radius,
        }

    @classmethod
    def from_json(cls, obj) -> "SemialgebraicSet":
        try:
            n = int(obj["n"])
            ineqs = [Polynomial.from_json(p) for p in obj["ineqs"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed set JSON: {exc}") from exc
        return cls(n, tuple(ineqs), obj.get("ball_radius"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "SemialgebraicSet":
        return cls.from_json(json.loads(Path(path).read_text()))


def membership(S: SemialgebraicSet, x, tol: float = 0.0) -> bool:
    """True iff every defining polynomial (and the ball, if any) is <= tol at x."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    x = np.asarray(x, dtype=float)
    if x.shape != (S.n,):
        raise ValueError(f"point has shape {x.shape}, expected ({S.n},)")
    return all(p.eval(x) <= tol for p in S.all_constraints())


def membership_many(S: SemialgebraicSet, pts, tol: float = 0.0) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    inside = np.ones(pts.shape[:-1], dtype=bool)
    for p in S.all_constraints():
        inside &= p.eval_many(pts) <= tol
    return inside


@dataclass
class RegionRaster:
    bbox: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    mask: np.ndarray  # indexed [i1, i2, ...] along x1, x2, ...

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, r) for (lo, hi), r in zip(self.bbox, self.resolution)]

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(grids, axis=-1)

    @property
    def cell_size(self) -> np.ndarray:
        return np.array([(hi - lo) / (r - 1) for (lo, hi), r in zip(self.bbox, self.resolution)])

    def inside_points(self) -> np.ndarray:
        return self.points()[self.mask]

    def write_csv(self, path) -> None:
        pts = self.points().reshape(-1, len(self.bbox))
        flags = self.mask.reshape(-1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j + 1}" for j in range(len(self.bbox))] + ["inside"])
            for p, f in zip(pts, flags):
                w.writerow([f"{v:.10g}" for v in p] + [int(f)])


def rasterize(S: SemialgebraicSet, bbox, resolution, tol: float = 0.0) -> RegionRaster:
    """Membership mask of ``S`` on a uniform grid including the bbox corners."""
    if S.n not in (2, 3):
        raise ValueError(f"rasterize supports n in (2, 3), got n={S.n}")
    bbox = tuple((float(lo), float(hi)) for lo, hi in bbox)
    if isinstance(resolution, int):
        resolution = (resolution,) * S.n
    resolution = tuple(int(r) for r in resolution)
    if len(bbox) != S.n or len(resolution) != S.n:
        raise ValueError("bbox/resolution do not match the set dimension")
    if any(r < 2 for r in resolution):
        raise ValueError("resolution must be >= 2 per axis")
    if not all(np.isfinite(v) for lohi in bbox for v in lohi):
        raise ValueError("bbox must be finite")
    raster = RegionRaster(bbox, resolution, np.zeros(resolution, dtype=bool))
    raster.mask = membership_many(S, raster.points(), tol)
    return raster


def auto_bbox(S: SemialgebraicSet, radius: float = 4.0, resolution: int = 401,
              pad: float = 0.1) -> list[tuple[float, float]]:
    """Padded bounding box of the raster points of S inside [-radius, radius]^n.

    Falls back to the full cube when no raster point is inside.
    """
    R = rasterize(S, [(-radius, radius)] * S.n, resolution)
    pts = R.inside_points()
    if len(pts) == 0:
        return [(-radius, radius)] * S.n
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    w = np.maximum(hi - lo, 2 * R.cell_size)
    return [(float(a - pad * d), float(b + pad * d)) for a, b, d in zip(lo, hi, w)]
