"""Command-line entry point.

Subcommands: certify, inner, stab, trajopt, raster.  Sets come from a JSON
file (``--file``) or a built-in fixture (``--set``).  Every output file gets a
``<file>.manifest.json`` next to it recording the resolved options.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("convexinner")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_INPUT = 2


class InputError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(_finite(obj), default=_json_default, allow_nan=False)


def _finite(o):
    # strict JSON has no NaN/inf; they become null
    if isinstance(o, float):
        return o if np.isfinite(o) else None
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    return o


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialize {type(o).__name__}")


class RunManifest:
    """Resolved options of one run, written beside each output file."""

    def __init__(self, args: argparse.Namespace):
        self.subcommand = args.command
        self.options = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
        self.version = __version__
        self.started = time.perf_counter()
        self.outputs: list[str] = []

    def to_json(self) -> dict:
        return {"subcommand": self.subcommand, "options": self.options, "version": self.version,
                "seed": self.options.get("seed", 0), "outputs": self.outputs,
                "wall_time": round(time.perf_counter() - self.started, 3)}

    def register(self, path) -> None:
        self.outputs.append(str(path))

    def write_all(self) -> None:
        for path in self.outputs:
            Path(str(path) + ".manifest.json").write_text(json.dumps(self.to_json(), indent=2) + "\n")


def _load_set(args):
    from .fixtures import named_set, singular
    from .semialg import SemialgebraicSet

    if getattr(args, "file", None):
        try:
            return SemialgebraicSet.load(args.file)
        except FileNotFoundError as exc:
            raise InputError(f"no such file: {args.file}") from exc
        except (ValueError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.file}: {exc}") from exc
    name = getattr(args, "set", None)
    if not name:
        raise InputError("give a set with --file or --set")
    if name == "singular" and getattr(args, "perturb", 0.0):
        return singular(args.perturb)
    try:
        return named_set(name)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from exc


def _certify_opts(args) -> dict:
    return {"sdp_tol": args.sdp_tol, "sdp_max_iters": args.sdp_max_iters}


def _parse_bbox(text, n):
    if text is None:
        return None
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 2 * n:
        raise InputError(f"--bbox needs {2 * n} comma-separated numbers")
    return [(vals[2 * j], vals[2 * j + 1]) for j in range(n)]


# --- certify ------------------------------------------------------------------

def cmd_certify(args, manifest: RunManifest) -> int:
    from .curvature import PolyOptProblem, build_curvature_problem
    from .extract import certify

    if args.problem:
        try:
            prob = PolyOptProblem.from_json(json.loads(Path(args.problem).read_text()))
        except (OSError, KeyError, ValueError) as exc:
            raise InputError(f"{args.problem}: {exc}") from exc
    else:
        S = _load_set(args)
        try:
            prob = build_curvature_problem(S, args.piece)
        except IndexError as exc:
            raise InputError(str(exc)) from exc

    def emit(rec):
        print(_dump(rec.to_json(prob)), flush=True)

    res = certify(prob, max_order=args.max_order, min_order=args.min_order,
                  on_order=emit, **_certify_opts(args))
    final = res.to_json()
    final["final"] = True
    print(_dump(final), flush=True)
    return EXIT_OK


# --- inner --------------------------------------------------------------------

def cmd_inner(args, manifest: RunManifest) -> int:
    from .inner import inner_approximation

    S = _load_set(args)
    approx = inner_approximation(S, eps=args.eps, max_order=args.max_order, max_cuts=args.max_cuts,
                                 minimizer_policy=args.policy, **_certify_opts(args))
    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_name(out.stem + "_log.json")
    approx.save(out, log_path)
    manifest.register(out)
    manifest.register(log_path)
    if args.plot:
        _plot_inner(args, S, approx)
        manifest.register(args.plot)
    print(_dump({"final_status": approx.final_status.value, "n_cuts": len(approx.cuts),
                 "cuts": [c.to_json() for c in approx.cuts], "sbar": str(out), "log": str(log_path)}))
    return EXIT_OK


def _plot_inner(args, S, approx):
    from .plotting import plot_regions
    from .semialg import auto_bbox

    if S.n != 2:
        raise InputError("--plot needs a planar set")
    bbox = _parse_bbox(args.bbox, 2) or auto_bbox(S)
    points = [x for e in approx.log for x in e.chosen]
    plot_regions(args.plot, S, bbox, approx.set, points=points)


# --- stab ---------------------------------------------------------------------

def _interior_start(S, bbox, resolution: int = 201) -> np.ndarray:
    """Raster point of S with the largest minimum slack."""
    from .semialg import rasterize

    R = rasterize(S, bbox, resolution)
    pts = R.inside_points()
    if len(pts) == 0:
        raise InputError("region has no raster points inside the bounding box")
    slack = np.min([-p.eval_many(pts) for p in S.all_constraints()], axis=0)
    return pts[int(np.argmax(slack))]


def cmd_stab(args, manifest: RunManifest) -> int:
    from .inner import inner_approximation
    from .stability import (AnalyticCenterError, analytic_center, schur3_region, schur4_region,
                            verify_stability_sampling)

    if args.kind == "schur3":
        spec = schur3_region()
    else:
        spec = schur4_region(args.a, cubic_scale=args.cubic_scale)
    report = {"kind": spec.kind.value, "a": spec.a, "set": spec.set.to_json(), "bbox": spec.bbox,
              "annotations": spec.annotations}
    region = spec.set
    if args.inner:
        approx = inner_approximation(spec.set, eps=args.eps, max_order=args.max_order,
                                     **_certify_opts(args))
        region = approx.set
        report["inner"] = {"final_status": approx.final_status.value,
                           "cuts": [c.to_json() for c in approx.cuts],
                           "log": approx.log_json()}
    if args.center:
        x0 = _interior_start(region, spec.bbox)
        try:
            c = analytic_center(region, x0)
        except AnalyticCenterError as exc:
            report["center_error"] = str(exc)
            print(_dump(report))
            return EXIT_NUMERICAL
        report["center"] = {"x": c.x_star.tolist(), "gradient_norm": c.gradient_norm,
                            "barrier": c.barrier_value, "iterations": c.iterations,
                            "spectral_radius": spec.spectral_radius(c.x_star)}
    if spec.set.n == 2:
        rep = verify_stability_sampling(spec, region, resolution=args.resolution)
        report["sampling"] = rep.to_json()
    if args.plot:
        if spec.set.n != 2:
            raise InputError("--plot needs a planar region")
        from .plotting import plot_regions

        pts = [report["center"]["x"]] if "center" in report else []
        plot_regions(args.plot, spec.set, spec.bbox, region if args.inner else None, points=pts)
        manifest.register(args.plot)
    text = _dump(report)
    if args.out:
        Path(args.out).write_text(text + "\n")
        manifest.register(args.out)
    print(text)
    return EXIT_OK


# --- trajopt ------------------------------------------------------------------

def cmd_trajopt(args, manifest: RunManifest) -> int:
    from .trajopt import TrajectoryError, demo_program, solve_flat_program, trajectory_table

    kinds = {"waterdrop": "nonconvex", "waterdrop-inner": "convex", "none": "unconstrained"}
    kind = kinds[args.set]
    fp = demo_program(kind, args.n, weighted=not args.unweighted)
    starts = args.starts if args.starts is not None else (5 if kind == "nonconvex" else 1)
    try:
        res = solve_flat_program(fp, starts=starts, seed=args.seed)
    except TrajectoryError as exc:
        print(_dump({"error": str(exc)}))
        return EXIT_NUMERICAL
    table = trajectory_table(fp, res.alpha_star)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x1", "x2", "u"])
            for row in table:
                w.writerow([f"{v:.10g}" for v in row])
        manifest.register(args.csv)
    if args.plot:
        from .fixtures import waterdrop
        from .plotting import plot_regions
        from .semialg import SemialgebraicSet

        S = waterdrop()
        sbar = SemialgebraicSet(2, tuple(fp.constraints)) if kind == "convex" else None
        plot_regions(args.plot, S, [(-0.5, 0.5), (-1.1, 0.1)], sbar, trajectories=[table[:, 1:3]])
        manifest.register(args.plot)
    summary = {"set": args.set, "n": args.n, "weighted": not args.unweighted, **res.summary(),
               "alpha": res.alpha_star.tolist()}
    print(_dump(summary))
    return EXIT_OK


# --- raster -------------------------------------------------------------------

def cmd_raster(args, manifest: RunManifest) -> int:
    from .semialg import auto_bbox, rasterize

    S = _load_set(args)
    bbox = _parse_bbox(args.bbox, S.n) or auto_bbox(S)
    R = rasterize(S, bbox, args.resolution)
    R.write_csv(args.csv)
    manifest.register(args.csv)
    print(_dump({"bbox": bbox, "resolution": args.resolution, "n_inside": int(R.mask.sum()),
                 "csv": args.csv}))
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def _set_args(p, required=True):
    from .fixtures import FIXTURE_NAMES

    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--file", help="set JSON file")
    g.add_argument("--set", choices=FIXTURE_NAMES, help="built-in fixture")
    p.add_argument("--perturb", type=float, default=0.0,
                   help="constant added to the singular quartic")


def build_parser() -> argparse.ArgumentParser:
    env_tol = os.environ.get("CONVEXINNER_SDP_TOL")
    parser = argparse.ArgumentParser(prog="convexinner", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--sdp-tol", type=float, default=float(env_tol) if env_tol else None,
                        help="relative accuracy of the SDP solver (env CONVEXINNER_SDP_TOL)")
    parser.add_argument("--sdp-max-iters", type=int, default=200)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="certify the minimum boundary curvature of one piece")
    _set_args(p, required=False)
    p.add_argument("--problem", help="polynomial optimization problem JSON instead of a set")
    p.add_argument("--piece", type=int, default=0, help="0-based polynomial index")
    p.add_argument("--max-order", type=int, default=5)
    p.add_argument("--min-order", type=int, default=None)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("inner", help="build a convex inner approximation")
    _set_args(p)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--policy", choices=("all", "first", "max-gradient"), default="all")
    p.add_argument("--max-order", type=int, default=5)
    p.add_argument("--max-cuts", type=int, default=20)
    p.add_argument("--out", default="Sbar.json")
    p.add_argument("--log", default=None, help="iteration log (default <out>_log.json)")
    p.add_argument("--plot", default=None, help="SVG of the set and its approximation")
    p.add_argument("--bbox", default=None, help="x1lo,x1hi,x2lo,x2hi for plots")
    p.set_defaults(func=cmd_inner)

    p = sub.add_parser("stab", help="stability regions in controller space")
    p.add_argument("--kind", choices=("schur3", "schur4"), default="schur4")
    p.add_argument("--a", type=float, default=0.0, help="plant parameter of the fourth-order loop")
    p.add_argument("--cubic-scale", type=float, default=1.0 / 64.0)
    p.add_argument("--inner", action="store_true", help="build the convex inner approximation")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--max-order", type=int, default=4)
    p.add_argument("--center", action="store_true", help="compute the analytic center")
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--plot", default=None)
    p.add_argument("--out", default=None, help="report JSON")
    p.set_defaults(func=cmd_stab)

    p = sub.add_parser("trajopt", help="flat-output trajectory demo")
    p.add_argument("--set", choices=("waterdrop", "waterdrop-inner", "none"), default="waterdrop-inner")
    p.add_argument("--n", type=int, default=100, help="number of constraint instants")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=None, help="default 5 for waterdrop, else 1")
    p.add_argument("--unweighted", action="store_true", help="cost sum u^2 without the time step")
    p.add_argument("--csv", default=None)
    p.add_argument("--plot", default=None)
    p.set_defaults(func=cmd_trajopt)

    p = sub.add_parser("raster", help="membership raster as CSV")
    _set_args(p)
    p.add_argument("--bbox", default=None)
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--csv", default="raster.csv")
    p.set_defaults(func=cmd_raster)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    manifest = RunManifest(args)
    try:
        code = args.func(args, manifest)
    except InputError as exc:
        print(f"convexinner: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"convexinner: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BrokenPipeError:
        sys.stderr.close()
        return EXIT_OK
    manifest.write_all()
    return code


if __name__ == "__main__":
    sys.exit(main())
