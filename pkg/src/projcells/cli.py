"""Command-line entry points: decompose, deform, vinberg, orbit, render.

Exit codes: 0 certified / valid, 2 provisional or invalid-but-diagnosed,
1 operational error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .core import ToleranceConfig
from .decomp import (
    CellDecomposition,
    DecompositionError,
    ShallowEnumerationError,
    epstein_penner,
)
from .deform import HypothesisError, TriangulationError, deform, triangulate_base
from .domain import LorentzCone, OutsideConeError, cone_from_json, horofunction, vinberg_lift
from .group import Representation, min_pairwise_distance, orbit_bfs, validate_cusp

log = logging.getLogger("projcells")

EXIT_OK, EXIT_ERROR, EXIT_PROVISIONAL = 0, 1, 2


# ---------------------------------------------------------------------------
# deterministic JSON


def _fmt(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        if x == int(x) and abs(x) < 1e16:
            return f"{int(x)}.0"
        return format(x, ".17g")
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, np.ndarray):
        return _fmt(x.tolist())
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj) -> str:
    """JSON text with floats at 17 significant digits and stable key order."""
    return _fmt(obj) + "\n"


def write_json(obj, path):
    text = dumps(obj)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


# ---------------------------------------------------------------------------
# rendering


def klein_chart(cone, pts) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    y = pts @ cone.hinv.T if isinstance(cone, LorentzCone) else pts
    return y[:, :-1] / y[:, -1:]


def render_svg(dec: CellDecomposition, cone=None, size: int = 600, show_points: bool = True,
               colors=("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948")) -> str:
    """Klein-disk picture of a surface decomposition (ambient dimension 3)."""
    if dec.dim != 3:
        raise ValueError("rendering needs a surface decomposition (dim 3)")
    cone = LorentzCone(3) if cone is None else cone
    half = size / 2
    r = 0.45 * size

    def xy(p):
        return f"{half + r * p[0]:.3f},{half - r * p[1]:.3f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<circle cx="{half}" cy="{half}" r="{r:.3f}" fill="none" stroke="black" stroke-width="1.5"/>',
    ]
    for c in dec.cells:
        if c.dim != 2:
            continue
        q = klein_chart(cone, dec.points[list(c.vertices)])
        centre = q.mean(axis=0)
        order = np.argsort(np.arctan2(q[:, 1] - centre[1], q[:, 0] - centre[0]))
        pts = " ".join(xy(q[i]) for i in order)
        col = colors[c.cls % len(colors)]
        parts.append(f'<polygon points="{pts}" fill="{col}" fill-opacity="0.35" stroke="{col}" stroke-width="0.6"/>')
    if show_points:
        for p in klein_chart(cone, dec.points):
            if np.linalg.norm(p) <= 1.0 + 1e-9:
                parts.append(f'<circle cx="{half + r * p[0]:.3f}" cy="{half - r * p[1]:.3f}" r="1.2" fill="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# commands


def _tol(args) -> ToleranceConfig:
    if args.tol_geom is None:
        return ToleranceConfig()
    if not args.tol_geom > 0:
        raise ValueError("--tol-geom must be positive")
    return ToleranceConfig(eps_equal=min(1e-9, args.tol_geom), eps_geom=args.tol_geom)


def _cone(args, dim, tol):
    if getattr(args, "cone", None):
        cone = cone_from_json(read_json(args.cone), tol)
        if cone.dim != dim:
            raise ValueError(f"cone dimension {cone.dim} does not match representation dimension {dim}")
        return cone
    return LorentzCone(dim, tol=tol)


def _floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


def cmd_decompose(args) -> int:
    tol = _tol(args)
    rep = Representation.from_json(read_json(args.rep), tol)
    cone = _cone(args, rep.dim, tol)
    scales = None if args.scales is None else list(_floats(args.scales))
    log.info("decompose: dim %d, %d cusp(s), word length %d", rep.dim, len(rep.cusps), args.word_length)
    try:
        dec = epstein_penner(rep, cone, scales, args.word_length)
    except ShallowEnumerationError as exc:
        log.warning("%s", exc)
        write_json({"cells": [], "pairings": [], "quotient_counts": {}, "provisional": exc.provisional,
                    "R_used": exc.R_used, "certified": False}, args.out)
        return EXIT_PROVISIONAL
    log.info("decompose: %d certified cells, quotient %s", len(dec.cells), dec.quotient_counts)
    out = dec.to_json()
    try:
        triangulate_base(dec)
        complete = True
    except TriangulationError as exc:
        log.warning("fundamental polytope incomplete: %s", exc)
        complete = False
    out["certified"] = complete
    write_json(out, args.out)
    if args.svg and rep.dim == 3:
        Path(args.svg).write_text(render_svg(dec, cone), encoding="utf-8")
        log.info("decompose: wrote %s", args.svg)
    return EXIT_OK if complete else EXIT_PROVISIONAL


def cmd_deform(args) -> int:
    tol = _tol(args)
    dec = CellDecomposition.from_json(read_json(args.base))
    rep_t = Representation.from_json(read_json(args.rep), tol)
    base = triangulate_base(dec)
    try:
        res = deform(base, rep_t, dec.rep)
    except HypothesisError as exc:
        log.warning("%s", exc)
        write_json({"valid": False, "hypothesis_violated": exc.cusp, "message": str(exc)}, args.out)
        return EXIT_PROVISIONAL
    log.info("deform: valid=%s residual=%.3g drift=%.3g", res.valid, res.max_residual, res.max_drift)
    write_json(res.to_json(), args.out)
    return EXIT_OK if res.valid else EXIT_PROVISIONAL


def cmd_vinberg(args) -> int:
    tol = _tol(args)
    cone = cone_from_json(read_json(args.cone), tol)
    pts = [_floats(p) for p in (args.point or [])]
    if args.points:
        pts.extend(np.asarray(p, dtype=float) for p in read_json(args.points))
    phi = None if args.phi is None else _floats(args.phi)
    lines = ["x\tf\tlift\tf(2x)/f(x)" + ("\th" if phi is not None else "")]
    for x in pts:
        row = [",".join(format(v, ".17g") for v in x)]
        try:
            fx = cone.char_function(x).value
            lift = vinberg_lift(cone, x)
            ratio = cone.char_function(2 * x).value / fx
            row += [format(fx, ".17g"), ",".join(format(v, ".17g") for v in lift), format(ratio, ".17g")]
            if phi is not None:
                row.append(format(horofunction(cone, phi, x), ".17g"))
        except (OutsideConeError, ValueError) as exc:
            row.append(f"ERROR {exc}")
        lines.append("\t".join(row))
    text = "\n".join(lines) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_orbit(args) -> int:
    tol = _tol(args)
    rep = Representation.from_json(read_json(args.rep), tol)
    cone = _cone(args, rep.dim, tol)
    if args.seed is not None:
        seed = _floats(args.seed)
        if seed.shape != (rep.dim,):
            raise ValueError(f"seed must have {rep.dim} coordinates")
        x = cone.orient(seed)
        if cone.margin(x) < -tol.eps_geom:
            raise ValueError("seed is outside the cone closure")
    else:
        if not rep.cusps:
            raise ValueError("no seed given and the representation has no cusp")
        report = validate_cusp(rep, rep.cusps[0], cone)
        if report.fixed_point is None:
            raise ValueError("cusp has no fixed point to seed the orbit")
        x = cone.orient(report.fixed_point.coords)
    orb = orbit_bfs(rep, x, args.word_length, max_norm=args.max_norm, extra_layer=False)
    norms = orb.norms
    out = {
        "seed": x.tolist(),
        "word_length": args.word_length,
        "points": orb.points.tolist(),
        "words": orb.words,
        "min_pairwise_distance": min_pairwise_distance(orb.points),
        "min_norm_ratio": float(norms.min() / np.linalg.norm(x)),
        "max_norm_ratio": float(norms.max() / np.linalg.norm(x)),
    }
    write_json(out, args.out)
    return EXIT_OK


def cmd_render(args) -> int:
    dec = CellDecomposition.from_json(read_json(args.decomp))
    cone = cone_from_json(read_json(args.cone)) if args.cone else None
    svg = render_svg(dec, cone, size=args.size, show_points=not args.no_points)
    if args.svg in (None, "-"):
        sys.stdout.write(svg)
    else:
        Path(args.svg).write_text(svg, encoding="utf-8")
    return EXIT_OK


def _word_length(text):
    n = int(text)
    if not 1 <= n <= 16:
        raise argparse.ArgumentTypeError("word length must be in [1, 16]")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="projcells", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="one log line per stage on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        sp.add_argument("--tol-geom", type=float, default=None, help="coplanarity and containment tolerance")

    d = sub.add_parser("decompose", help="canonical cell decomposition")
    d.add_argument("--rep", required=True, help="representation JSON")
    d.add_argument("--cone", help="cone JSON (default: Lorentz cone)")
    d.add_argument("--word-length", type=_word_length, default=8, help="orbit word length, 1..16")
    d.add_argument("--scales", help="comma-separated positive scale per cusp")
    d.add_argument("--svg", help="also write an SVG (surfaces only)")
    common(d)
    d.set_defaults(func=cmd_decompose)

    f = sub.add_parser("deform", help="rebuild the fundamental polytope for a deformed representation")
    f.add_argument("--base", required=True, help="decomposition JSON written by decompose")
    f.add_argument("--rep", required=True, help="deformed representation JSON")
    common(f)
    f.set_defaults(func=cmd_deform)

    v = sub.add_parser("vinberg", help="characteristic function, Vinberg lift and horofunction values")
    v.add_argument("--cone", required=True, help="cone JSON")
    v.add_argument("--point", action="append", help="comma-separated coordinates; repeatable")
    v.add_argument("--points", help="JSON list of points")
    v.add_argument("--phi", help="comma-separated functional for horofunction values")
    common(v)
    v.set_defaults(func=cmd_vinberg)

    o = sub.add_parser("orbit", help="orbit point cloud with discreteness statistics")
    o.add_argument("--rep", required=True, help="representation JSON")
    o.add_argument("--cone", help="cone JSON (default: Lorentz cone)")
    o.add_argument("--seed", help="comma-separated seed vector (default: first cusp lift)")
    o.add_argument("--word-length", type=_word_length, default=6, help="orbit word length, 1..16")
    o.add_argument("--max-norm", type=float, default=None, help="prune points beyond this multiple of the seed norm")
    common(o)
    o.set_defaults(func=cmd_orbit)

    r = sub.add_parser("render", help="SVG of a surface decomposition in the Klein disk")
    r.add_argument("--decomp", required=True, help="decomposition JSON of a surface")
    r.add_argument("--cone", help="cone JSON used for the Klein chart (default: Lorentz cone)")
    r.add_argument("--svg", help="output path (default: stdout)")
    r.add_argument("--size", type=int, default=600, help="image size in pixels")
    r.add_argument("--no-points", action="store_true", help="omit orbit points")
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, TypeError, DecompositionError, TriangulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
