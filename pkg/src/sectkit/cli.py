"""Command-line interface.

Exit codes: 0 success or Accept, 3 Reject, 1 usage or configuration error,
2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import RuntimeConfig, StudyConfig, run_rejection_study, run_runtime_study
from .ecc import DEFAULT_MAX_DIM, DirectionGrid, direction_grid, parse_backend
from .errors import GridMismatchError, ParseError, SectkitError, ValidationError
from .infer import GroupSample, chi2_pipeline, permutation_test, randomization_nhst
from .sect import LevelGrid, read_field, rho_discrete, sect_field, write_field
from .shapes import (FamilyParams, ShapeSpec, TriMesh, load_mesh, make_deterministic_shape,
                     sample_random_shape, shape_stream)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_REJECT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _alpha(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("alpha must be in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    # --threads is accepted before or after the subcommand
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS,
                        help="worker cap (default: $SECTKIT_THREADS or 1); results do not depend on it")
    p = _Parser(prog="sectkit", description="Euler characteristic transforms of shapes and two-sample tests on them.",
                parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compute", parents=[common], help="SECT and ECT fields of one shape")
    c.add_argument("--shape", required=True,
                   help="OFF file, builtin:K1, builtin:K2 or family:eps=X,seed=S[,index=I]")
    c.add_argument("--directions", required=True, help="direction count (planar) or CSV file")
    c.add_argument("--levels", required=True, type=_positive_int, help="number of levels")
    c.add_argument("--radius", type=float, default=None, help="bounding radius R (default: from the shape)")
    c.add_argument("--backend", default="auto", help="mesh, cech, arcs or raster:DELTA")
    c.add_argument("--max-dim", type=_positive_int, default=DEFAULT_MAX_DIM,
                   help="largest nerve simplex dimension for the cech backend")
    c.add_argument("--shape-id", default=None, help="identifier stored in the manifests")
    c.add_argument("--out", required=True, help="output directory")

    t = sub.add_parser("test", parents=[common], help="two-sample test on directories of fields")
    t.add_argument("--group1", required=True)
    t.add_argument("--group2", required=True)
    t.add_argument("--method", required=True, choices=["chi2", "perm", "nhst"])
    t.add_argument("--alpha", type=_alpha, default=0.05)
    t.add_argument("--permutations", type=_positive_int, default=1000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default=None, help="report JSON path")

    s = sub.add_parser("simulate", parents=[common], help="rejection-rate or runtime study")
    s.add_argument("--study", required=True, choices=["rejection", "runtime"])
    s.add_argument("--config", default=None, help="JSON file of config overrides")
    s.add_argument("--full-scale", action="store_true", help="full-size rejection study")
    s.add_argument("--out", required=True)

    d = sub.add_parser("distance", parents=[common], help="discrete ECT distance between two fields")
    d.add_argument("--a", required=True)
    d.add_argument("--b", required=True)
    return p


# --------------------------------------------------------------------------- #

def _threads(args):
    if getattr(args, "threads", None) is not None:
        return args.threads
    env = os.environ.get("SECTKIT_THREADS")
    if env:
        try:
            v = int(env)
        except ValueError:
            raise UsageError(f"SECTKIT_THREADS must be a positive integer, got {env!r}")
        if v < 1:
            raise UsageError(f"SECTKIT_THREADS must be a positive integer, got {env!r}")
        return v
    return None


_FAMILY = re.compile(r"^family:(.*)$")


def _resolve_shape(spec: str) -> tuple[ShapeSpec, str]:
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name.upper() not in ("K1", "K2"):
            raise UsageError(f"unknown builtin shape {name!r}")
        return make_deterministic_shape(name), name.upper()
    m = _FAMILY.match(spec)
    if m:
        opts = {}
        for part in filter(None, m.group(1).split(",")):
            key, sep, val = part.partition("=")
            if not sep:
                raise UsageError(f"malformed family option {part!r}")
            opts[key.strip()] = val.strip()
        unknown = set(opts) - {"eps", "seed", "index"}
        if unknown or "eps" not in opts or "seed" not in opts:
            raise UsageError("family shapes need eps=X,seed=S and optionally index=I")
        try:
            eps, seed, index = float(opts["eps"]), int(opts["seed"]), int(opts.get("index", 0))
        except ValueError as exc:
            raise UsageError(f"malformed family option: {exc}")
        if not 0 <= eps <= 0.1:
            raise UsageError("eps must be in [0, 0.1]")
        shape = sample_random_shape(FamilyParams(eps), shape_stream(seed, index))
        return shape, f"family_eps{eps:g}_seed{seed}_i{index}"
    path = Path(spec)
    if not path.exists():
        raise ParseError(f"shape file {spec} not found")
    shape = load_mesh(path)
    if shape.dim == 3 and np.all(shape.geometry.vertices[:, 2] == 0):
        # planar meshes are stored with z = 0
        shape = load_mesh(path, dim=2)
    return shape, path.stem


def _directions(arg: str, dim: int) -> DirectionGrid:
    if re.fullmatch(r"\d+", arg):
        count = int(arg)
        if count < 1:
            raise UsageError("direction count must be positive")
        if dim != 2:
            raise UsageError("a direction count only works for planar shapes; pass a CSV file")
        return direction_grid(2, count)
    path = Path(arg)
    if not path.exists():
        raise ParseError(f"direction file {arg} not found")
    return direction_grid(dim, None, "file", path)


def cmd_compute(args) -> int:
    if args.levels < 2:
        raise UsageError("--levels must be at least 2")
    shape, sid = _resolve_shape(args.shape)
    if args.radius is not None:
        if not args.radius > 0:
            raise UsageError("--radius must be positive")
        shape = ShapeSpec(shape.geometry, args.radius)
    is_mesh = isinstance(shape.geometry, TriMesh)
    backend = args.backend
    if backend == "auto":
        backend = "mesh" if is_mesh else ("arcs" if shape.dim == 2 else "cech_nerve")
    if backend == "mesh":
        if not is_mesh:
            raise UsageError("the mesh backend needs a mesh shape")
    else:
        try:
            backend = parse_backend(backend)
        except ValidationError as exc:
            raise UsageError(str(exc))
        if is_mesh:
            raise UsageError("meshes use the mesh backend")
    grid = _directions(args.directions, shape.dim)
    levels = LevelGrid(shape.T, args.levels)
    sid = args.shape_id or sid
    sect, ect = sect_field(shape, grid, levels, backend, sid, args.max_dim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_field(out / f"{sid}_sect", sect)
    write_field(out / f"{sid}_ect", ect)
    term = sorted(set(int(v) for v in ect.values[:, -1]))
    term_s = str(term[0]) if len(term) == 1 else ",".join(map(str, term))
    print(f"shape={sid} Gamma={len(grid)} Delta={levels.count} T={levels.T!r} terminal_chi={term_s}")
    print(f"wrote {out / (sid + '_sect.csv')} and {out / (sid + '_ect.csv')}")
    return EXIT_OK


def _load_group(directory: str, kind: str, label: int):
    d = Path(directory)
    if not d.is_dir():
        raise ParseError(f"{directory} is not a directory")
    fields, paths = [], []
    for man in sorted(d.glob("*.json")):
        try:
            k = json.loads(man.read_text()).get("kind")
        except (OSError, json.JSONDecodeError, AttributeError) as exc:
            raise ParseError(f"cannot read manifest {man}: {exc}") from exc
        if k == kind:
            fields.append(read_field(man))
            paths.append(man)
    if not fields:
        raise ParseError(f"{directory} contains no {kind} fields")
    for f, pth in zip(fields[1:], paths[1:]):
        if not f.same_grid(fields[0]):
            raise GridMismatchError(f"grid mismatch between {paths[0]} and {pth}")
    return GroupSample.from_fields(label, fields), paths[0], fields[0]


def cmd_test(args) -> int:
    kind = "ect" if args.method == "nhst" else "sect"
    g1, p1, f1 = _load_group(args.group1, kind, 1)
    g2, p2, f2 = _load_group(args.group2, kind, 2)
    if not f1.same_grid(f2):
        raise GridMismatchError(f"grid mismatch between {p1} and {p2}")
    threads = _threads(args)
    if args.method == "chi2":
        report = chi2_pipeline(g1, g2, args.alpha)
        report.seed = args.seed
    elif args.method == "perm":
        report = permutation_test(g1, g2, args.alpha, args.permutations, args.seed, threads=threads)
    else:
        report = randomization_nhst(g1, g2, args.alpha, args.permutations, args.seed, threads=threads)
    text = report.to_json(args.out)
    if args.out is None:
        sys.stdout.write(text)
    else:
        print(f"{report.method}: S0={report.statistic!r} threshold={report.threshold!r} "
              f"p={report.p_value!r} decision={report.decision}")
    return EXIT_REJECT if report.rejected else EXIT_OK


def cmd_simulate(args) -> int:
    overrides = {}
    if args.config is not None:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(overrides, dict):
            raise UsageError("config must be a JSON object")
    threads = _threads(args)
    try:
        if args.study == "rejection":
            if args.full_scale:
                overrides["full_scale"] = True
            if threads is not None:
                overrides.setdefault("threads", threads)
            cfg = StudyConfig.from_dict(overrides)
        else:
            cfg = RuntimeConfig.from_dict(overrides)
    except (ValidationError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}")
    if args.study == "rejection":
        result = run_rejection_study(cfg)
    else:
        result = run_runtime_study(cfg)
    for path in result.write(args.out):
        print(f"wrote {path}")
    return EXIT_OK


def cmd_distance(args) -> int:
    a, b = read_field(args.a), read_field(args.b)
    if a.kind != b.kind:
        raise GridMismatchError(f"{args.a} holds {a.kind} values but {args.b} holds {b.kind} values")
    if not a.same_grid(b):
        raise GridMismatchError(f"grid mismatch between {args.a} and {args.b}")
    rho = rho_discrete(a, b) if a.kind == "ect" else float(
        np.sqrt(((a.values - b.values) ** 2).sum(axis=1)).max())
    print(f"{rho:.9f}".rstrip("0").rstrip("."))
    return EXIT_OK


COMMANDS = {"compute": cmd_compute, "test": cmd_test, "simulate": cmd_simulate, "distance": cmd_distance}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sectkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SectkitError as exc:
        print(f"sectkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
