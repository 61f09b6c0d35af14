"""Command-line front end.

Exit codes: 0 pass, 1 check failed, 2 domain error, 3 configuration error, 4 check aborted.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np

from . import distance, verify
from .approxexp import ChartIndex
from .brackets import ad, permutation_sum_field
from .example5 import run_composite
from .expr import DomainError, ParseDiagnostic, compile_vector
from .fields import BracketFamily, ConfigError, build_bracket_family, load_family, parse_word
from .flows import FlowError, FlowStep, FlowWord, IntegratorConfig

EXIT_PASS, EXIT_FAIL, EXIT_DOMAIN, EXIT_CONFIG, EXIT_ABORT = range(5)

CHECKS = ("first-order", "tangency", "rank", "involutivity", "gronwall", "pushforward",
          "det-derivative")

_COMMON_KEYS = {"config", "seed", "out", "format", "tol", "command", "check"}


def _version() -> str:
    try:
        return metadata.version("lieorbits")
    except metadata.PackageNotFoundError:
        return "unknown"


def make_manifest(args: argparse.Namespace) -> dict:
    overrides = {k: v for k, v in sorted(vars(args).items())
                 if k not in _COMMON_KEYS and v is not None}
    return {
        "config": args.config,
        "seed": args.seed,
        "subcommand": args.command if args.command != "verify" else f"verify {args.check}",
        "overrides": overrides,
        "tol": args.tol,
        "version": _version(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


# ---------------------------------------------------------------- argument parsing helpers

def _point(text: str, n: int) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"malformed point {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"point {text!r} needs {n} coordinates")
    return vals


def _words(text: str, fam: BracketFamily) -> list[tuple]:
    """Semicolon-separated words, e.g. ``"1;1,2"``."""
    out = []
    for part in text.split(";"):
        w = parse_word(part, fam.m)
        if len(w) > fam.s:
            raise ConfigError(f"word {part!r} is longer than the step {fam.s}")
        out.append(w)
    return out


def _flow_word(text: str, fam: BracketFamily, r: float = 1.0) -> FlowWord:
    """``"1:0.3,3:-0.4"``: field letter and signed duration per step, first step first."""
    steps = []
    for part in text.split(","):
        try:
            letter, t = part.split(":")
            j, t = int(letter), float(t)
        except ValueError:
            raise ConfigError(f"malformed flow step {part!r}; expected LETTER:TIME") from None
        if not 1 <= j <= fam.m:
            raise ConfigError(f"flow step {part!r} uses a letter outside 1..{fam.m}")
        steps.append(FlowStep(j - 1, 1 if t >= 0 else -1, abs(t), r))
    return FlowWord(tuple(steps))


def _letter(text: str, fam: BracketFamily) -> tuple[int, int]:
    """A signed field letter like ``"3"`` or ``"-1"`` as (0-based index, sign)."""
    try:
        v = int(text)
    except ValueError:
        raise ConfigError(f"malformed field letter {text!r}") from None
    if not 1 <= abs(v) <= fam.m:
        raise ConfigError(f"field letter {text!r} outside 1..{fam.m}")
    return abs(v) - 1, 1 if v > 0 else -1


def _center(fam: BracketFamily) -> str:
    return ",".join(str((lo + hi) / 2) for lo, hi in fam.box)


# ---------------------------------------------------------------- commands

def cmd_bracket(fam: BracketFamily, args) -> tuple[dict, int]:
    word = parse_word(args.word, fam.m)
    if len(word) > fam.s:
        raise ConfigError(f"word {args.word!r} is longer than the step {fam.s}")
    p = _point(args.point, fam.n)
    j = fam.index(word)
    if args.mode == "symbolic":
        value = fam.value(j, p)
    elif args.mode == "permutation":
        value = np.array(compile_vector(permutation_sum_field(fam, word))(p), dtype=float)
    else:  # flow: ad_{X_w1} applied to the tail, derivatives taken along the flow
        if len(word) == 1:
            value = fam.value(j, p)
        else:
            value = ad(fam, word[0] - 1, fam.index(word[1:]), p, mode="flow").value
    print(" ".join(f"{v:.17g}" for v in value))
    return {"word": list(word), "point": list(p), "mode": args.mode,
            "value": [float(v) for v in value]}, EXIT_PASS


def run_check(fam: BracketFamily, args) -> verify.VerificationReport:
    cfg = IntegratorConfig()
    tol = args.tol
    name = args.check
    if name == "first-order":
        word = parse_word(args.word, fam.m)
        return verify.check_first_order(fam, word, _point(args.point or _center(fam), fam.n),
                                        (args.t_min, args.t_max), args.samples, cfg)
    if name == "tangency":
        I = ChartIndex.from_words(fam, _words(args.frame, fam))
        grid = verify.chart_grid(I, args.radius, args.per_axis)
        return verify.check_tangency(fam, I, _point(args.point or _center(fam), fam.n), args.r,
                                     grid, cfg, tol=tol if tol is not None else 1e-3,
                                     fd_step=args.fd_step)
    if name == "rank":
        return verify.check_rank_constancy(
            fam, _point(args.from_point or _center(fam), fam.n), args.words, args.max_steps,
            args.max_time, args.seed, tol if tol is not None else 1e-8, cfg)
    if name == "involutivity":
        margins = tuple(float(v) for v in args.margins.split(","))
        return verify.check_involutivity(fam, None, margins, args.per_axis, args.t0, args.n_t,
                                         tol if tol is not None else 1e-8, args.ratio, cfg=cfg)
    if name == "gronwall":
        wd = _flow_word(args.flow, fam, args.r)
        return verify.check_gronwall(fam, _point(args.point or _center(fam), fam.n), args.r, wd,
                                     args.p, cfg, tol if tol is not None else 1e-9)
    if name == "pushforward":
        I = ChartIndex.from_words(fam, _words(args.frame, fam))
        wd = _flow_word(args.flow, fam, args.r)
        return verify.check_pushforward(fam, I, _point(args.point or _center(fam), fam.n), args.r,
                                        wd, cfg, tol if tol is not None else 1e-6)
    if name == "det-derivative":
        J = [fam.index(w) for w in _words(args.J, fam)]
        K = [int(v) - 1 for v in args.K.split(",")]
        if len(J) != len(K) or any(not 0 <= k < fam.n for k in K):
            raise ConfigError("J and K must have equal sizes and K must use coordinates 1..n")
        z, sign = _letter(args.z, fam)
        return verify.check_determinant_derivative(
            fam, J, K, _point(args.point or _center(fam), fam.n), args.r, z, sign,
            tol=tol if tol is not None else 1e-5, cfg=cfg)
    raise ConfigError(f"unknown check {name!r}")


def cmd_verify(fam: BracketFamily, args, manifest: dict) -> int:
    report = run_check(fam, args)
    if args.out:
        Path(args.out).write_text(report.to_csv())
    if args.format == "csv":
        sys.stdout.write(report.to_csv())
    else:
        print(report.to_json(manifest))
    print(report.summary(), file=sys.stderr)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_distance(fam: BracketFamily, args) -> tuple[dict, int]:
    x = _point(args.from_point, fam.n)
    y = _point(args.to_point, fam.n)
    search = distance.BeamSearch(beam=args.beam, grid=args.grid, max_len=args.max_len,
                                 r_max=args.r_max)
    est = distance.estimate(fam, x, y, search)
    out = est.to_dict(fam)
    upper = "inf" if math.isinf(est.upper) else f"{est.upper:.6g}"
    print(f"lower {est.lower:.6g}  upper {upper}", file=sys.stderr)
    return out, EXIT_PASS


def cmd_example5(fam: BracketFamily, args) -> tuple[dict, int]:
    report = run_composite(fam, args.seed)
    for c in report.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}", file=sys.stderr)
    return report.to_dict(), EXIT_PASS if report.passed else EXIT_FAIL


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    def options(suppress: bool) -> argparse.ArgumentParser:
        # subcommand copies must not overwrite values given before the subcommand
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        p = argparse.ArgumentParser(add_help=False)
        p.add_argument("--config", default=dflt(None),
                       help="config file path or builtin family name")
        p.add_argument("--seed", type=int, default=dflt(0))
        p.add_argument("--out", default=dflt(None), help="write the CSV sample dump here")
        p.add_argument("--format", choices=("json", "csv"), default=dflt("json"))
        p.add_argument("--tol", type=float, default=dflt(None),
                       help="override the check's pass threshold")
        return p

    common = options(suppress=True)
    parser = argparse.ArgumentParser(prog="lieorbits", parents=[options(suppress=False)],
                                     description="Orbits of vector-field families: brackets, "
                                                 "verification checks and distance bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bracket", parents=[common], help="evaluate a bracket coefficient g_w")
    b.add_argument("--word", required=True, help='e.g. "1,2"')
    b.add_argument("--point", required=True, help='e.g. "0,0,0.5"')
    b.add_argument("--mode", choices=("symbolic", "permutation", "flow"), default="symbolic")

    v = sub.add_parser("verify", parents=[common], help="run a verification check")
    checks = v.add_subparsers(dest="check", required=True)

    c = checks.add_parser("first-order", parents=[common],
                          help="order of exp_ap(t X_w) x - x - t g_w(x)")
    c.add_argument("--word", required=True)
    c.add_argument("--point")
    c.add_argument("--t-min", type=float, default=1e-4)
    c.add_argument("--t-max", type=float, default=1e-2)
    c.add_argument("--samples", type=int, default=10)

    c = checks.add_parser("tangency", parents=[common], help="chart Jacobian columns lie in P")
    c.add_argument("--frame", required=True, help='semicolon-separated words, e.g. "1;1,2"')
    c.add_argument("--point")
    c.add_argument("--r", type=float, default=1.0)
    c.add_argument("--radius", type=float, default=0.2)
    c.add_argument("--per-axis", type=int, default=5)
    c.add_argument("--fd-step", type=float, default=1e-6)

    c = checks.add_parser("rank", parents=[common], help="orbit rank along random flow words")
    c.add_argument("--from", dest="from_point")
    c.add_argument("--words", type=int, default=200)
    c.add_argument("--max-steps", type=int, default=4)
    c.add_argument("--max-time", type=float, default=0.5)

    c = checks.add_parser("involutivity", parents=[common],
                          help="bounded coefficients of ad_Z X_w, |w| = s")
    c.add_argument("--margins", default="0.1,0.01")
    c.add_argument("--per-axis", type=int, default=3)
    c.add_argument("--t0", type=float, default=0.05)
    c.add_argument("--n-t", type=int, default=3)
    c.add_argument("--ratio", type=float, default=1e3, help="C0 growth ratio flagged as divergence")

    c = checks.add_parser("gronwall", parents=[common], help="Gronwall constant of Lambda_p")
    c.add_argument("--flow", required=True, help='steps "LETTER:TIME,...", total |time| <= 1')
    c.add_argument("--point")
    c.add_argument("--r", type=float, default=1.0)
    c.add_argument("--p", type=int, required=True)

    c = checks.add_parser("pushforward", parents=[common], help="pulled-back frame stays in P_x")
    c.add_argument("--frame", required=True)
    c.add_argument("--flow", required=True)
    c.add_argument("--point")
    c.add_argument("--r", type=float, default=1.0)

    c = checks.add_parser("det-derivative", parents=[common],
                          help="derivative of a weighted minor along a flow")
    c.add_argument("--J", required=True, help='semicolon-separated words')
    c.add_argument("--K", required=True, help='comma-separated coordinates, 1-based')
    c.add_argument("--z", required=True, help="signed field letter, e.g. 3 or -1")
    c.add_argument("--point")
    c.add_argument("--r", type=float, default=1.0)

    d = sub.add_parser("distance", parents=[common], help="interval estimate of d(x, y)")
    d.add_argument("--from", dest="from_point", required=True)
    d.add_argument("--to", dest="to_point", required=True)
    d.add_argument("--beam", type=int, default=8)
    d.add_argument("--grid", type=int, default=6)
    d.add_argument("--max-len", type=int, default=6)
    d.add_argument("--r-max", type=float, default=64.0)

    sub.add_parser("example5", parents=[common], help="end-to-end three-orbit example")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        default = "example5" if args.command == "example5" else None
        source = args.config or default
        if source is None:
            raise ConfigError("--config is required (a file path or a builtin name)")
        args.config = source
        fam = build_bracket_family(load_family(source))
        manifest = make_manifest(args)
        if args.command == "verify":
            return cmd_verify(fam, args, manifest)
        handler = {"bracket": cmd_bracket, "distance": cmd_distance,
                   "example5": cmd_example5}[args.command]
        payload, code = handler(fam, args)
        payload = {"schema_version": verify.SCHEMA_VERSION, **payload, "manifest": manifest}
        if args.out:
            Path(args.out).write_text(json.dumps(payload, indent=2))
        if args.command != "bracket":
            print(json.dumps(payload, indent=2))
        return code
    except (ConfigError, ParseDiagnostic, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, FlowError, ZeroDivisionError, ValueError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except verify.CheckAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
