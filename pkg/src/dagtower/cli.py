"""Command-line entry point.

Exit status: 0 on success, 2 on a usage or input error, 3 when a computation is
refused (size caps, divergent series); refusals print a JSON reason on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dag import DagError, count_dags, enumerate_dags
from .features import DivergentTail, TargetUnreachable, extract_features, solve_theta_star
from .formats import read_dags, write_dags
from .mec import CapExceeded, mec_report
from .montecarlo import ExperimentConfig, collect_samples, regeneration_stats, run_experiment, write_result
from .tower import cached_layer_dp, regeneration_points, sample_dag_given_vector, sample_tower_vector, \
    tower_dag_count, tower_decompose

OUT_ENV = "DAGTOWER_OUT"
EXIT_USAGE = 2
EXIT_REFUSED = 3


class Refusal(Exception):
    def __init__(self, reason: str, message: str, **detail):
        super().__init__(message)
        self.payload = {"error": reason, "message": message, **detail}


def _common(parser: argparse.ArgumentParser, top: bool) -> None:
    # subparsers suppress defaults so a flag given before the subcommand survives
    d = None if top else argparse.SUPPRESS
    parser.add_argument("--seed", type=int, default=d, help="master seed (random if omitted)")
    parser.add_argument("--exact", action="store_true", default=False if top else argparse.SUPPRESS,
                        help="exact integer DP instead of floating point")
    parser.add_argument("--out", default=d, help="output file, or directory for experiments")
    parser.add_argument("--workers", type=int, default=d, help="worker processes (default 1)")
    parser.add_argument("--pretty", action="store_true", default=False if top else argparse.SUPPRESS,
                        help="human-readable table instead of JSON")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dagtower", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"dagtower {__version__}")
    _common(ap, top=True)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="number of labeled DAGs on n vertices")
    p.add_argument("--n", type=int, required=True)
    p = sub.add_parser("enumerate", help="stream every DAG on n <= 6 vertices")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p = sub.add_parser("sample", help="stream uniform random DAGs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p = sub.add_parser("tower", help="tower vector, regeneration points and features")
    p.add_argument("--in", dest="infile", required=True)
    p = sub.add_parser("mec", help="essential graph and equivalence class size")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--oracle", action="store_true", help="cross-check by brute force")
    p = sub.add_parser("theta", help="solve for the tilt matching a regeneration rate")
    p.add_argument("--c1", required=True, help="regeneration rate in (0,1), or 'auto'")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--auto-n", type=int, default=500, help="size used by --c1 auto")
    p.add_argument("--auto-samples", type=int, default=4000)
    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p = sub.add_parser("verify", help="oracle cross-validation suites")
    level = p.add_mutually_exclusive_group()
    level.add_argument("--level", choices=("fast", "full"), default="fast")
    level.add_argument("--fast", dest="level", action="store_const", const="fast")
    level.add_argument("--full", dest="level", action="store_const", const="full")

    for action in sub.choices.values():
        _common(action, top=False)
    return ap


def _pretty(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        lines = []
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not _flat(v):
                lines.append(f"{pad}{k}:")
                lines.append(_pretty(v, indent + 1))
            else:
                lines.append(f"{pad}{k:<24} {_scalar(v)}")
        return "\n".join(lines)
    if isinstance(obj, list):
        return "\n".join(_pretty(x, indent) if isinstance(x, dict) else f"{pad}{_scalar(x)}" for x in obj)
    return pad + _scalar(obj)


def _flat(v) -> bool:
    return isinstance(v, list) and all(not isinstance(x, dict) for x in v)


def _scalar(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, list):
        return json.dumps(v)
    return str(v)


def _emit(args, obj) -> None:
    text = _pretty(obj) if args.pretty else json.dumps(obj, sort_keys=False)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def _read_single(path: str):
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    dags = read_dags(text)
    if len(dags) != 1:
        raise DagError(f"expected exactly one DAG record in {path}, found {len(dags)}")
    return dags[0]


def _stream(args):
    if args.out:
        return open(args.out, "w")
    return sys.stdout


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
    print(json.dumps({"seed": args.seed}), file=sys.stderr)
    return args.seed


def cmd_count(args) -> None:
    if args.n < 0:
        raise DagError("n must be non-negative")
    _emit(args, count_dags(args.n))


def cmd_enumerate(args) -> None:
    from .dag import MAX_ENUMERATE

    if args.n > MAX_ENUMERATE:
        raise Refusal("enumeration_cap", f"enumeration refuses n={args.n} > {MAX_ENUMERATE}",
                      size=args.n, cap=MAX_ENUMERATE)
    out = _stream(args)
    try:
        write_dags(enumerate_dags(args.n), out, args.format)
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_sample(args) -> None:
    if args.n < 1 or args.count < 0:
        raise DagError("need n >= 1 and count >= 0")
    seed = _seed(args)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    dp = cached_layer_dp(args.n, args.exact)
    out = _stream(args)
    try:
        if args.format == "text":
            out.write(f"# seed {seed}\n")
        for _ in range(args.count):
            h = sample_tower_vector(dp, rng)
            write_dags([sample_dag_given_vector(h, rng)], out, args.format)
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_tower(args) -> None:
    g = _read_single(args.infile)
    tower, h = tower_decompose(g)
    taus, r = regeneration_points(h)
    split = extract_features(h)
    _emit(args, {
        "n": g.n,
        "tower_vector": list(h),
        "layers": [list(layer) for layer in tower.layers],
        "regeneration_points": list(taus),
        "R": r,
        "features": [list(f) for f in split.features],
        "free_free": split.free_free,
        "dags_with_this_tower": tower_dag_count(tower),
    })


def cmd_mec(args) -> None:
    g = _read_single(args.infile)
    _emit(args, mec_report(g, oracle=args.oracle))


def cmd_theta(args) -> None:
    out = {}
    if args.c1 == "auto":
        seed = _seed(args)
        data = collect_samples(args.auto_n, args.auto_samples, seed, args.workers or 1, args.exact,
                               graphs=False)
        rec = regeneration_stats(data, args.auto_n, seed)[0][0]
        c1 = rec.estimate
        out.update({"c1_source": "estimated", "c1_n": args.auto_n, "c1_samples": rec.samples,
                    "c1_stderr": rec.stderr, "seed": seed})
    else:
        try:
            c1 = float(args.c1)
        except ValueError:
            raise DagError(f"--c1 expects a number or 'auto', got {args.c1!r}") from None
        out["c1_source"] = "given"
    sol = solve_theta_star(c1, args.tol)
    _emit(args, {"c1": c1, **out, **sol.as_dict()})


def cmd_experiment(args) -> None:
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DagError(f"cannot read config {args.config}: {exc}") from None
    if args.seed is not None:
        data["seed"] = args.seed
    elif "seed" not in data:
        data["seed"] = secrets.randbits(63)
    if args.workers is not None:
        data["workers"] = args.workers
    if args.exact:
        data["exact"] = True
    cfg = ExperimentConfig.from_dict(data)
    print(json.dumps({"seed": cfg.seed}), file=sys.stderr)
    out_dir = args.out or cfg.output or os.environ.get(OUT_ENV) or "results"
    result = run_experiment(cfg)
    path = write_result(result, out_dir)
    if args.pretty:
        for r in result.records:
            print(f"{r.statistic:<26} n={r.n:<5} {r.estimate:.6g} ± {r.stderr or 0:.2g}")
    print(json.dumps({"output": str(path), "records": len(result.records), **result.meta,
                      "seed": cfg.seed}))


def cmd_verify(args) -> None:
    from .verify import run_verify

    seed = args.seed if args.seed is not None else 0
    results = run_verify(args.level, seed)
    if args.pretty:
        for r in results:
            print(f"{'PASS' if r['ok'] else 'FAIL'}  {r['check']:<30} {r['seconds']:>8.2f}s  {r['detail'] or ''}")
    else:
        print(json.dumps({"level": args.level, "seed": seed, "results": results}))
    if not all(r["ok"] for r in results):
        raise SystemExit(1)


COMMANDS = {
    "count": cmd_count,
    "enumerate": cmd_enumerate,
    "sample": cmd_sample,
    "tower": cmd_tower,
    "mec": cmd_mec,
    "theta": cmd_theta,
    "experiment": cmd_experiment,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except Refusal as exc:
        print(json.dumps(exc.payload), file=sys.stderr)
        return EXIT_REFUSED
    except CapExceeded as exc:
        print(json.dumps({"error": exc.reason, "message": str(exc), "size": exc.size, "cap": exc.cap}),
              file=sys.stderr)
        return EXIT_REFUSED
    except (DivergentTail, TargetUnreachable) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_REFUSED
    except (DagError, OSError) as exc:
        print(f"dagtower: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
