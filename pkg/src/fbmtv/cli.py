"""Command-line front end: ``fbmtv {simulate,tv,crossings,loctime,mc}``.

Exit status is 0 on success, 1 for invalid input and 2 when an internal
identity fails (the message names the offending seed). Every file written is
accompanied by ``<file>.manifest.json`` recording the command, configuration
(and its SHA-256), seed, timestamps and SHA-256 digests of the outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .conc_lab import EXPERIMENTS, McConfig, TailCurve, run_experiment
from .core import LevelGrid, read_path_csv, write_path_csv
from .crossings import level_crossings, strip_crossings
from .errors import FbmTvError, InvariantViolation, ValidationError
from .fbm import FbmSpec, sample_fbm
from .local_time import local_time_curve
from .variation import dtv, ttv, utv

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on the interpreter
    import tomli as tomllib


def fmt(x: float) -> str:
    """Full double precision (17 significant digits)."""
    return f"{float(x):.17g}"


def _json_value(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_json_value(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _json_value(obj, indent, 0) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Run:
    """Collects outputs of one command and writes their manifests."""

    def __init__(self, argv, command, config=None, seed=None):
        self.argv = list(argv)
        self.command = command
        self.config = config or {}
        self.seed = seed
        self.started = datetime.now(timezone.utc).isoformat()
        self.outputs: list[Path] = []

    def add(self, path):
        self.outputs.append(Path(path))

    def finish(self):
        finished = datetime.now(timezone.utc).isoformat()
        digests = [{"path": str(p), "sha256": _sha256(p)} for p in self.outputs]
        manifest = {
            "tool": "fbmtv",
            "version": __version__,
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "config_sha256": hashlib.sha256(dumps(self.config).encode()).hexdigest(),
            "seed": self.seed,
            "started": self.started,
            "finished": finished,
            "outputs": digests,
        }
        for p in self.outputs:
            Path(f"{p}.manifest.json").write_text(dumps(manifest))


def _write_text(path: str | None, text: str, run: _Run):
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text)
    run.add(path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args, run: _Run):
    spec = FbmSpec(args.hurst, args.steps, args.dt, args.seed, args.method)
    run.config = {"hurst": spec.h, "steps": spec.n_steps, "dt": spec.dt, "method": spec.method}
    run.seed = spec.seed
    path = sample_fbm(spec)
    if args.out is None:
        buf = io.StringIO()
        buf.write("t,value\n")
        for t, v in zip(path.times, path.values):
            buf.write(f"{fmt(t)},{fmt(v)}\n")
        sys.stdout.write(buf.getvalue())
    else:
        write_path_csv(path, args.out)
        run.add(args.out)


def cmd_tv(args, run: _Run):
    path = read_path_csv(args.input)
    fn = {"ttv": ttv, "utv": utv, "dtv": dtv}[args.kind]
    res = fn(path, args.c)
    run.config = {"input": args.input, "c": res.c, "kind": args.kind}
    print(fmt(res.value))
    if args.witness:
        with open(args.witness, "w", newline="") as fh:
            fh.write("s_index,t_index,payoff\n")
            for (s, t), pay in zip(res.witness, res.payoffs):
                fh.write(f"{s},{t},{fmt(pay)}\n")
        run.add(args.witness)


def cmd_crossings(args, run: _Run):
    path = read_path_csv(args.input)
    grid = LevelGrid(args.c, args.rho)
    summary = level_crossings(path, None, grid)
    run.config = {"input": args.input, "c": grid.c, "rho": grid.rho, "a": args.a}
    report = summary.to_dict()
    if args.a is not None:
        sc = strip_crossings(path, None, args.c, args.a)
        report["strip"] = {"a": float(args.a), "u": sc.u, "d": sc.d, "n": sc.n}
    if args.report == "json":
        text = dumps(report)
    else:
        buf = io.StringIO()
        buf.write("p,lower,u,d,n\n")
        for row in report["per_level"]:
            buf.write(f"{row['p']},{fmt(row['lower'])},{row['u']},{row['d']},{row['n']}\n")
        text = buf.getvalue()
    _write_text(args.out, text, run)


def _parse_levels(spec: str) -> np.ndarray:
    try:
        a0, a1, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ValidationError(f"--levels must look like a0:a1:step, got {spec!r}") from None
    if not (step > 0 and a1 >= a0):
        raise ValidationError("--levels needs a0 <= a1 and step > 0")
    n = int(math.floor((a1 - a0) / step * (1 + 1e-12))) + 1
    return a0 + step * np.arange(n)


def cmd_loctime(args, run: _Run):
    path = read_path_csv(args.input)
    levels = _parse_levels(args.levels)
    curve = local_time_curve(path, args.c, args.hurst, levels, args.ckh)
    run.config = {"input": args.input, "hurst": args.hurst, "c": args.c, "ckh": args.ckh, "levels": args.levels}
    buf = io.StringIO()
    buf.write("level,density\n")
    for a, d in zip(curve.levels, curve.density):
        buf.write(f"{fmt(a)},{fmt(d)}\n")
    _write_text(args.out, buf.getvalue(), run)


def _load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_tail_csv(curve: TailCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["v", "p", "stderr"])
        for v, p, s in zip(curve.v, curve.p, curve.stderr):
            w.writerow([fmt(v), fmt(p), fmt(s)])


def cmd_mc(args, run: _Run):
    data = _load_config(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    cfg = McConfig.from_mapping(data)
    run.config = cfg.echo()
    run.seed = cfg.seed
    report, result = run_experiment(args.experiment, cfg)
    _write_text(args.out, dumps(report.to_dict()), run)
    if isinstance(result, TailCurve):
        tail_path = args.tail_csv or (str(Path(args.out).with_suffix("")) + ".tail.csv" if args.out else None)
        if tail_path:
            write_tail_csv(result, tail_path)
            run.add(tail_path)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fbmtv", description="Truncated variation, crossings and local time of sampled fBm.")
    p.add_argument("--version", action="version", version=f"fbmtv {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="sample an fBm path to CSV")
    s.add_argument("--hurst", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--dt", type=float, default=None, help="time step (default 1/steps)")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--method", choices=("fft", "chol"), default="fft")
    s.add_argument("--out", default=None, help="output CSV (default: stdout)")

    t = sub.add_parser("tv", help="truncated variation of a path")
    t.add_argument("--input", required=True)
    t.add_argument("--c", type=float, required=True)
    t.add_argument("--kind", choices=("ttv", "utv", "dtv"), default="ttv")
    t.add_argument("--witness", default=None, help="CSV of optimal index pairs")

    c = sub.add_parser("crossings", help="level and strip crossing counts")
    c.add_argument("--input", required=True)
    c.add_argument("--c", type=float, required=True)
    c.add_argument("--rho", type=float, default=0.0)
    c.add_argument("--a", type=float, default=None, help="also count crossings of [a, a+c]")
    c.add_argument("--report", choices=("json", "csv"), default="json")
    c.add_argument("--out", default=None)

    lt = sub.add_parser("loctime", help="normalized upcrossing local-time curve")
    lt.add_argument("--input", required=True)
    lt.add_argument("--hurst", type=float, required=True)
    lt.add_argument("--c", type=float, required=True)
    lt.add_argument("--ckh", type=float, required=True, help="estimate of the limit constant")
    lt.add_argument("--levels", required=True, help="a0:a1:step")
    lt.add_argument("--out", default=None)

    m = sub.add_parser("mc", help="Monte Carlo experiments")
    m.add_argument("experiment", choices=EXPERIMENTS)
    m.add_argument("--config", required=True, help="TOML file of McConfig keys")
    m.add_argument("--out", default=None, help="JSON report (default: stdout)")
    m.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    m.add_argument("--workers", type=int, default=None, help="worker processes (FBMTV_WORKERS overrides)")
    m.add_argument("--tail-csv", default=None, help="tail curve CSV (tails only)")
    return p


_COMMANDS = {
    "simulate": cmd_simulate,
    "tv": cmd_tv,
    "crossings": cmd_crossings,
    "loctime": cmd_loctime,
    "mc": cmd_mc,
}


def dispatch(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    # "--levels -1:1:0.1" would otherwise be read as an unknown option
    for i in range(len(argv) - 1):
        if argv[i] == "--levels":
            argv[i : i + 2] = [f"--levels={argv[i + 1]}"]
            break
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "simulate" and args.dt is None:
        args.dt = 1.0 / args.steps if args.steps > 0 else 1.0
    run = _Run(argv, args.command)
    try:
        _COMMANDS[args.command](args, run)
    except InvariantViolation as exc:
        print(f"fbmtv: invariant violation: {exc}", file=sys.stderr)
        return 2
    except (FbmTvError, ValueError, OSError) as exc:
        print(f"fbmtv: error: {exc}", file=sys.stderr)
        return 1
    run.finish()
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":  # pragma: no cover
    main()
