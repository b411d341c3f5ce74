"""Build, evolve and measure finite-information quantities, or run ensemble experiments.

Exit codes: 0 success, 1 invariant or validation failure, 2 usage error,
3 a statistical check of an experiment failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .actualization import MeasurementEngine, RandomnessSource, measure, step_spontaneous
from .domains import ComputableReal, PrecisionExceededError, RationalQuantity, TruncatedReal
from .dynamics import (
    ShiftMap,
    TrajectoryStep,
    evolve_exact,
    iter_evolve_fiq,
    parse_map,
    rotate_fiq,
    trajectory_csv,
)
from .experiments import DEFAULT_PARAMS, load_config, run_experiment
from .fiq import Fiq, FiqError, validate
from .specs import SpecError, engine_spec, parse_engine, parse_quantity, quantity_from_doc, quantity_to_doc

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_STATS = 3


class UsageError(Exception):
    pass


def _echo_config(args: argparse.Namespace) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    config["version"] = __version__
    print("config: " + json.dumps(config, sort_keys=True), file=sys.stderr)
    return config


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_doc(path: str) -> dict:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _doc_with_meta(q, meta: dict) -> str:
    return json.dumps({**quantity_to_doc(q), "meta": meta}, indent=2) + "\n"


def cmd_make(args) -> int:
    config = _echo_config(args)
    q = parse_quantity(args.spec)
    _emit(_doc_with_meta(q, {"config": config}), args.out)
    return EXIT_OK


def _exact_rows(q, run, s: int) -> list[dict]:
    rows = []
    for step, value in enumerate([q] + run.values):
        if isinstance(value, TruncatedReal):
            n = m = value.n
            info = float(value.n)
        else:
            # an exact rational carries unbounded information
            n = m = ""
            info = math.inf
        rows.append(
            {
                "step": step,
                "emitted_bits": run.emitted[(step - 1) * s: step * s] if step else "",
                "N": n,
                "M": m,
                "information_content": info,
            }
        )
    return rows


def cmd_evolve(args) -> int:
    config = _echo_config(args)
    q = quantity_from_doc(_load_doc(args.input))
    dyn = parse_map(args.map)
    engine = parse_engine(args.engine)
    rng = RandomnessSource(args.seed, args.stream_id)

    if isinstance(q, ComputableReal):
        raise UsageError("computable reals cannot be evolved; take a Fiq prefix or use a rational")
    if isinstance(q, (RationalQuantity, TruncatedReal)):
        run = evolve_exact(q, dyn, args.steps)
        rows = _exact_rows(q, run, dyn.s if isinstance(dyn, ShiftMap) else 0)
        final = run.value
    else:
        rows = [TrajectoryStep(0, "", q).row()]
        f = q
        if isinstance(dyn, ShiftMap):
            for record in iter_evolve_fiq(f, dyn, args.steps, rng):
                f = _apply_engine(record.fiq, engine, rng)
                rows.append(TrajectoryStep(record.step, record.emitted, f).row())
        else:
            for step in range(1, args.steps + 1):
                f = _apply_engine(rotate_fiq(f, dyn), engine, rng)
                rows.append(TrajectoryStep(step, "", f).row())
        final = f
    if args.format == "json":
        _emit(json.dumps(rows, indent=2) + "\n", args.out)
    else:
        _emit(trajectory_csv(rows), args.out)
    meta = {"config": config, "engine": engine_spec(engine), "randomness": rng.lineage()}
    if args.out and args.out != "-":
        Path(args.out + ".meta.json").write_text(
            json.dumps({**meta, "final": quantity_to_doc(final)}, indent=2) + "\n"
        )
    if args.state_out:
        Path(args.state_out).write_text(_doc_with_meta(final, meta))
    return EXIT_OK


def _apply_engine(f: Fiq, engine, rng) -> Fiq:
    # the map step already advanced the clock; engines only actualize here
    if engine is None:
        return f
    if isinstance(engine, MeasurementEngine):
        return measure(f, engine, rng)[1]
    stepped = step_spontaneous(f, engine, rng)
    return Fiq(stepped.prefix, stepped.window, f.clock)


def cmd_measure(args) -> int:
    config = _echo_config(args)
    q = quantity_from_doc(_load_doc(args.input))
    if not isinstance(q, Fiq):
        raise UsageError("measure works on fiq documents")
    rng = RandomnessSource(args.seed, args.stream_id, args.counter)
    start = rng.lineage()
    reading, f = measure(q, MeasurementEngine(args.resolution), rng)
    print(reading)
    meta = {"config": config, "reading": reading, "randomness": {"start": start, "end": rng.lineage()}}
    if args.out:
        _emit(_doc_with_meta(f, meta), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _echo_config(args)
    doc = _load_doc(args.input)
    if doc.get("kind", "fiq") != "fiq":
        raise UsageError("validate checks fiq documents")
    doc = {k: doc[k] for k in ("prefix", "window", "clock") if k in doc}
    try:
        report = validate(doc)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    payload = {**report.to_dict(), "config": config}
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_experiment(args) -> int:
    config = load_config(args.config) if args.config else {}
    if args.name:
        config["name"] = args.name
    if args.seed is not None:
        config["seed"] = args.seed
    if args.workers is not None:
        config["workers"] = args.workers
    try:
        run = run_experiment(config)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print("config: " + json.dumps(run.config, sort_keys=True), file=sys.stderr)
    if args.out:
        paths = run.write(args.out)
        print(f"wrote {paths['results']} and {paths['summary']}", file=sys.stderr)
    else:
        sys.stdout.write(run.summary_json())
    for check in run.report.checks:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status} {check['name']}: {check['value']} ({check['tolerance']})", file=sys.stderr)
    return EXIT_OK if run.passed else EXIT_STATS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fiqsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fiqsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out", default=None, help="output path (stdout when omitted)")
        if seed:
            p.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
            p.add_argument("--stream-id", type=int, default=0)

    p = sub.add_parser("make", help="build a quantity from a spec string and write its JSON")
    p.add_argument("spec", help='e.g. "rational:1/3" or "fiq:prefix=101,window=3/10;1/4"')
    common(p, seed=False)
    p.set_defaults(func=cmd_make)

    p = sub.add_parser("evolve", help="apply a map for some steps and write the trajectory CSV")
    p.add_argument("input", help="quantity JSON file, or - for stdin")
    p.add_argument("--map", default="shift:1")
    p.add_argument("--engine", default="none")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--state-out", default=None, help="write the final quantity JSON here")
    p.add_argument("--format", choices=["csv", "json"], default="csv", help="trajectory format")
    common(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("measure", help="measure the leading digits and write the updated quantity")
    p.add_argument("input")
    p.add_argument("--resolution", type=int, required=True)
    p.add_argument("--counter", type=int, default=0, help="resume the randomness stream at this bit")
    common(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("validate", help="check the invariants of a fiq JSON file")
    p.add_argument("input")
    common(p, seed=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("experiment", help="run a named experiment from a JSON config")
    p.add_argument("--name", choices=sorted(DEFAULT_PARAMS), default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="directory for results.csv and summary.json")
    p.set_defaults(func=cmd_experiment)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("steps", "resolution"):
        value = getattr(args, name, None)
        if value is not None and value < (1 if name == "resolution" else 0):
            print(f"fiqsim: error: --{name} out of range", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except FiqError as exc:
        print(f"fiqsim: invalid quantity: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PrecisionExceededError as exc:
        print(f"fiqsim: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (UsageError, SpecError, ValueError, TypeError) as exc:
        print(f"fiqsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
