"""perchsim command line: run, compare, validate, list, plot.

Exit codes: 0 success, 1 usage error, 2 input error (parse, bind, unreadable
or unwritable path), 3 numerical failure during simulation.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .metrics import MetricError, compare, cross_axis_deviation
from .model import ModelError, parse_model
from .robots import BUILTIN_MODELS
from .scenario import BUILTIN_SCENARIOS, ScenarioError, builtin_scenario, parse_scenario
from .simrun import BindError, SimulationError, TrajectoryLog, bind, resolve_model, run_scenario
from .svgplot import DEFAULT_CHANNELS, PlotError, render_svg

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
OUT_ENV = "PERCHSIM_OUT"
MANEUVER_PAIRS = {"tilt": ("claw-tilt", "dexcohand-tilt"), "pan": ("claw-pan", "dexcohand-pan")}


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0.0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a positive finite number: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="perchsim", description="Free-flyer handrail perching simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def outputs(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or the current directory)")
        sp.add_argument("--timestep", type=_positive, help="override the scenario timestep (s)")
        sp.add_argument("--diagnostics", action="store_true", help="log solver iterations and residual")
        sp.add_argument("--format", choices=("csv",), default="csv", help="log format")

    r = sub.add_parser("run", help="simulate one scenario (file or builtin id)")
    r.add_argument("scenario")
    outputs(r)
    c = sub.add_parser("compare", help="run both grippers for a maneuver and compare base deviation")
    c.add_argument("maneuver", choices=tuple(MANEUVER_PAIRS))
    outputs(c)
    v = sub.add_parser("validate", help="parse and bind scenario or model files without simulating")
    v.add_argument("inputs", nargs="+")
    sub.add_parser("list", help="list builtin scenarios and models")
    pl = sub.add_parser("plot", help="SVG chart of logged channels")
    pl.add_argument("csv")
    pl.add_argument("--channels", default=",".join(DEFAULT_CHANNELS), help="comma-separated channel names")
    pl.add_argument("--out", help="SVG path (default: next to the CSV)")
    return p


# ---------------------------------------------------------------------------
# helpers


def _load_scenario(ref: str):
    """(ScenarioDef, ModelDef) for a builtin id or scenario file."""
    if ref in BUILTIN_SCENARIOS:
        s = builtin_scenario(ref)
        return s, resolve_model(s.model)
    path = Path(ref)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read scenario {ref!r}: {exc.strerror}") from None
    try:
        s = parse_scenario(data)
    except ScenarioError as exc:
        raise InputError(f"{ref}: {exc}") from None
    try:
        model = resolve_model(s.model, path.parent)
    except ModelError as exc:
        raise InputError(f"{ref}: model {s.model!r}: {exc}") from None
    return s, model


def _out_dir(arg: str | None) -> Path:
    d = Path(arg or os.environ.get(OUT_ENV) or ".")
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {str(d)!r}: {exc.strerror}") from None
    if not os.access(d, os.W_OK):
        raise InputError(f"output directory {str(d)!r} is not writable")
    return d


def _simulate(scenario, model, args) -> TrajectoryLog:
    bind(scenario, model)
    return run_scenario(scenario, model, timestep=args.timestep, diagnostics=args.diagnostics)


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {str(path)!r}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    scenario, model = _load_scenario(args.scenario)
    out = _out_dir(args.out)
    log = _simulate(scenario, model, args)
    _write(out / f"{scenario.name}.csv", log.to_csv())
    try:
        text = cross_axis_deviation(log).to_text()
    except MetricError as exc:
        text = f"scenario {scenario.name}: no deviation report ({exc})\n"
    _write(out / f"{scenario.name}.report.txt", text)
    print(f"wrote {out / (scenario.name + '.csv')}")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    out = _out_dir(args.out)
    reports = []
    for name in MANEUVER_PAIRS[args.maneuver]:
        scenario, model = _load_scenario(name)
        log = _simulate(scenario, model, args)
        _write(out / f"{name}.csv", log.to_csv())
        reports.append(cross_axis_deviation(log))
    text = compare(*reports).to_text()
    _write(out / f"compare-{args.maneuver}.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    for ref in args.inputs:
        if ref in BUILTIN_SCENARIOS:
            s, model = _load_scenario(ref)
            bind(s, model)
            print(f"{ref}: ok (scenario)")
            continue
        if ref.startswith("builtin:"):
            resolve_model(ref)
            print(f"{ref}: ok (model)")
            continue
        try:
            text = Path(ref).read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read {ref!r}: {exc.strerror}") from None
        if text.lstrip().startswith(b"scenario"):
            s, model = _load_scenario(ref)
            bind(s, model)
            print(f"{ref}: ok (scenario, {len(s.phases)} phases, {s.duration:g} s)")
        else:
            try:
                m = parse_model(text.decode("utf-8"), name=Path(ref).stem)
            except UnicodeDecodeError as exc:
                raise InputError(f"{ref}: not UTF-8 (byte {exc.start})") from None
            except ModelError as exc:
                raise InputError(f"{ref}: {exc}") from None
            print(f"{ref}: ok (model, {len(m.links)} links)")
    return EXIT_OK


def cmd_list(args) -> int:
    print("scenarios:")
    for name in BUILTIN_SCENARIOS:
        print(f"  {name}")
    print("models:")
    for name in BUILTIN_MODELS:
        print(f"  builtin:{name}")
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        log = TrajectoryLog.read_csv(args.csv)
    except OSError as exc:
        raise InputError(f"cannot read {args.csv!r}: {exc.strerror}") from None
    except ValueError as exc:
        raise InputError(f"{args.csv}: malformed log: {exc}") from None
    channels = [c.strip() for c in args.channels.split(",") if c.strip()]
    try:
        svg = render_svg(log, channels, title=log.header.get("scenario") or None)
    except PlotError as exc:
        raise InputError(str(exc)) from None
    out = Path(args.out) if args.out else Path(args.csv).with_suffix(".svg")
    _write(out, svg)
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "validate": cmd_validate, "list": cmd_list, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, BindError, ScenarioError, ModelError, MetricError) as exc:
        print(f"perchsim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SimulationError as exc:
        print(f"perchsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
