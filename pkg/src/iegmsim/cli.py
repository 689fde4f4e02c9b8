"""Command-line front end.

    iegmsim run SCENARIO --out trace.csv [--plot trace.svg]
    iegmsim plot trace.csv --out trace.svg [--t-start S] [--t-end S]
    iegmsim plot --scenario SCENARIO --out trace.svg
    iegmsim validate SCENARIO
    iegmsim list-scenarios

Exit codes: 0 success, 1 scenario or simulation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from .engine import run_simulation
from .errors import ConfigError, SimulationFault
from .scenario import builtin_names, load_scenario_file
from .trace import read_trace_csv, summarize_events, write_trace_csv

EXIT_OK = 0
EXIT_SCENARIO = 1
EXIT_IO = 2


def _err(msg: str) -> None:
    print(f"iegmsim: {msg}", file=sys.stderr)


def _scenario_ref(args):
    ref = args.scenario or args.scenario_pos
    if not ref:
        raise ConfigError("no scenario given")
    return ref


def _load(args):
    s = load_scenario_file(_scenario_ref(args))
    if args.duration_ms is not None or args.dt_ms is not None:
        s = s.with_run(args.duration_ms, args.dt_ms)
    return s


def _window(args):
    lo = None if args.t_start is None else args.t_start * 1000.0
    hi = None if args.t_end is None else args.t_end * 1000.0
    if lo is not None and hi is not None and hi < lo:
        raise ConfigError("--t-end must not be before --t-start")
    return lo, hi


def _render(csv_path, out, args, title=None) -> int:
    from .plotting import plot_trace

    cols = read_trace_csv(csv_path)
    lo, hi = _window(args)
    return plot_trace(cols, out, lo, hi, title=title)


def cmd_run(args) -> int:
    try:
        s = _load(args)
        if args.plot:
            _window(args)
        trace = run_simulation(s)
    except (ConfigError, SimulationFault) as exc:
        _err(str(exc))
        return EXIT_SCENARIO
    try:
        write_trace_csv(trace, args.out)
        if args.plot:
            _render(args.out, args.plot, args, title=s.name)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_IO
    print(f"scenario={s.name}")
    print(f"frames={len(trace)}")
    for line in summarize_events(trace).lines():
        print(line)
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        _window(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_SCENARIO
    if args.scenario:
        try:
            s = _load(args)
            trace = run_simulation(s)
        except (ConfigError, SimulationFault) as exc:
            _err(str(exc))
            return EXIT_SCENARIO
        with tempfile.TemporaryDirectory() as tmp:
            csv_path = Path(tmp) / "trace.csv"
            try:
                write_trace_csv(trace, csv_path)
                n = _render(csv_path, args.out, args, title=s.name)
            except (OSError, ValueError) as exc:
                _err(str(exc))
                return EXIT_IO
    else:
        if not args.scenario_pos:
            _err("plot needs a trace CSV or --scenario")
            return EXIT_IO
        try:
            n = _render(args.scenario_pos, args.out, args)
        except (OSError, ValueError) as exc:
            _err(str(exc))
            return EXIT_IO
    print(f"frames={n}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        _load(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_SCENARIO
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    print("OK")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in builtin_names():
        try:
            desc = load_scenario_file(name).description
        except ConfigError as exc:  # a broken built-in should not hide the rest
            desc = f"(invalid: {exc})"
        print(f"{name}\t{desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iegmsim", description="Closed-loop IEGM and DDD pacemaker simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp, positional_help):
        sp.add_argument("scenario_pos", nargs="?", metavar="SCENARIO", help=positional_help)
        sp.add_argument("--scenario", help="scenario file or built-in name")
        sp.add_argument("--duration-ms", type=float, help="override run duration (ms)")
        sp.add_argument("--dt-ms", type=float, help="override step size (ms)")

    def window_args(sp):
        sp.add_argument("--t-start", type=float, help="plot window start (s)")
        sp.add_argument("--t-end", type=float, help="plot window end (s)")

    r = sub.add_parser("run", help="run a scenario and write the trace CSV")
    scenario_args(r, "scenario file or built-in name")
    r.add_argument("--out", required=True, help="trace CSV path")
    r.add_argument("--plot", help="also render an SVG of the trace here")
    window_args(r)
    r.set_defaults(func=cmd_run)

    pl = sub.add_parser("plot", help="render a trace CSV (or a fresh run) as SVG")
    scenario_args(pl, "trace CSV to plot")
    pl.add_argument("--out", required=True, help="output figure path (.svg)")
    window_args(pl)
    pl.set_defaults(func=cmd_plot)

    v = sub.add_parser("validate", help="check a scenario file")
    scenario_args(v, "scenario file or built-in name")
    v.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
