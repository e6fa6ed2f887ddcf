"""Command-line front end: simulate scenarios, solve allocations, run sweeps.

Exit codes: 0 success, 1 usage error, 2 parse error, 3 numerical error.
Log verbosity is taken from the MIDCSIM_LOG environment variable
(DEBUG/INFO/WARNING/ERROR, default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import scenario_io
from .coordinator import OptimizationInput, brute_force_droop, optimize_droop
from .errors import MidcError, ScenarioParseError
from .sim import run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_NUMERICAL = 3

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser():
    parser = _Parser(
        prog="midcsim",
        description="Simulate emergency power support in multi-infeed "
                    "HVDC systems and optimize droop coefficients.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one scenario file")
    p_sim.add_argument("scenario", help="TOML scenario file")
    p_sim.add_argument("--out", default="out",
                       help="output directory for trace.csv and metrics.json")

    p_opt = sub.add_parser("optimize",
                           help="solve one coefficient allocation from JSON")
    p_opt.add_argument("input", help="JSON allocation-input file")
    p_opt.add_argument("--verify", action="store_true",
                       help="cross-check against the grid-search oracle")
    p_opt.add_argument("--resolution", type=float, default=0.005,
                       help="oracle grid step in p.u. (default 0.005)")

    p_sweep = sub.add_parser("sweep",
                             help="run a scenario once per parameter value")
    p_sweep.add_argument("scenario", help="TOML scenario file")
    p_sweep.add_argument("--param", required=True,
                         help="dotted field path, e.g. droop.k_droop")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values; use colons for "
                              "per-line sets, e.g. 0,10,20,31:21:26")
    p_sweep.add_argument("--out", default="out",
                         help="output directory for sweep.csv")
    return parser


def _write_outputs(trace, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    payload = dict(trace.metrics)
    if trace.fault is not None:
        payload["fault"] = {
            "line_index": trace.fault.line_index,
            "detection_time": trace.fault.detection_time,
            "p_loss": trace.fault.p_loss,
        }
        payload["dispatch_time"] = trace.dispatch_time
    if trace.optimization is not None:
        payload["optimization"] = trace.optimization.to_dict()
    (out / "metrics.json").write_text(json.dumps(payload, indent=2) + "\n")
    return out


def cmd_simulate(args):
    try:
        scenario = scenario_io.load_scenario(args.scenario)
    except (ScenarioParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        trace = run(scenario)
    except MidcError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = _write_outputs(trace, args.out)
    m = trace.metrics
    print(f"wrote {out / 'trace.csv'} and {out / 'metrics.json'}")
    print(f"nadir {m['frequency_nadir_hz']:.4f} Hz, steady deviation "
          f"{m['steady_state_deviation_hz']:+.4f} Hz, "
          f"shed {m['total_shed_pu']:.4f} p.u.")
    return EXIT_OK


def cmd_optimize(args):
    try:
        doc = json.loads(Path(args.input).read_text())
        inp = OptimizationInput.from_dict(doc)
    except (OSError, json.JSONDecodeError, KeyError, TypeError,
            ValueError) as exc:
        print(f"error: bad allocation input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        result = optimize_droop(inp)
    except MidcError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    payload = result.to_dict()
    if args.verify:
        try:
            oracle = brute_force_droop(inp, resolution=args.resolution)
        except ValueError as exc:
            print(f"error: oracle cannot run: {exc}", file=sys.stderr)
            return EXIT_USAGE
        payload["verify"] = {
            "oracle_objective": oracle.objective,
            "objective_gap": oracle.objective - result.objective,
            "resolution": args.resolution,
        }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _parse_values(text):
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            values.append([float(x) for x in item.split(":")])
        else:
            values.append(float(item))
    if not values:
        raise ValueError("no sweep values given")
    return values


def cmd_sweep(args):
    try:
        values = _parse_values(args.values)
    except ValueError as exc:
        print(f"error: bad --values: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        base_doc = scenario_io.load_document(args.scenario)
    except (ScenarioParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    rows = []
    for value in values:
        doc = scenario_io.copy_document(base_doc)
        try:
            scenario_io.apply_override(doc, args.param, value)
            scenario = scenario_io.build_scenario(doc)
        except ScenarioParseError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        try:
            trace = run(scenario)
        except MidcError as exc:
            print(f"simulation error at {args.param}={value}: {exc}",
                  file=sys.stderr)
            return EXIT_NUMERICAL
        label = ":".join(repr(v) for v in value) if isinstance(value, list) \
            else repr(value)
        rows.append((label, trace.metrics))

    keys = list(rows[0][1].keys())
    header = ["value"] + keys
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for label, metrics in rows:
        lines.append(",".join([label] + [_fmt(metrics[k]) for k in keys]))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def main(argv=None):
    level = os.environ.get("MIDCSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "optimize":
        return cmd_optimize(args)
    return cmd_sweep(args)


if __name__ == "__main__":
    sys.exit(main())
