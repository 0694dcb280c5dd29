"""Command-line entry point.

Exit codes:
    0  success
    2  bad scenario, input file or arguments
    3  no timing lock in the event log
    4  analysis finished without a positive secure key
    5  any other pipeline failure
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import io
from .errors import ConfigError, NoLockError, QkdLabError

EXIT_OK, EXIT_CONFIG, EXIT_NO_LOCK, EXIT_NO_KEY, EXIT_FAILURE = 0, 2, 3, 4, 5

log = logging.getLogger("qkdlab")


def _key_exit(report: dict) -> int:
    return EXIT_OK if report.get("secure_bits", 0) > 0 else EXIT_NO_KEY


def cmd_simulate(args) -> int:
    from .runner import simulate
    from .scenario import bundled_scenario_path, load_scenario

    path = bundled_scenario_path(args.scenario[1:]) if args.scenario.startswith("@") else args.scenario
    sc = load_scenario(path, seed=args.seed)
    log.info("simulating %s (%.1f s, seed %d) into %s", sc.name, sc.duration_s, sc.seed, args.out)
    report = simulate(sc, args.out, overwrite=args.force)
    print(json.dumps({k: report[k] for k in io.REPORT_FIELDS}, indent=2))
    return _key_exit(report)


def cmd_analyze(args) -> int:
    from .runner import analyze_files

    report = analyze_files(args.events, args.traj, args.out)
    print(json.dumps({k: report[k] for k in io.REPORT_FIELDS}, indent=2))
    return _key_exit(report)


def cmd_compensate(args) -> int:
    from .polcomp import optimize_compensation, stokes_from_counts

    series = io.read_counts(args.counts)
    if not series:
        raise ConfigError(f"{args.counts}: no counts rows")
    rows = []
    for t, by_state in series:
        missing = [s for s in ("H", "V", "D", "A") if s not in by_state]
        if missing:
            raise ConfigError(f"{args.counts}: t_s={t}: missing states {missing}")
        states = {k: stokes_from_counts(v) for k, v in by_state.items()}
        res = optimize_compensation(states, seed=args.seed)
        rows.append({"theta1_deg": res.stack.theta1, "theta2_deg": res.stack.theta2,
                     "theta3_deg": res.stack.theta3, "predicted_qber": res.predicted_qber,
                     "t_s": t, "pre_qber": res.initial_qber})
        log.info("t=%s pre %.4f post %.4f", t, res.initial_qber, res.predicted_qber)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    io.write_compensation(args.out, rows)
    return EXIT_OK


def cmd_report(args) -> int:
    report = io.read_json(Path(args.run) / "report.json")
    missing = [k for k in io.REPORT_FIELDS if k not in report]
    if missing:
        raise ConfigError(f"{args.run}/report.json: missing fields {missing}")
    if args.format == "json":
        print(json.dumps({k: report[k] for k in io.REPORT_FIELDS}, indent=2))
    else:
        sys.stdout.write(io.report_to_csv(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qkdlab", description="Free-space decoy-state BB84 simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario end to end")
    s.add_argument("scenario", help="scenario TOML file, or @paper for the bundled one")
    s.add_argument("--out", required=True, help="run directory to create")
    s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    s.add_argument("--force", action="store_true", help="replace an existing run directory")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="timing recovery and key extraction on recorded logs")
    a.add_argument("events", help="events CSV with its .json sidecar")
    a.add_argument("--traj", required=True, help="trajectory CSV")
    a.add_argument("--out", required=True, help="directory for report and key")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compensate", help="waveplate angles from tomography counts")
    c.add_argument("counts", help="counts CSV")
    c.add_argument("--out", required=True, help="compensation CSV to write")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_compensate)

    r = sub.add_parser("report", help="print a run report")
    r.add_argument("run", nargs="?", default=".", help="run directory (default: current)")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoLockError as exc:
        print(f"error [timesync]: {exc}", file=sys.stderr)
        return EXIT_NO_LOCK
    except QkdLabError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:  # noqa: BLE001
        print(f"error [pipeline]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
