"""The testbed command-line front door.

    testbed run --scenario <file> [--realtime] [--out <dir>]
    testbed report <dir>
    testbed rms <telemetry.csv>

Exit codes: 0 success, 2 configuration/usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .scenario import ScenarioError, load_scenario


def _cmd_run(args) -> int:
    try:
        scn = load_scenario(args.scenario)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else Path("runs") / (
        scn.name + ("-realtime" if args.realtime else ""))
    try:
        if args.realtime:
            from .realtime import run_realtime

            art = run_realtime(scn, out_dir, args.scenario)
        else:
            art = harness.run_lockstep(scn, out_dir)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(f"run complete: {art.out_dir}")
    print(art.report_txt.read_text(encoding="utf-8"), end="")
    return 0


def _cmd_report(args) -> int:
    out_dir = Path(args.dir)
    telemetry = out_dir / "telemetry.csv"
    delays = out_dir / "delay_trace.csv"
    try:
        rows = harness.read_telemetry_csv(telemetry)
        delay_rows = harness.read_delay_csv(delays) if delays.exists() else []
        text, _ = harness.build_report(rows, delay_rows)
    except (OSError, harness.CsvFormatError, ValueError) as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return 1
    print(text, end="")
    return 0


def _cmd_rms(args) -> int:
    try:
        rows = harness.read_telemetry_csv(args.csv)
        rms = harness.compute_rms(rows)
    except (OSError, harness.CsvFormatError, ValueError) as exc:
        print(f"rms failed: {exc}", file=sys.stderr)
        return 1
    est, meas = rms.ref_vs_estimated, rms.ref_vs_measured
    print(f"ref vs estimated: x={est.x:.6f} y={est.y:.6f} z={est.z:.6f} norm={est.norm:.6f}")
    print(f"ref vs measured : x={meas.x:.6f} y={meas.y:.6f} z={meas.z:.6f} norm={meas.norm:.6f}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="testbed",
                                     description="cloud-robot control loop testbed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--realtime", action="store_true",
                       help="three-process run over loopback instead of lockstep")
    p_run.add_argument("--out", default=None, help="artifact directory")
    p_run.set_defaults(func=_cmd_run)

    p_report = sub.add_parser("report", help="summarize a run directory")
    p_report.add_argument("dir")
    p_report.set_defaults(func=_cmd_report)

    p_rms = sub.add_parser("rms", help="RMS errors of a telemetry CSV")
    p_rms.add_argument("csv")
    p_rms.set_defaults(func=_cmd_rms)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
