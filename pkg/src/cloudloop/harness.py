"""Deterministic scenario runner and metrics pipeline.

The lockstep runner drives both agents and both channel directions off one
virtual clock, in a fixed per-quantum order (waypoint injection, channel
delivery, robot, cloud), so a (config, seeds) pair maps to bit-identical
artifacts on every platform.

Artifacts per run: telemetry.csv (control-tick records), delay_trace.csv
(per-packet applied delays), report.txt / summary.json (RMS, delay stats,
settle times).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .cloud_agent import CloudAgent
from .netem import DelayChannel, PacketTrace
from .robot_agent import RobotAgent
from .scenario import ScenarioConfig

TELEMETRY_COLUMNS = ["t_ms", "px", "py", "pz", "phx", "phy", "phz",
                     "rx", "ry", "rz", "tau_raw_ms", "tau_hat_ms",
                     "vcx", "vcy", "vcz"]
DELAY_COLUMNS = ["t_ms", "direction", "delay_ms", "delivered"]

SETTLE_THRESHOLD_M = 0.1


@dataclass(frozen=True)
class RunArtifacts:
    out_dir: Path
    telemetry_csv: Path
    delay_csv: Path
    report_txt: Path
    summary_json: Path


@dataclass(frozen=True)
class AxisRms:
    x: float
    y: float
    z: float
    norm: float

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "z": self.z, "norm": self.norm}


@dataclass(frozen=True)
class SegmentRms:
    t_start_ms: float
    t_end_ms: float
    p_ref: tuple[float, float, float]
    rms_est_norm: float
    rms_meas_norm: float
    n_rows: int

    def to_dict(self) -> dict:
        return {"t_start_ms": self.t_start_ms, "t_end_ms": self.t_end_ms,
                "p_ref": list(self.p_ref), "rms_est_norm": self.rms_est_norm,
                "rms_meas_norm": self.rms_meas_norm, "n_rows": self.n_rows}


@dataclass(frozen=True)
class RmsReport:
    ref_vs_estimated: AxisRms
    ref_vs_measured: AxisRms
    segments: tuple[SegmentRms, ...]

    def to_dict(self) -> dict:
        return {"ref_vs_estimated": self.ref_vs_estimated.to_dict(),
                "ref_vs_measured": self.ref_vs_measured.to_dict(),
                "segments": [s.to_dict() for s in self.segments]}


def run_lockstep(scn: ScenarioConfig, out_dir: str | Path) -> RunArtifacts:
    """Run the whole mission on a virtual clock and write the artifacts."""
    robot = RobotAgent(scn.robot, t_start=0)
    cloud = CloudAgent(scn.cloud, t_start=0)
    up = DelayChannel(scn.uplink.entries[0][1], scn.uplink)
    down = DelayChannel(scn.downlink.entries[0][1], scn.downlink)

    waypoints = list(scn.waypoints)
    wp_idx = 0
    t = 0
    quantum = scn.quantum_us
    while t <= scn.duration_us:
        while wp_idx < len(waypoints) and waypoints[wp_idx][0] <= t:
            cloud.set_waypoint(waypoints[wp_idx][1])
            wp_idx += 1
        robot_in = down.poll(t)
        cloud_in = up.poll(t)
        for datagram in robot.tick(t, robot_in):
            up.send(datagram, t)
        for datagram in cloud.tick(t, cloud_in):
            down.send(datagram, t)
        t += quantum

    rows = [frame.record() for frame in cloud.telemetry]
    return write_artifacts(Path(out_dir), rows, up.trace, down.trace)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_telemetry_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(TELEMETRY_COLUMNS) + "\n")
        for row in rows:
            f.write(",".join(_fmt(row[c]) for c in TELEMETRY_COLUMNS) + "\n")


def write_delay_csv(up_trace: list[PacketTrace], down_trace: list[PacketTrace],
                    path: Path) -> None:
    merged = ([(p.t_send, "uplink", p) for p in up_trace]
              + [(p.t_send, "downlink", p) for p in down_trace])
    merged.sort(key=lambda item: (item[0], item[1]))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(DELAY_COLUMNS) + "\n")
        for t_send, direction, pkt in merged:
            f.write(f"{t_send / 1000.0!r},{direction},{pkt.delay_us / 1000.0!r},"
                    f"{int(pkt.delivered)}\n")


def write_artifacts(out_dir: Path, telemetry_rows: list[dict],
                    up_trace: list[PacketTrace], down_trace: list[PacketTrace]) -> RunArtifacts:
    out_dir.mkdir(parents=True, exist_ok=True)
    art = RunArtifacts(
        out_dir=out_dir,
        telemetry_csv=out_dir / "telemetry.csv",
        delay_csv=out_dir / "delay_trace.csv",
        report_txt=out_dir / "report.txt",
        summary_json=out_dir / "summary.json",
    )
    write_telemetry_csv(telemetry_rows, art.telemetry_csv)
    write_delay_csv(up_trace, down_trace, art.delay_csv)
    text, summary = build_report(telemetry_rows, read_delay_csv(art.delay_csv))
    art.report_txt.write_text(text, encoding="utf-8")
    art.summary_json.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
    return art


class CsvFormatError(ValueError):
    pass


def read_telemetry_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if header != TELEMETRY_COLUMNS:
            raise CsvFormatError(f"unexpected telemetry header: {header}")
        for lineno, line in enumerate(f, start=2):
            parts = line.strip().split(",")
            if len(parts) != len(TELEMETRY_COLUMNS):
                raise CsvFormatError(f"row {lineno}: expected {len(TELEMETRY_COLUMNS)} fields")
            try:
                rows.append({c: float(v) for c, v in zip(TELEMETRY_COLUMNS, parts)})
            except ValueError as exc:
                raise CsvFormatError(f"row {lineno}: {exc}") from exc
    return rows


def read_delay_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if header != DELAY_COLUMNS:
            raise CsvFormatError(f"unexpected delay header: {header}")
        for lineno, line in enumerate(f, start=2):
            parts = line.strip().split(",")
            if len(parts) != 4:
                raise CsvFormatError(f"row {lineno}: expected 4 fields")
            rows.append({"t_ms": float(parts[0]), "direction": parts[1],
                         "delay_ms": float(parts[2]), "delivered": int(parts[3])})
    return rows


def _axis_rms(rows: list[dict], ref_keys, val_keys) -> AxisRms:
    n = len(rows)
    sums = [0.0, 0.0, 0.0]
    for row in rows:
        for i, (rk, vk) in enumerate(zip(ref_keys, val_keys)):
            d = row[rk] - row[vk]
            sums[i] += d * d
    ms = [s / n for s in sums]
    return AxisRms(x=math.sqrt(ms[0]), y=math.sqrt(ms[1]), z=math.sqrt(ms[2]),
                   norm=math.sqrt(ms[0] + ms[1] + ms[2]))


def split_segments(rows: list[dict]) -> list[list[dict]]:
    """Group consecutive rows by the active reference (a new waypoint starts
    a new segment)."""
    segments: list[list[dict]] = []
    current_ref = None
    for row in rows:
        ref = (row["rx"], row["ry"], row["rz"])
        if ref != current_ref:
            segments.append([])
            current_ref = ref
        segments[-1].append(row)
    return segments


def compute_rms(rows: list[dict]) -> RmsReport:
    """Mission-wide and per-waypoint-segment RMS of reference-vs-estimated and
    reference-vs-measured position errors."""
    if not rows:
        raise ValueError("need at least one telemetry row")
    ref_keys = ("rx", "ry", "rz")
    est = _axis_rms(rows, ref_keys, ("phx", "phy", "phz"))
    meas = _axis_rms(rows, ref_keys, ("px", "py", "pz"))
    segments = []
    for seg in split_segments(rows):
        seg_est = _axis_rms(seg, ref_keys, ("phx", "phy", "phz"))
        seg_meas = _axis_rms(seg, ref_keys, ("px", "py", "pz"))
        segments.append(SegmentRms(
            t_start_ms=seg[0]["t_ms"], t_end_ms=seg[-1]["t_ms"],
            p_ref=(seg[0]["rx"], seg[0]["ry"], seg[0]["rz"]),
            rms_est_norm=seg_est.norm, rms_meas_norm=seg_meas.norm,
            n_rows=len(seg)))
    return RmsReport(ref_vs_estimated=est, ref_vs_measured=meas, segments=tuple(segments))


def _stats(values: list[float]) -> dict:
    if not values:
        return {"n": 0, "min": None, "mean": None, "max": None, "p99": None}
    ordered = sorted(values)
    n = len(ordered)
    p99_idx = min(n - 1, max(0, math.ceil(0.99 * n) - 1))
    return {"n": n, "min": ordered[0], "mean": math.fsum(ordered) / n,
            "max": ordered[-1], "p99": ordered[p99_idx]}


def delay_statistics(delay_rows: list[dict]) -> dict:
    """Per-direction stats over sampled delays plus index-paired RTT sums."""
    up = [r["delay_ms"] for r in delay_rows if r["direction"] == "uplink"]
    down = [r["delay_ms"] for r in delay_rows if r["direction"] == "downlink"]
    rtt = [a + b for a, b in zip(up, down)]
    return {"uplink_ms": _stats(up), "downlink_ms": _stats(down), "rtt_ms": _stats(rtt)}


def settle_times(rows: list[dict], threshold_m: float = SETTLE_THRESHOLD_M) -> list[dict]:
    """Per segment: time from the waypoint switch until the measured position
    first comes within the threshold of the reference."""
    out = []
    for seg in split_segments(rows):
        t0 = seg[0]["t_ms"]
        settle = None
        for row in seg:
            err = math.sqrt((row["rx"] - row["px"]) ** 2 + (row["ry"] - row["py"]) ** 2
                            + (row["rz"] - row["pz"]) ** 2)
            if err < threshold_m:
                settle = row["t_ms"] - t0
                break
        out.append({"t_start_ms": t0, "p_ref": [seg[0]["rx"], seg[0]["ry"], seg[0]["rz"]],
                    "settle_ms": settle})
    return out


def build_report(telemetry_rows: list[dict], delay_rows: list[dict]) -> tuple[str, dict]:
    """Human-readable summary plus its JSON twin."""
    lines = []
    summary: dict = {}
    if telemetry_rows:
        rms = compute_rms(telemetry_rows)
        summary["rms"] = rms.to_dict()
        lines.append("RMS position error (m)")
        lines.append(f"  ref vs estimated : x={rms.ref_vs_estimated.x:.4f} "
                     f"y={rms.ref_vs_estimated.y:.4f} z={rms.ref_vs_estimated.z:.4f} "
                     f"norm={rms.ref_vs_estimated.norm:.4f}")
        lines.append(f"  ref vs measured  : x={rms.ref_vs_measured.x:.4f} "
                     f"y={rms.ref_vs_measured.y:.4f} z={rms.ref_vs_measured.z:.4f} "
                     f"norm={rms.ref_vs_measured.norm:.4f}")
        lines.append("  per segment:")
        for seg in rms.segments:
            lines.append(f"    t={seg.t_start_ms:10.1f}..{seg.t_end_ms:10.1f} ms "
                         f"ref=({seg.p_ref[0]:.2f},{seg.p_ref[1]:.2f},{seg.p_ref[2]:.2f}) "
                         f"rms_est={seg.rms_est_norm:.4f} rms_meas={seg.rms_meas_norm:.4f}")
        settles = settle_times(telemetry_rows)
        summary["settle"] = settles
        lines.append(f"  settle times (|ref-meas| < {SETTLE_THRESHOLD_M} m):")
        for s in settles:
            val = "never" if s["settle_ms"] is None else f"{s['settle_ms']:.0f} ms"
            lines.append(f"    t={s['t_start_ms']:10.1f} ms "
                         f"ref=({s['p_ref'][0]:.2f},{s['p_ref'][1]:.2f},{s['p_ref'][2]:.2f}) "
                         f"settle={val}")
        tau_hats = [r["tau_hat_ms"] for r in telemetry_rows if r["tau_hat_ms"] > 0]
        summary["tau_hat_ms"] = _stats(tau_hats)
    else:
        lines.append("no telemetry rows")
        summary["rms"] = None

    stats = delay_statistics(delay_rows)
    summary["delays"] = stats
    lines.append("applied network delays (ms)")
    for key, label in (("uplink_ms", "uplink"), ("downlink_ms", "downlink"), ("rtt_ms", "rtt")):
        s = stats[key]
        if s["n"] == 0:
            lines.append(f"  {label:8s}: no packets")
        else:
            lines.append(f"  {label:8s}: n={s['n']} min={s['min']:.2f} mean={s['mean']:.2f} "
                         f"max={s['max']:.2f} p99={s['p99']:.2f}")
    lines.append("")
    lines.append("plot data: telemetry.csv (positions, tau traces), delay_trace.csv (per packet)")
    return "\n".join(lines) + "\n", summary
