"""Realtime runner: spawns the robot agent, two netem proxies, and the cloud
agent as separate processes on loopback, feeds scripted waypoints through the
gateway, collects the telemetry stream, and writes the same artifacts as a
lockstep run.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

from .core import ms_to_us
from .harness import RunArtifacts, write_artifacts
from .netem import PacketTrace
from .scenario import ScenarioConfig


class RealtimeRunError(RuntimeError):
    pass


def _write_schedule_file(schedule, path: Path) -> None:
    lines = []
    for t_us, p in schedule.entries:
        lines.append(f"{t_us / 1000.0} {p.base_delay_ms} {p.jitter_ms} {p.loss_prob}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _connect_gateway(addr: tuple[str, int], timeout_s: float = 10.0) -> socket.socket:
    deadline = time.monotonic() + timeout_s
    last_err = None
    while time.monotonic() < deadline:
        try:
            return socket.create_connection(addr, timeout=1.0)
        except OSError as exc:
            last_err = exc
            time.sleep(0.1)
    raise RealtimeRunError(f"gateway {addr} unreachable: {last_err}")


def _read_trace(path: Path) -> list[PacketTrace]:
    if not path.exists():
        return []
    out = []
    with open(path, encoding="utf-8") as f:
        f.readline()  # header
        for line in f:
            parts = line.strip().split(",")
            if len(parts) != 3:
                continue
            out.append(PacketTrace(t_send=ms_to_us(float(parts[0])),
                                   delay_us=ms_to_us(float(parts[1])),
                                   delivered=parts[2] == "1"))
    return out


def run_realtime(scn: ScenarioConfig, out_dir: str | Path,
                 scenario_path: str | Path) -> RunArtifacts:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    addrs = scn.addrs
    up_sched = out_dir / "uplink.sched"
    down_sched = out_dir / "downlink.sched"
    _write_schedule_file(scn.uplink, up_sched)
    _write_schedule_file(scn.downlink, down_sched)
    up_trace = out_dir / "uplink_trace.csv"
    down_trace = out_dir / "downlink_trace.csv"

    py = [sys.executable, "-m"]
    cmds = {
        "netem-up": py + ["cloudloop.netem_proxy",
                          "--listen", addrs["uplink_listen"], "--forward", addrs["cloud_bind"],
                          "--seed", str(scn.uplink.entries[0][1].seed),
                          "--schedule", str(up_sched), "--trace", str(up_trace),
                          "--control", addrs["uplink_control"], "--direction", "uplink"],
        "netem-down": py + ["cloudloop.netem_proxy",
                            "--listen", addrs["downlink_listen"], "--forward", addrs["robot_bind"],
                            "--seed", str(scn.downlink.entries[0][1].seed),
                            "--schedule", str(down_sched), "--trace", str(down_trace),
                            "--control", addrs["downlink_control"], "--direction", "downlink"],
        "robot": py + ["cloudloop.robot_agent", "--config", str(scenario_path), "--realtime",
                       "--bind", addrs["robot_bind"], "--peer", addrs["uplink_listen"]],
        "cloud": py + ["cloudloop.cloud_agent", "--config", str(scenario_path), "--realtime",
                       "--bind", addrs["cloud_bind"], "--peer", addrs["downlink_listen"],
                       "--gateway", addrs["gateway"],
                       "--netem-control",
                       f"{addrs['uplink_control']},{addrs['downlink_control']}"],
    }
    procs: dict[str, subprocess.Popen] = {}
    log_files = []
    rows: list[dict] = []
    try:
        for name, cmd in cmds.items():
            log = open(out_dir / f"{name}.log", "w", encoding="utf-8")
            log_files.append(log)
            procs[name] = subprocess.Popen(cmd, stdout=log, stderr=subprocess.STDOUT)

        host, _, port = addrs["gateway"].rpartition(":")
        conn = _connect_gateway((host or "127.0.0.1", int(port)))
        t0 = time.monotonic()

        def feed_waypoints():
            for t_us, wp in scn.waypoints:
                delay = t0 + t_us / 1e6 - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                line = f"waypoint {wp.p_ref.x} {wp.p_ref.y} {wp.p_ref.z} {wp.yaw_ref}\n"
                try:
                    conn.sendall(line.encode())
                except OSError:
                    return

        feeder = threading.Thread(target=feed_waypoints, daemon=True)
        feeder.start()

        duration_s = scn.duration_us / 1e6
        conn.settimeout(1.0)
        reader = conn.makefile("r", encoding="utf-8")
        try:
            while time.monotonic() - t0 < duration_s:
                try:
                    line = reader.readline()
                except TimeoutError:
                    continue
                if not line:
                    for name, proc in procs.items():
                        if proc.poll() is not None:
                            raise RealtimeRunError(f"{name} exited early "
                                                   f"(status {proc.returncode}); see {name}.log")
                    raise RealtimeRunError("gateway stream closed early")
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    continue
                if record.get("type") == "telemetry":
                    rows.append(record)
        except KeyboardInterrupt:
            pass  # graceful stop: flush whatever was collected
        conn.close()
    finally:
        # agents first so the proxies flush their traces after the last packet
        for name in ("robot", "cloud", "netem-up", "netem-down"):
            proc = procs.get(name)
            if proc is None:
                continue
            if proc.poll() is None:
                proc.terminate()
        for proc in procs.values():
            try:
                proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
        for log in log_files:
            log.close()

    if not rows:
        raise RealtimeRunError("no telemetry collected; see process logs in the output dir")
    return write_artifacts(out_dir, rows, _read_trace(up_trace),
                           _read_trace(down_trace))
