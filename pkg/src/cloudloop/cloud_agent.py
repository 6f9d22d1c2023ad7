"""Cloud-side agent: delay estimation, state prediction, waypoint PID, and
the teleoperation gateway.

Pipeline per received state: measure the round trip from the control echo,
update the running delay estimate and the acceleration estimator, keep the
newest state. On each control-period boundary: predict the current state
over the estimated delay, run the tracker, emit one control datagram, and
append one telemetry frame.
"""

from __future__ import annotations

import argparse
import queue
import signal
import sys
import threading
import time
from dataclasses import dataclass

from . import wire
from .controller import ControlConfig, PidState, track
from .core import Clock, Vec3, Waypoint, us_to_s
from .predictor import (AccelEstimator, ClockSkewError, DelayEstimate, DelaySample,
                        accel_update, delay_update, measure_tau, predict)


@dataclass(frozen=True)
class CloudAgentConfig:
    control: ControlConfig = ControlConfig()
    window: int | None = 50  # None = cumulative mean over the whole mission
    accel_alpha: float = 0.2


@dataclass
class CloudCounters:
    decode_errors: int = 0
    states_received: int = 0
    bad_states: int = 0
    ctrls_sent: int = 0
    clock_skews: int = 0
    waypoints_accepted: int = 0


@dataclass(frozen=True)
class TelemetryFrame:
    """One control-tick record; mirrors the telemetry CSV columns."""

    t_ms: float
    p_meas: Vec3  # delayed position as received
    p_pred: Vec3
    p_ref: Vec3
    v_cmd: Vec3
    tau_raw_ms: float  # most recent round-trip sample (0 before the first)
    tau_hat_ms: float
    seq_state: int
    seq_ctrl: int

    def record(self) -> dict:
        return {
            "type": "telemetry", "v": 1,
            "t_ms": self.t_ms,
            "px": self.p_meas.x, "py": self.p_meas.y, "pz": self.p_meas.z,
            "phx": self.p_pred.x, "phy": self.p_pred.y, "phz": self.p_pred.z,
            "rx": self.p_ref.x, "ry": self.p_ref.y, "rz": self.p_ref.z,
            "tau_raw_ms": self.tau_raw_ms, "tau_hat_ms": self.tau_hat_ms,
            "vcx": self.v_cmd.x, "vcy": self.v_cmd.y, "vcz": self.v_cmd.z,
            "seq_state": self.seq_state, "seq_ctrl": self.seq_ctrl,
        }


class CloudAgent:
    """Single-owner control actor; all mutation happens inside tick() and
    set_waypoint() (which the realtime loop serializes through one queue)."""

    def __init__(self, cfg: CloudAgentConfig, t_start: int = 0):
        self.cfg = cfg
        self.t_start = t_start
        self.est = DelayEstimate(window=cfg.window)
        self.accel = AccelEstimator(alpha=cfg.accel_alpha)
        self.pid = PidState()
        self.waypoint: Waypoint | None = None
        self.counters = CloudCounters()
        self.telemetry: list[TelemetryFrame] = []
        self.on_frame = None  # optional callback for streaming consumers
        self._latest: wire.StateMessage | None = None
        self._next_ctrl = t_start + cfg.control.period_us
        self._ctrl_seq = 0  # first emitted control is seq 1 (0 = "none" echo)
        self._last_echo_seq = 0
        self._last_tau_raw_us = 0

    def set_waypoint(self, wp: Waypoint) -> None:
        """Install the operator reference; active from the next control tick.
        Last writer wins within a period."""
        if not wp.is_finite():
            raise ValueError("waypoint must be finite")
        self.waypoint = wp
        self.counters.waypoints_accepted += 1

    def have_state(self) -> bool:
        return self._latest is not None

    def _ingest(self, t_now: int, datagrams: list[bytes]) -> None:
        for data in datagrams:
            try:
                msg = wire.decode(data)
            except wire.DecodeError:
                self.counters.decode_errors += 1
                continue
            if not isinstance(msg, wire.StateMessage):
                continue
            if not msg.state.is_finite():
                self.counters.bad_states += 1
                continue
            self.counters.states_received += 1
            if msg.seq_ctrl_echo > self._last_echo_seq and msg.t_ctrl_echo > 0:
                try:
                    sample = measure_tau(t_now, msg.t_ctrl_echo)
                except ClockSkewError:
                    self.counters.clock_skews += 1
                    sample = DelaySample(tau_us=0, t_measured=t_now)
                self.est = delay_update(self.est, sample)
                self._last_echo_seq = msg.seq_ctrl_echo
                self._last_tau_raw_us = sample.tau_us
            self.accel, _ = accel_update(self.accel, msg.state.v, msg.state.t)
            if self._latest is None or msg.t_send >= self._latest.t_send:
                self._latest = msg
            if self.waypoint is None:
                # hold the first observed position until the operator speaks
                self.waypoint = Waypoint(p_ref=msg.state.p, yaw_ref=msg.state.q.yaw(),
                                         t_issued=t_now)

    def tick(self, t_now: int, inbound: list[bytes]) -> list[bytes]:
        """Ingest delivered states, then emit one control per due period
        boundary (none until a state has been seen)."""
        self._ingest(t_now, inbound)
        out: list[bytes] = []
        period_s = us_to_s(self.cfg.control.period_us)
        while self._next_ctrl <= t_now:
            if self._latest is not None:
                predicted = predict(self._latest.state, self.accel.accel, self.est.horizon_s)
                self._ctrl_seq += 1
                self.pid, ctrl = track(predicted, self.waypoint, self.pid, period_s,
                                       self.cfg.control, t_now, self._ctrl_seq)
                out.append(wire.encode_control(ctrl))
                self.counters.ctrls_sent += 1
                ref = self.waypoint.p_ref if self.waypoint else predicted.p_hat
                frame = TelemetryFrame(
                    t_ms=(t_now - self.t_start) / 1000.0,
                    p_meas=self._latest.state.p,
                    p_pred=predicted.p_hat,
                    p_ref=ref,
                    v_cmd=ctrl.v_cmd,
                    tau_raw_ms=self._last_tau_raw_us / 1000.0,
                    tau_hat_ms=self.est.tau_hat_us / 1000.0,
                    seq_state=self._latest.seq,
                    seq_ctrl=self._ctrl_seq,
                )
                self.telemetry.append(frame)
                if self.on_frame is not None:
                    self.on_frame(frame)
            self._next_ctrl += self.cfg.control.period_us
        return out

    def status(self) -> dict:
        latest = self.telemetry[-1] if self.telemetry else None
        wp = self.waypoint
        return {
            "type": "status", "v": 1,
            "have_state": self.have_state(),
            "t_ms": latest.t_ms if latest else None,
            "tau_hat_ms": self.est.tau_hat_us / 1000.0,
            "waypoint": [wp.p_ref.x, wp.p_ref.y, wp.p_ref.z, wp.yaw_ref] if wp else None,
            "states_received": self.counters.states_received,
            "ctrls_sent": self.counters.ctrls_sent,
            "decode_errors": self.counters.decode_errors,
        }


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return (host or "127.0.0.1", int(port))


def run_realtime(cfg: CloudAgentConfig, bind: tuple[str, int], peer: tuple[str, int],
                 gateway_bind: tuple[str, int] | None,
                 netem_control: list[tuple[str, int]] | None = None,
                 tick_interval_s: float = 0.001,
                 stop_event: threading.Event | None = None,
                 agent: CloudAgent | None = None) -> None:
    from .gateway import Gateway

    clock = Clock(Clock.REALTIME)
    endpoint = wire.UdpEndpoint(bind, peer)
    if agent is None:
        agent = CloudAgent(cfg, t_start=clock.now())
    stop = stop_event or threading.Event()
    rx: queue.Queue[bytes] = queue.Queue()
    commands: queue.Queue = queue.Queue()

    def receiver():
        endpoint.sock.settimeout(0.1)
        while not stop.is_set():
            try:
                data, _ = endpoint.sock.recvfrom(65535)
                rx.put(data)
            except (TimeoutError, OSError):
                continue

    threading.Thread(target=receiver, daemon=True).start()

    gateway = None
    if gateway_bind is not None:
        gateway = Gateway(gateway_bind, submit=commands.put, status_fn=agent.status,
                          netem_control=netem_control or [])
        agent.on_frame = gateway.offer_frame
        gateway.start()

    try:
        while not stop.is_set():
            while True:
                try:
                    apply_cmd = commands.get_nowait()
                except queue.Empty:
                    break
                try:
                    apply_cmd(agent)
                except ValueError:
                    pass  # already rejected at the gateway; defense in depth
            inbound = []
            while True:
                try:
                    inbound.append(rx.get_nowait())
                except queue.Empty:
                    break
            for datagram in agent.tick(clock.now(), inbound):
                endpoint.send(datagram)
            time.sleep(tick_interval_s)
    finally:
        stop.set()
        if gateway is not None:
            gateway.stop()
        endpoint.close()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="cloud-agent",
                                     description="Cloud-side controller + gateway")
    parser.add_argument("--config", required=True, help="scenario file (control/predictor sections)")
    parser.add_argument("--realtime", action="store_true",
                        help="run against the wall clock (required for standalone use)")
    parser.add_argument("--bind", required=True, help="local addr host:port")
    parser.add_argument("--peer", required=True, help="where to send control datagrams host:port")
    parser.add_argument("--gateway", default=None, help="teleop gateway listen addr host:port")
    parser.add_argument("--netem-control", default="",
                        help="comma-separated netem proxy control addrs for netprofile commands")
    args = parser.parse_args(argv)

    if not args.realtime:
        parser.error("standalone operation requires --realtime (lockstep runs in-process)")

    from .scenario import load_scenario

    scn = load_scenario(args.config)
    netem_ctrl = [_parse_addr(a) for a in args.netem_control.split(",") if a.strip()]
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        run_realtime(scn.cloud, _parse_addr(args.bind), _parse_addr(args.peer),
                     _parse_addr(args.gateway) if args.gateway else None,
                     netem_ctrl, stop_event=stop)
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
