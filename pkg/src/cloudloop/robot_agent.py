"""Robot-side agent: owns the plant, ingests control datagrams, publishes
state datagrams with the control timestamp echo.

The tick function is pure composition (bytes in, bytes out) so the same
logic runs under the lockstep scheduler and as a standalone realtime
process. In realtime mode a receive thread feeds raw datagrams to the
simulation loop through a queue.
"""

from __future__ import annotations

import argparse
import queue
import signal
import sys
import threading
import time
from dataclasses import dataclass

from . import plant as plant_mod
from . import wire
from .core import Clock, Vec3, VEC3_ZERO, us_to_s, yaw_quat
from .plant import CommandRejected, PlantParams, PlantState


@dataclass(frozen=True)
class RobotAgentConfig:
    plant: PlantParams = PlantParams()
    publish_period_us: int = 10_000  # 100 Hz
    step_us: int = 5_000  # 200 Hz integration
    failsafe_us: int = 500_000
    noise_seed: int = 0
    start_p: Vec3 = VEC3_ZERO
    start_yaw: float = 0.0

    def __post_init__(self):
        if self.publish_period_us <= 0 or self.step_us <= 0:
            raise ValueError("publish period and step must be > 0")


@dataclass
class RobotCounters:
    decode_errors: int = 0
    rejected_cmds: int = 0
    stale_cmds: int = 0
    states_sent: int = 0
    ctrls_applied: int = 0


class RobotAgent:
    """Single-owner simulation actor; all mutation happens inside tick()."""

    def __init__(self, cfg: RobotAgentConfig, t_start: int = 0):
        import random

        self.cfg = cfg
        self.state = PlantState(p=cfg.start_p, q=yaw_quat(cfg.start_yaw))
        self.counters = RobotCounters()
        self._noise = random.Random(cfg.noise_seed)
        self._t_last_step = t_start
        self._next_pub = t_start + cfg.publish_period_us
        self._state_seq = 0
        self._last_applied_seq = 0
        self._t_last_ctrl: int | None = None
        self._failsafed = False

    def _ingest(self, t_now: int, datagrams: list[bytes]) -> None:
        for data in datagrams:
            try:
                msg = wire.decode(data)
            except wire.DecodeError:
                self.counters.decode_errors += 1
                continue
            if not isinstance(msg, wire.ControlMessage):
                continue  # states addressed to the cloud; ignore
            if msg.seq <= self._last_applied_seq:
                self.counters.stale_cmds += 1  # reordered duplicate of an older command
                continue
            try:
                self.state = plant_mod.llc_apply(self.state, msg.control, self.cfg.plant)
            except CommandRejected:
                self.counters.rejected_cmds += 1
                continue
            self._last_applied_seq = msg.seq
            self._t_last_ctrl = t_now
            self._failsafed = False
            self.counters.ctrls_applied += 1

    def tick(self, t_now: int, inbound: list[bytes]) -> list[bytes]:
        """Apply delivered controls, advance the plant to t_now, and return
        any state datagrams due for publication."""
        self._ingest(t_now, inbound)

        if (self._t_last_ctrl is not None and not self._failsafed
                and t_now - self._t_last_ctrl > self.cfg.failsafe_us):
            self.state = plant_mod.failsafe_hover(self.state)
            self._failsafed = True

        step = self.cfg.step_us
        while self._t_last_step + step <= t_now:
            self.state = plant_mod.plant_step(self.state, us_to_s(step), self.cfg.plant)
            self._t_last_step += step

        out = []
        while self._next_pub <= t_now:
            snapshot = plant_mod.sensor_sample(self.state, t_now, self.cfg.plant, self._noise)
            echo = (self.state.echo_t, self.state.echo_seq)
            out.append(wire.encode_state(snapshot, echo, self._state_seq, t_now))
            self._state_seq += 1
            self.counters.states_sent += 1
            self._next_pub += self.cfg.publish_period_us
        return out


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return (host or "127.0.0.1", int(port))


def run_realtime(cfg: RobotAgentConfig, bind: tuple[str, int], peer: tuple[str, int],
                 tick_interval_s: float = 0.001, stop_event: threading.Event | None = None) -> None:
    clock = Clock(Clock.REALTIME)
    endpoint = wire.UdpEndpoint(bind, peer)
    agent = RobotAgent(cfg, t_start=clock.now())
    stop = stop_event or threading.Event()
    rx: queue.Queue[bytes] = queue.Queue()

    def receiver():
        endpoint.sock.settimeout(0.1)
        while not stop.is_set():
            try:
                data, _ = endpoint.sock.recvfrom(65535)
                rx.put(data)
            except (TimeoutError, OSError):
                continue

    rx_thread = threading.Thread(target=receiver, daemon=True)
    rx_thread.start()
    try:
        while not stop.is_set():
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
        endpoint.close()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="robot-agent",
                                     description="Robot-side plant + tunnel endpoint")
    parser.add_argument("--config", required=True, help="scenario file (robot/plant sections)")
    parser.add_argument("--realtime", action="store_true",
                        help="run against the wall clock (required for standalone use)")
    parser.add_argument("--bind", required=True, help="local addr host:port")
    parser.add_argument("--peer", required=True, help="where to send state datagrams host:port")
    args = parser.parse_args(argv)

    if not args.realtime:
        parser.error("standalone operation requires --realtime (lockstep runs in-process)")

    from .scenario import load_scenario

    scn = load_scenario(args.config)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        run_realtime(scn.robot, _parse_addr(args.bind), _parse_addr(args.peer), stop_event=stop)
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
