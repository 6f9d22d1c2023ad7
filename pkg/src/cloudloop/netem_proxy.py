"""Standalone UDP relay applying the emulated delay/jitter/loss in realtime.

Shares the exact sampling logic (and PRNG) with the in-process channel, so a
seeded proxy run draws the same per-packet delays as a lockstep run with the
same send schedule. An optional control socket accepts live profile changes
as text datagrams: ``delay_ms jitter_ms loss``.
"""

from __future__ import annotations

import argparse
import signal
import socket
import sys
import threading
import time

from .netem import DelayChannel, NetworkProfile, ProfileSchedule, parse_schedule_text


def _now_us() -> int:
    return time.time_ns() // 1000


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return (host or "127.0.0.1", int(port))


class NetemProxy:
    def __init__(self, listen: tuple[str, int], forward: tuple[str, int],
                 profile: NetworkProfile, schedule: ProfileSchedule | None = None,
                 control: tuple[str, int] | None = None, trace_path: str | None = None,
                 direction: str = "uplink"):
        self.forward = forward
        self.trace_path = trace_path
        self.direction = direction
        self.t0 = _now_us()
        if schedule is not None:
            # schedule switch points are mission-relative; rebase to wall time
            schedule = ProfileSchedule(tuple((self.t0 + t, p) for t, p in schedule.entries))
        self.channel = DelayChannel(profile, schedule, keep_trace=trace_path is not None)
        self.lock = threading.Lock()
        self.stop_event = threading.Event()
        self.in_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.in_sock.bind(listen)
        self.out_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.ctrl_sock = None
        if control is not None:
            self.ctrl_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self.ctrl_sock.bind(control)

    def _recv_loop(self) -> None:
        self.in_sock.settimeout(0.1)
        while not self.stop_event.is_set():
            try:
                data, _ = self.in_sock.recvfrom(65535)
            except (TimeoutError, OSError):
                continue
            with self.lock:
                self.channel.send(data, _now_us())

    def _control_loop(self) -> None:
        self.ctrl_sock.settimeout(0.1)
        while not self.stop_event.is_set():
            try:
                data, _ = self.ctrl_sock.recvfrom(1024)
            except (TimeoutError, OSError):
                continue
            try:
                delay_ms, jitter_ms, loss = (float(p) for p in data.decode().split())
                profile = NetworkProfile(delay_ms, jitter_ms, loss,
                                         seed=self.channel.profile.seed,
                                         direction=self.channel.profile.direction)
            except (ValueError, UnicodeDecodeError):
                continue  # malformed control datagram; keep current profile
            with self.lock:
                self.channel.set_profile(profile)

    def run(self) -> None:
        threads = [threading.Thread(target=self._recv_loop, daemon=True)]
        if self.ctrl_sock is not None:
            threads.append(threading.Thread(target=self._control_loop, daemon=True))
        for t in threads:
            t.start()
        try:
            while not self.stop_event.is_set():
                now = _now_us()
                with self.lock:
                    due = self.channel.poll(now)
                for payload in due:
                    try:
                        self.out_sock.sendto(payload, self.forward)
                    except OSError:
                        pass
                time.sleep(0.001)
        finally:
            self.stop_event.set()
            self._write_trace()
            for sock in (self.in_sock, self.out_sock, self.ctrl_sock):
                if sock is not None:
                    sock.close()

    def _write_trace(self) -> None:
        if self.trace_path is None or self.channel.trace is None:
            return
        with open(self.trace_path, "w", encoding="utf-8") as f:
            f.write("t_ms,delay_ms,delivered\n")
            for rec in self.channel.trace:
                t_ms = (rec.t_send - self.t0) / 1000.0
                f.write(f"{t_ms!r},{rec.delay_us / 1000.0!r},{int(rec.delivered)}\n")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="netem-proxy",
                                     description="UDP relay with seeded delay/jitter/loss")
    parser.add_argument("--listen", required=True)
    parser.add_argument("--forward", required=True)
    parser.add_argument("--delay-ms", type=float, default=0.0)
    parser.add_argument("--jitter-ms", type=float, default=0.0)
    parser.add_argument("--loss", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--schedule", default=None, help="file of: t_start_ms delay_ms jitter_ms loss")
    parser.add_argument("--control", default=None, help="UDP control addr for live profile changes")
    parser.add_argument("--trace", default=None, help="write per-packet delay trace CSV here")
    parser.add_argument("--direction", default="uplink", choices=["uplink", "downlink"])
    args = parser.parse_args(argv)

    profile = NetworkProfile(args.delay_ms, args.jitter_ms, args.loss,
                             seed=args.seed, direction=args.direction)
    schedule = None
    if args.schedule:
        with open(args.schedule, encoding="utf-8") as f:
            schedule = parse_schedule_text(f.read(), direction=args.direction, seed=args.seed)
        profile = schedule.entries[0][1]

    proxy = NetemProxy(_parse_addr(args.listen), _parse_addr(args.forward), profile,
                       schedule=schedule,
                       control=_parse_addr(args.control) if args.control else None,
                       trace_path=args.trace, direction=args.direction)
    signal.signal(signal.SIGTERM, lambda *_: proxy.stop_event.set())
    try:
        proxy.run()
    except KeyboardInterrupt:
        proxy.stop_event.set()
    return 0


if __name__ == "__main__":
    sys.exit(main())
