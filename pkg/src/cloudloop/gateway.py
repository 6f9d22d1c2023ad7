"""Teleoperation gateway: a TCP server speaking newline-delimited records.

Inbound lines are plain-text commands:

    waypoint <x> <y> <z> <yaw>
    netprofile <delay_ms> <jitter_ms> <loss>
    status

Outbound lines are JSON records, one per line, each carrying "type" and a
schema version "v": telemetry frames (at most ~30 Hz), command acks, and
status replies. Malformed commands get an error ack; the stream continues.
"""

from __future__ import annotations

import json
import math
import socket
import threading

from .core import Vec3, Waypoint

TELEMETRY_MAX_HZ = 30.0


def parse_command(line: str):
    """Parse one command line into ("waypoint", Waypoint) | ("netprofile",
    (delay_ms, jitter_ms, loss)) | ("status", None). Raises ValueError."""
    parts = line.strip().split()
    if not parts:
        raise ValueError("empty command")
    verb = parts[0].lower()
    if verb == "status":
        if len(parts) != 1:
            raise ValueError("usage: status")
        return "status", None
    if verb == "waypoint":
        if len(parts) != 5:
            raise ValueError("usage: waypoint x y z yaw")
        x, y, z, yaw = (float(p) for p in parts[1:])
        if not all(math.isfinite(v) for v in (x, y, z, yaw)):
            raise ValueError("waypoint fields must be finite")
        return "waypoint", Waypoint(p_ref=Vec3(x, y, z), yaw_ref=yaw)
    if verb == "netprofile":
        if len(parts) != 4:
            raise ValueError("usage: netprofile delay_ms jitter_ms loss")
        delay_ms, jitter_ms, loss = (float(p) for p in parts[1:])
        if not all(math.isfinite(v) for v in (delay_ms, jitter_ms, loss)):
            raise ValueError("netprofile fields must be finite")
        if delay_ms < 0 or jitter_ms < 0 or not 0.0 <= loss <= 1.0:
            raise ValueError("require delay_ms >= 0, jitter_ms >= 0, loss in [0, 1]")
        return "netprofile", (delay_ms, jitter_ms, loss)
    raise ValueError(f"unknown command {verb!r}")


class _Client:
    def __init__(self, conn: socket.socket):
        self.conn = conn
        self.lock = threading.Lock()

    def send_record(self, record: dict) -> bool:
        data = (json.dumps(record, separators=(",", ":")) + "\n").encode()
        try:
            with self.lock:
                self.conn.sendall(data)
            return True
        except OSError:
            return False


class Gateway:
    """Accepts any number of clients; telemetry is fanned out to all of them,
    command replies go to the issuing client only. Waypoints are handed to the
    control loop through ``submit`` (a single serialized queue)."""

    def __init__(self, bind: tuple[str, int], submit, status_fn,
                 netem_control: list[tuple[str, int]] | None = None,
                 telemetry_hz: float = TELEMETRY_MAX_HZ):
        self.bind = bind
        self.submit = submit
        self.status_fn = status_fn
        self.netem_control = netem_control or []
        self.telemetry_interval = 1.0 / telemetry_hz
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind(bind)
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self._latest_frame = None
        self._frame_event = threading.Event()
        self._udp = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        return self._server.getsockname()[1]

    def start(self) -> None:
        self._server.listen()
        for target in (self._accept_loop, self._broadcast_loop):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        try:
            self._server.close()
        except OSError:
            pass
        with self._clients_lock:
            for c in self._clients:
                try:
                    c.conn.close()
                except OSError:
                    pass
            self._clients.clear()
        self._udp.close()

    def offer_frame(self, frame) -> None:
        """Called by the control loop for every telemetry frame; the
        broadcaster forwards the newest one at a bounded rate."""
        self._latest_frame = frame
        self._frame_event.set()

    def _accept_loop(self) -> None:
        self._server.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self._server.accept()
            except (TimeoutError, OSError):
                continue
            client = _Client(conn)
            with self._clients_lock:
                self._clients.append(client)
            t = threading.Thread(target=self._client_loop, args=(client,), daemon=True)
            t.start()

    def _broadcast_loop(self) -> None:
        last_sent = None
        while not self._stop.is_set():
            self._frame_event.wait(timeout=0.2)
            self._frame_event.clear()
            frame = self._latest_frame
            if frame is None or frame is last_sent:
                continue
            last_sent = frame
            record = frame.record()
            with self._clients_lock:
                clients = list(self._clients)
            dead = [c for c in clients if not c.send_record(record)]
            if dead:
                with self._clients_lock:
                    for c in dead:
                        if c in self._clients:
                            self._clients.remove(c)
            self._stop.wait(self.telemetry_interval)

    def _client_loop(self, client: _Client) -> None:
        try:
            reader = client.conn.makefile("r", encoding="utf-8", errors="replace")
            for line in reader:
                if self._stop.is_set():
                    break
                if not line.strip():
                    continue
                client.send_record(self._handle_line(line))
        except OSError:
            pass
        finally:
            with self._clients_lock:
                if client in self._clients:
                    self._clients.remove(client)
            try:
                client.conn.close()
            except OSError:
                pass

    def _handle_line(self, line: str) -> dict:
        try:
            verb, arg = parse_command(line)
        except ValueError as exc:
            return {"type": "ack", "v": 1, "ok": False, "error": str(exc)}
        if verb == "status":
            return self.status_fn()
        if verb == "waypoint":
            wp = arg
            self.submit(lambda agent: agent.set_waypoint(wp))
            return {"type": "ack", "v": 1, "cmd": "waypoint", "ok": True,
                    "waypoint": [wp.p_ref.x, wp.p_ref.y, wp.p_ref.z, wp.yaw_ref]}
        # netprofile: forward to every netem proxy control port
        delay_ms, jitter_ms, loss = arg
        payload = f"{delay_ms} {jitter_ms} {loss}".encode()
        forwarded = 0
        for addr in self.netem_control:
            try:
                self._udp.sendto(payload, addr)
                forwarded += 1
            except OSError:
                pass
        return {"type": "ack", "v": 1, "cmd": "netprofile", "ok": forwarded > 0 or not self.netem_control,
                "forwarded": forwarded}
