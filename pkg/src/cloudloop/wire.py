"""Binary message format and UDP tunnel endpoints linking the two agents.

Frame layout (all integers little-endian, all reals IEEE-754 binary64 LE):

    header (16 bytes):
        magic      2B   0x43 0x52 ("CR")
        version    1B   0x01
        msg_type   1B   0x01 = STATE, 0x02 = CONTROL
        seq        u32  per-producer sequence number
        t_send     u64  send timestamp, µs

    STATE payload (116 bytes, frame total 132):
        p.x p.y p.z  v.x v.y v.z  q.w q.x q.y q.z  w.x w.y w.z   13 × f64
        t_ctrl_echo  u64   t_origin of the last applied control (0 = none yet)
        seq_ctrl_echo u32  seq of the last applied control (0 = none yet)

    CONTROL payload (32 bytes, frame total 48):
        v_cmd.x v_cmd.y v_cmd.z  yaw_rate_cmd   4 × f64

The decoder accepts arbitrary byte strings and raises typed errors; it never
produces undefined behavior on garbage input.
"""

from __future__ import annotations

import socket
import struct
import threading
from dataclasses import dataclass

from .core import Quat, RobotState, StampedControl, Vec3

MAGIC = b"CR"
VERSION = 0x01
MSG_STATE = 0x01
MSG_CONTROL = 0x02

_HEADER = struct.Struct("<2sBBIQ")
_STATE_PAYLOAD = struct.Struct("<13dQI")
_CONTROL_PAYLOAD = struct.Struct("<4d")

HEADER_LEN = _HEADER.size  # 16
STATE_FRAME_LEN = HEADER_LEN + _STATE_PAYLOAD.size  # 132
CONTROL_FRAME_LEN = HEADER_LEN + _CONTROL_PAYLOAD.size  # 48

_U32_MAX = 2**32 - 1
_U64_MAX = 2**64 - 1


class WireError(Exception):
    pass


class EncodeError(WireError):
    pass


class DecodeError(WireError):
    pass


class FrameLengthError(DecodeError):
    pass


class BadMagicError(DecodeError):
    pass


class BadVersionError(DecodeError):
    pass


class UnknownTypeError(DecodeError):
    pass


@dataclass(frozen=True)
class StateMessage:
    seq: int
    t_send: int
    state: RobotState
    t_ctrl_echo: int
    seq_ctrl_echo: int


@dataclass(frozen=True)
class ControlMessage:
    seq: int
    t_send: int
    control: StampedControl


def _check_u32(value: int, name: str) -> None:
    if not 0 <= value <= _U32_MAX:
        raise EncodeError(f"{name} out of u32 range: {value}")


def _check_u64(value: int, name: str) -> None:
    if not 0 <= value <= _U64_MAX:
        raise EncodeError(f"{name} out of u64 range: {value}")


def encode_state(s: RobotState, ctrl_echo: tuple[int, int], seq: int, t_send: int) -> bytes:
    """Frame a state snapshot plus the (t_origin, seq) echo of the last applied control."""
    if not s.is_finite():
        raise EncodeError("state has non-finite fields")
    t_echo, seq_echo = ctrl_echo
    _check_u32(seq, "seq")
    _check_u64(t_send, "t_send")
    _check_u64(t_echo, "t_ctrl_echo")
    _check_u32(seq_echo, "seq_ctrl_echo")
    header = _HEADER.pack(MAGIC, VERSION, MSG_STATE, seq, t_send)
    payload = _STATE_PAYLOAD.pack(
        s.p.x, s.p.y, s.p.z,
        s.v.x, s.v.y, s.v.z,
        s.q.w, s.q.x, s.q.y, s.q.z,
        s.w.x, s.w.y, s.w.z,
        t_echo, seq_echo,
    )
    return header + payload


def encode_control(c: StampedControl) -> bytes:
    """Frame a velocity command; header t_send carries the command's origin stamp."""
    if not c.is_finite():
        raise EncodeError("control has non-finite fields")
    _check_u32(c.seq, "seq")
    _check_u64(c.t_origin, "t_origin")
    header = _HEADER.pack(MAGIC, VERSION, MSG_CONTROL, c.seq, c.t_origin)
    payload = _CONTROL_PAYLOAD.pack(c.v_cmd.x, c.v_cmd.y, c.v_cmd.z, c.yaw_rate_cmd)
    return header + payload


def decode(data: bytes) -> StateMessage | ControlMessage:
    """Decode one datagram. Raises a DecodeError subclass on any malformed input."""
    if len(data) < HEADER_LEN:
        raise FrameLengthError(f"datagram too short: {len(data)} < {HEADER_LEN}")
    magic, version, msg_type, seq, t_send = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}")
    if msg_type == MSG_STATE:
        if len(data) != STATE_FRAME_LEN:
            raise FrameLengthError(f"state frame must be {STATE_FRAME_LEN} bytes, got {len(data)}")
        vals = _STATE_PAYLOAD.unpack_from(data, HEADER_LEN)
        state = RobotState(
            t=t_send,
            p=Vec3(vals[0], vals[1], vals[2]),
            v=Vec3(vals[3], vals[4], vals[5]),
            q=Quat(vals[6], vals[7], vals[8], vals[9]),
            w=Vec3(vals[10], vals[11], vals[12]),
        )
        return StateMessage(seq=seq, t_send=t_send, state=state,
                            t_ctrl_echo=vals[13], seq_ctrl_echo=vals[14])
    if msg_type == MSG_CONTROL:
        if len(data) != CONTROL_FRAME_LEN:
            raise FrameLengthError(f"control frame must be {CONTROL_FRAME_LEN} bytes, got {len(data)}")
        vx, vy, vz, yaw_rate = _CONTROL_PAYLOAD.unpack_from(data, HEADER_LEN)
        control = StampedControl(t_origin=t_send, seq=seq,
                                 v_cmd=Vec3(vx, vy, vz), yaw_rate_cmd=yaw_rate)
        return ControlMessage(seq=seq, t_send=t_send, control=control)
    raise UnknownTypeError(f"unknown msg_type 0x{msg_type:02x}")


@dataclass
class EndpointCounters:
    sent: int = 0
    received: int = 0
    decode_errors: int = 0


class UdpEndpoint:
    """One end of the UDP tunnel.

    Fire-and-forget sends; receives drain the socket and decode each datagram,
    counting (never propagating) decode failures. Safe for one receive loop
    plus any number of sender threads.
    """

    def __init__(self, bind: tuple[str, int], peer: tuple[str, int] | None = None):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind(bind)
        self.peer = peer
        self.counters = EndpointCounters()
        self._lock = threading.Lock()

    @property
    def local_addr(self) -> tuple[str, int]:
        return self.sock.getsockname()

    def send(self, data: bytes, peer: tuple[str, int] | None = None) -> None:
        dest = peer or self.peer
        if dest is None:
            raise RuntimeError("endpoint has no peer address")
        self.sock.sendto(data, dest)
        with self._lock:
            self.counters.sent += 1

    def recv(self, timeout: float | None = 0.0) -> list[StateMessage | ControlMessage]:
        """Drain pending datagrams. ``timeout`` > 0 blocks up to that long for
        the first datagram; 0 polls; None blocks indefinitely."""
        out: list[StateMessage | ControlMessage] = []
        self.sock.settimeout(timeout)
        try:
            while True:
                data, _addr = self.sock.recvfrom(65535)
                with self._lock:
                    self.counters.received += 1
                try:
                    out.append(decode(data))
                except DecodeError:
                    with self._lock:
                        self.counters.decode_errors += 1
                # after the first datagram, only drain what is already queued
                self.sock.settimeout(0.0)
        except (socket.timeout, BlockingIOError):
            pass
        return out

    def close(self) -> None:
        self.sock.close()
