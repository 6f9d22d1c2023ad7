"""Shared domain types: vectors, quaternions, robot state, and the mission clock.

Timestamps are 64-bit microsecond counts: from mission start in virtual mode,
from the UNIX epoch in realtime mode.  All physics math uses SI floats
(meters, m/s, rad/s, seconds); conversions happen at the boundaries.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

US_PER_S = 1_000_000
US_PER_MS = 1_000


def us_to_s(t_us: int) -> float:
    return t_us / US_PER_S


def s_to_us(t_s: float) -> int:
    return round(t_s * US_PER_S)


def ms_to_us(t_ms: float) -> int:
    return round(t_ms * US_PER_MS)


@dataclass(frozen=True)
class Vec3:
    """Immutable 3-vector. Units depend on context (m, m/s, m/s², rad/s)."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def scale(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def clamp_norm(self, limit: float) -> "Vec3":
        """Scale down to ``limit`` if longer; direction preserved."""
        n = self.norm()
        if n > limit and n > 0.0:
            return self.scale(limit / n)
        return self

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)


VEC3_ZERO = Vec3(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Quat:
    """Unit quaternion, scalar-first (w, x, y, z)."""

    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def multiply(self, o: "Quat") -> "Quat":
        return Quat(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )

    def normalized(self) -> "Quat":
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if n == 0.0 or not math.isfinite(n):
            raise ValueError("cannot normalize zero or non-finite quaternion")
        return Quat(self.w / n, self.x / n, self.y / n, self.z / n)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def yaw(self) -> float:
        """Heading angle about +z, in (-pi, pi]."""
        return math.atan2(
            2.0 * (self.w * self.z + self.x * self.y),
            1.0 - 2.0 * (self.y * self.y + self.z * self.z),
        )

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in (self.w, self.x, self.y, self.z))


QUAT_IDENTITY = Quat(1.0, 0.0, 0.0, 0.0)


def quat_integrate(q: Quat, w: Vec3, dt: float) -> Quat:
    """Rotate ``q`` by body angular rate ``w`` (rad/s) held constant for ``dt`` s.

    Uses the exponential map of the half rotation vector, exact for constant
    rate. The result is renormalized; callers can rely on unit norm to 1e-9.
    """
    if not (w.is_finite() and q.is_finite() and math.isfinite(dt)):
        raise ValueError("quat_integrate requires finite inputs")
    if dt < 0.0:
        raise ValueError("dt must be >= 0")
    angle = w.norm() * dt
    half = 0.5 * angle
    if angle < 1e-12:
        # Small-angle: sin(half)/|w*dt| -> 0.5, cos(half) -> 1
        dq = Quat(1.0, 0.5 * w.x * dt, 0.5 * w.y * dt, 0.5 * w.z * dt)
    else:
        s = math.sin(half) / angle * dt
        dq = Quat(math.cos(half), w.x * s, w.y * s, w.z * s)
    return q.multiply(dq).normalized()


def yaw_quat(yaw: float) -> Quat:
    """Quaternion for a pure heading rotation."""
    return Quat(math.cos(0.5 * yaw), 0.0, 0.0, math.sin(0.5 * yaw))


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class RobotState:
    """Snapshot of the vehicle: position, velocity, attitude, body rates."""

    t: int  # µs
    p: Vec3 = VEC3_ZERO  # m
    v: Vec3 = VEC3_ZERO  # m/s
    q: Quat = QUAT_IDENTITY
    w: Vec3 = VEC3_ZERO  # rad/s

    def is_finite(self) -> bool:
        return self.p.is_finite() and self.v.is_finite() and self.q.is_finite() and self.w.is_finite()


@dataclass(frozen=True)
class StampedControl:
    """Velocity command stamped at creation time by its producer."""

    t_origin: int  # µs
    seq: int  # u32, strictly increasing per producer
    v_cmd: Vec3 = VEC3_ZERO  # m/s
    yaw_rate_cmd: float = 0.0  # rad/s

    def is_finite(self) -> bool:
        return self.v_cmd.is_finite() and math.isfinite(self.yaw_rate_cmd)


@dataclass(frozen=True)
class Waypoint:
    """Operator position/heading reference."""

    p_ref: Vec3
    yaw_ref: float = 0.0
    t_issued: int = 0  # µs

    def is_finite(self) -> bool:
        return self.p_ref.is_finite() and math.isfinite(self.yaw_ref)


class InvalidClockMode(RuntimeError):
    pass


class Clock:
    """Mission clock. Virtual mode advances only by explicit steps; realtime
    mode reads epoch microseconds clamped to be monotone."""

    VIRTUAL = "virtual"
    REALTIME = "realtime"

    def __init__(self, mode: str = VIRTUAL):
        if mode not in (self.VIRTUAL, self.REALTIME):
            raise ValueError(f"unknown clock mode {mode!r}")
        self.mode = mode
        self._now_us = 0
        if mode == self.REALTIME:
            self._now_us = time.time_ns() // 1000

    def now(self) -> int:
        if self.mode == self.REALTIME:
            t = time.time_ns() // 1000
            if t > self._now_us:
                self._now_us = t
        return self._now_us

    def advance(self, dt_us: int) -> int:
        """Step a virtual clock forward by ``dt_us`` and return the new time."""
        if self.mode != self.VIRTUAL:
            raise InvalidClockMode("advance() is only valid on a virtual clock")
        if dt_us < 0:
            raise ValueError("dt_us must be >= 0")
        self._now_us += dt_us
        return self._now_us
