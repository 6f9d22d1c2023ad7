"""Userspace emulation of a lossy, delayed network path.

Per-packet delay is uniform on [base - jitter, base + jitter], clamped at
zero, matching the default behavior of kernel traffic-control delay shaping.
Packets are independent, so reordering happens naturally when jitter spans
the inter-packet gap.

Randomness comes from SplitMix64 so any reimplementation (any language) can
reproduce a delivery schedule bit-for-bit from the same seed.  Every send
consumes exactly two draws in fixed order: delay first, then loss.  Profile
switches (schedules, live control) change the delay/jitter/loss parameters
but never reseed the stream.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .core import ms_to_us

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Portable 64-bit PRNG (SplitMix64). Same seed, same stream, anywhere."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_double(self) -> float:
        """Uniform in [0, 1), 53-bit resolution."""
        return (self.next_u64() >> 11) * (2.0**-53)


UPLINK = "uplink"
DOWNLINK = "downlink"


@dataclass(frozen=True)
class NetworkProfile:
    base_delay_ms: float = 0.0
    jitter_ms: float = 0.0
    loss_prob: float = 0.0
    seed: int = 0
    direction: str = UPLINK

    def __post_init__(self):
        if self.base_delay_ms < 0:
            raise ValueError("base_delay_ms must be >= 0")
        if self.jitter_ms < 0:
            raise ValueError("jitter_ms must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")


@dataclass(frozen=True)
class ProfileSchedule:
    """Ordered profile switch points; entry i applies from t_start onward."""

    entries: tuple[tuple[int, NetworkProfile], ...]  # (t_start_us, profile)

    def __post_init__(self):
        starts = [t for t, _ in self.entries]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("schedule switch points must be strictly increasing")


def parse_schedule_text(text: str, direction: str = UPLINK, seed: int = 0) -> ProfileSchedule:
    """Parse schedule lines of the form ``t_start_ms delay_ms jitter_ms loss``.

    Blank lines and '#' comments are skipped. The seed applies to the channel
    as a whole, not per entry.
    """
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"schedule line {lineno}: expected 4 fields, got {len(parts)}")
        t_ms, delay_ms, jitter_ms, loss = (float(p) for p in parts)
        entries.append((ms_to_us(t_ms),
                        NetworkProfile(delay_ms, jitter_ms, loss, seed=seed, direction=direction)))
    if not entries:
        raise ValueError("schedule has no entries")
    return ProfileSchedule(tuple(entries))


def sample_delay_us(profile: NetworkProfile, rng: SplitMix64) -> int:
    """Draw one per-packet delay in µs (uniform around the base, clamped at 0)."""
    u = rng.next_double()
    delay_ms = profile.base_delay_ms - profile.jitter_ms + 2.0 * profile.jitter_ms * u
    if delay_ms < 0.0:
        delay_ms = 0.0
    return ms_to_us(delay_ms)


@dataclass(frozen=True)
class InFlightPacket:
    payload: bytes
    t_enqueue: int
    t_deliver: int


@dataclass
class PacketTrace:
    t_send: int  # µs
    delay_us: int
    delivered: bool


@dataclass
class ChannelCounters:
    sent: int = 0
    dropped: int = 0
    delivered: int = 0


class DelayChannel:
    """One direction of the emulated path: enqueue with sampled delay, deliver
    in t_deliver order. Deterministic given (seed, send schedule)."""

    def __init__(self, profile: NetworkProfile, schedule: ProfileSchedule | None = None,
                 keep_trace: bool = True):
        self.profile = profile
        self.rng = SplitMix64(profile.seed)
        self.schedule = schedule
        self._sched_idx = 0
        self._heap: list[tuple[int, int, InFlightPacket]] = []
        self._seq = 0
        self.counters = ChannelCounters()
        self.trace: list[PacketTrace] = [] if keep_trace else None  # type: ignore[assignment]

    def apply_schedule(self, t_now: int) -> None:
        """Activate any pending switch points with t_start <= t_now."""
        if self.schedule is None:
            return
        entries = self.schedule.entries
        while self._sched_idx < len(entries) and entries[self._sched_idx][0] <= t_now:
            self.profile = entries[self._sched_idx][1]
            self._sched_idx += 1

    def set_profile(self, profile: NetworkProfile) -> None:
        """Live profile change; in-flight packets keep their delivery times."""
        self.profile = profile

    def send(self, payload: bytes, t_now: int) -> None:
        self.apply_schedule(t_now)
        delay_us = sample_delay_us(self.profile, self.rng)
        loss_u = self.rng.next_double()
        self.counters.sent += 1
        dropped = loss_u < self.profile.loss_prob
        if self.trace is not None:
            self.trace.append(PacketTrace(t_now, delay_us, not dropped))
        if dropped:
            self.counters.dropped += 1
            return
        pkt = InFlightPacket(payload, t_enqueue=t_now, t_deliver=t_now + delay_us)
        heapq.heappush(self._heap, (pkt.t_deliver, self._seq, pkt))
        self._seq += 1

    def poll(self, t_now: int) -> list[bytes]:
        """Remove and return payloads due at or before t_now, in delivery order
        (ties broken by enqueue order)."""
        out = []
        while self._heap and self._heap[0][0] <= t_now:
            _, _, pkt = heapq.heappop(self._heap)
            out.append(pkt.payload)
            self.counters.delivered += 1
        return out

    def pending(self) -> int:
        return len(self._heap)

    def next_deliver_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None
