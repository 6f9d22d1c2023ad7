"""Analytic stand-in for the simulated drone: first-order velocity tracking
(the onboard inner loop), command clamping, and sensor snapshots.

The inner attitude loop is abstracted into a velocity lag with time constant
``t_v``; commanded yaw rate is taken up directly by the body rate. Gravity,
drag, and rotor dynamics are absorbed by this abstraction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .core import QUAT_IDENTITY, VEC3_ZERO, Quat, RobotState, StampedControl, Vec3, quat_integrate

MAX_STEP_S = 0.05


class CommandRejected(ValueError):
    """Raised for non-finite commands; the previous setpoint stays active."""


@dataclass(frozen=True)
class PlantParams:
    t_v: float = 0.15  # velocity tracking time constant, s
    v_max: float = 2.0  # m/s
    a_max: float = 5.0  # m/s²
    sensor_noise_std: float = 0.0  # m and m/s, per axis

    def __post_init__(self):
        if self.t_v <= 0 or self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("t_v, v_max, a_max must all be > 0")
        if self.sensor_noise_std < 0:
            raise ValueError("sensor_noise_std must be >= 0")


@dataclass(frozen=True)
class PlantState:
    p: Vec3 = VEC3_ZERO
    v: Vec3 = VEC3_ZERO
    q: Quat = QUAT_IDENTITY
    w: Vec3 = VEC3_ZERO
    v_set: Vec3 = VEC3_ZERO
    echo_t: int = 0  # t_origin of last applied control; 0 until one arrives
    echo_seq: int = 0


def llc_apply(state: PlantState, cmd: StampedControl, params: PlantParams) -> PlantState:
    """Take a decoded command as the active setpoint, clamped to v_max, and
    record its (t_origin, seq) for the state-message echo."""
    if not cmd.is_finite():
        raise CommandRejected("non-finite control command")
    return replace(
        state,
        v_set=cmd.v_cmd.clamp_norm(params.v_max),
        w=Vec3(0.0, 0.0, cmd.yaw_rate_cmd),
        echo_t=cmd.t_origin,
        echo_seq=cmd.seq,
    )


def failsafe_hover(state: PlantState) -> PlantState:
    """Zero the velocity setpoint (control link lost); echo fields persist."""
    return replace(state, v_set=VEC3_ZERO, w=VEC3_ZERO)


def plant_step(state: PlantState, dt: float, params: PlantParams) -> PlantState:
    """Advance dynamics by dt seconds (semi-implicit Euler, dt in (0, 0.05])."""
    if not 0.0 < dt <= MAX_STEP_S:
        raise ValueError(f"dt must be in (0, {MAX_STEP_S}], got {dt}")
    accel = (state.v_set - state.v).scale(1.0 / params.t_v).clamp_norm(params.a_max)
    v = (state.v + accel.scale(dt)).clamp_norm(params.v_max)
    p = state.p + v.scale(dt)
    q = quat_integrate(state.q, state.w, dt)
    return replace(state, p=p, v=v, q=q)


def sensor_sample(state: PlantState, t_now: int, params: PlantParams,
                  rng: random.Random | None = None) -> RobotState:
    """Snapshot the state at t_now, with optional Gaussian noise on p and v."""
    p, v = state.p, state.v
    std = params.sensor_noise_std
    if std > 0.0 and rng is not None:
        p = Vec3(p.x + rng.gauss(0.0, std), p.y + rng.gauss(0.0, std), p.z + rng.gauss(0.0, std))
        v = Vec3(v.x + rng.gauss(0.0, std), v.y + rng.gauss(0.0, std), v.z + rng.gauss(0.0, std))
    return RobotState(t=t_now, p=p, v=v, q=state.q, w=state.w)
