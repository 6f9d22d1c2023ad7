"""Cloud-side latency compensation: round-trip delay estimation from the
control timestamp echo, and dead-reckoning prediction of the robot state over
the estimated delay.

The cumulative estimator is the running arithmetic mean of all round-trip
samples (incremental form); the windowed variant averages the most recent
``window`` samples so it can track profile changes mid-mission.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .core import VEC3_ZERO, Quat, RobotState, Vec3, quat_integrate


class ClockSkewError(ValueError):
    """Round-trip sample would be negative (realtime clock skew)."""


@dataclass(frozen=True)
class DelaySample:
    tau_us: int
    t_measured: int


@dataclass(frozen=True)
class DelayEstimate:
    """Running round-trip estimate. window=None keeps the cumulative mean of
    every sample; an integer window keeps a sliding mean of the newest ones."""

    tau_hat_us: float = 0.0
    n_samples: int = 0
    window: int | None = None
    recent: tuple[int, ...] = ()

    @property
    def horizon_s(self) -> float:
        return self.tau_hat_us / 1e6


def delay_update(est: DelayEstimate, sample: DelaySample) -> DelayEstimate:
    if sample.tau_us < 0:
        raise ValueError("delay sample must be >= 0")
    n = est.n_samples + 1
    if est.window is None:
        tau_hat = est.tau_hat_us + (sample.tau_us - est.tau_hat_us) / n
        return replace(est, tau_hat_us=tau_hat, n_samples=n)
    recent = (est.recent + (sample.tau_us,))[-est.window:]
    return replace(est, tau_hat_us=sum(recent) / len(recent), n_samples=n, recent=recent)


def measure_tau(t_now: int, t_ctrl_echo: int) -> DelaySample:
    """Round-trip sample: now minus the echoed control origin stamp. Both
    stamps come from the same local clock, so no peer clock sync is needed."""
    if t_ctrl_echo <= 0:
        raise ValueError("no control echoed yet")
    if t_now < t_ctrl_echo:
        raise ClockSkewError(f"t_now={t_now} precedes echo={t_ctrl_echo}")
    return DelaySample(tau_us=t_now - t_ctrl_echo, t_measured=t_now)


@dataclass(frozen=True)
class PredictedState:
    p_hat: Vec3
    v_hat: Vec3
    q_hat: Quat
    horizon_s: float


def predict(state: RobotState, accel: Vec3, horizon_s: float) -> PredictedState:
    """Propagate the delayed state forward by the horizon: position along the
    reported velocity, velocity along the estimated acceleration, orientation
    along the body rate."""
    if horizon_s < 0:
        raise ValueError("horizon must be >= 0")
    p_hat = state.p + state.v.scale(horizon_s)
    v_hat = state.v + accel.scale(horizon_s)
    q_hat = quat_integrate(state.q, state.w, horizon_s)
    return PredictedState(p_hat=p_hat, v_hat=v_hat, q_hat=q_hat, horizon_s=horizon_s)


@dataclass(frozen=True)
class AccelEstimator:
    """Smoothed finite difference of received velocities. alpha=1 is the raw
    difference; alpha=0 pins the output at zero (prediction treats velocity
    as constant)."""

    alpha: float = 0.2
    prev_v: Vec3 | None = None
    prev_t: int | None = None
    accel: Vec3 = VEC3_ZERO

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")


def accel_update(est: AccelEstimator, v: Vec3, t: int) -> tuple[AccelEstimator, Vec3]:
    """Fold in one velocity sample; returns the updated estimator and its
    current output. Samples not strictly later than the previous are rejected
    (estimator unchanged)."""
    if not v.is_finite():
        raise ValueError("velocity sample must be finite")
    if est.prev_t is None:
        return replace(est, prev_v=v, prev_t=t), est.accel
    if t <= est.prev_t:
        return est, est.accel
    dt_s = (t - est.prev_t) / 1e6
    raw = (v - est.prev_v).scale(1.0 / dt_s)
    accel = raw.scale(est.alpha) + est.accel.scale(1.0 - est.alpha)
    new = replace(est, prev_v=v, prev_t=t, accel=accel)
    return new, accel
