"""Scenario files: one YAML document fully determines a run (plant, gains,
network schedules, scripted waypoints, seeds). Schema id: cloudloop-scenario/1.

Unspecified per-component seeds derive from the master seed so a single
integer pins the whole experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .cloud_agent import CloudAgentConfig
from .controller import ControlConfig, PidGains
from .core import Vec3, Waypoint, ms_to_us, s_to_us
from .netem import DOWNLINK, UPLINK, NetworkProfile, ProfileSchedule
from .plant import PlantParams
from .robot_agent import RobotAgentConfig

SCHEMA = "cloudloop-scenario/1"

DEFAULT_ADDRS = {
    "robot_bind": "127.0.0.1:47001",
    "cloud_bind": "127.0.0.1:47002",
    "uplink_listen": "127.0.0.1:47010",
    "downlink_listen": "127.0.0.1:47011",
    "uplink_control": "127.0.0.1:47030",
    "downlink_control": "127.0.0.1:47031",
    "gateway": "127.0.0.1:47020",
}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    duration_us: int
    seed: int
    quantum_us: int
    robot: RobotAgentConfig
    cloud: CloudAgentConfig
    uplink: ProfileSchedule
    downlink: ProfileSchedule
    waypoints: tuple[tuple[int, Waypoint], ...]  # (t_us, waypoint), time-ordered
    addrs: dict = field(default_factory=lambda: dict(DEFAULT_ADDRS))


def _vec3(raw, what: str) -> Vec3:
    if not (isinstance(raw, (list, tuple)) and len(raw) == 3):
        raise ScenarioError(f"{what} must be a 3-element list")
    return Vec3(float(raw[0]), float(raw[1]), float(raw[2]))


def _schedule(raw, direction: str, seed: int) -> ProfileSchedule:
    if not raw:
        raise ScenarioError(f"{direction} schedule must have at least one entry")
    entries = []
    for item in raw:
        entries.append((s_to_us(float(item.get("t_s", 0.0))),
                        NetworkProfile(base_delay_ms=float(item.get("delay_ms", 0.0)),
                                       jitter_ms=float(item.get("jitter_ms", 0.0)),
                                       loss_prob=float(item.get("loss", 0.0)),
                                       seed=seed, direction=direction)))
    if entries[0][0] != 0:
        raise ScenarioError(f"{direction} schedule must start at t_s: 0")
    try:
        return ProfileSchedule(tuple(entries))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def parse_scenario(doc: dict, name_hint: str = "scenario") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario file must be a mapping")
    if doc.get("schema") != SCHEMA:
        raise ScenarioError(f"unsupported schema {doc.get('schema')!r}, expected {SCHEMA!r}")
    duration_s = float(doc.get("duration_s", 0.0))
    if duration_s <= 0:
        raise ScenarioError("duration_s must be > 0")
    seed = int(doc.get("seed", 0))

    p = doc.get("plant", {})
    plant = PlantParams(
        t_v=float(p.get("t_v", 0.15)),
        v_max=float(p.get("v_max", 2.0)),
        a_max=float(p.get("a_max", 5.0)),
        sensor_noise_std=float(p.get("sensor_noise_std", 0.0)),
    )
    r = doc.get("robot", {})
    start = r.get("start", {})
    robot = RobotAgentConfig(
        plant=plant,
        publish_period_us=ms_to_us(float(r.get("publish_period_ms", 10.0))),
        step_us=ms_to_us(float(r.get("step_ms", 5.0))),
        failsafe_us=ms_to_us(float(r.get("failsafe_ms", 500.0))),
        noise_seed=int(r.get("noise_seed", seed + 1)),
        start_p=_vec3(start.get("p", [0.0, 0.0, 0.0]), "robot.start.p"),
        start_yaw=float(start.get("yaw", 0.0)),
    )

    c = doc.get("control", {})
    gains_default = PidGains()
    control = ControlConfig(
        gains=PidGains(kp=float(c.get("kp", gains_default.kp)),
                       ki=float(c.get("ki", gains_default.ki)),
                       kd=float(c.get("kd", gains_default.kd))),
        v_max=float(c.get("v_max", 2.0)),
        i_max=float(c.get("i_max", 1.0)),
        period_us=ms_to_us(float(c.get("period_ms", 20.0))),
        yaw_gain=float(c.get("yaw_gain", 1.0)),
    )
    pr = doc.get("predictor", {})
    window = pr.get("window", 50)
    cloud = CloudAgentConfig(
        control=control,
        window=None if window in (None, "none", 0) else int(window),
        accel_alpha=float(pr.get("accel_alpha", 0.2)),
    )

    net = doc.get("network", {})
    up_raw = net.get("uplink", {})
    down_raw = net.get("downlink", {})
    uplink = _schedule(up_raw.get("schedule", [{}]), UPLINK, int(up_raw.get("seed", seed + 2)))
    downlink = _schedule(down_raw.get("schedule", [{}]), DOWNLINK, int(down_raw.get("seed", seed + 3)))

    waypoints = []
    for item in doc.get("waypoints", []):
        wp = Waypoint(p_ref=_vec3(item["p"], "waypoint.p"), yaw_ref=float(item.get("yaw", 0.0)),
                      t_issued=s_to_us(float(item.get("t_s", 0.0))))
        waypoints.append((wp.t_issued, wp))
    if any(b[0] < a[0] for a, b in zip(waypoints, waypoints[1:])):
        raise ScenarioError("waypoints must be time-ordered")

    addrs = dict(DEFAULT_ADDRS)
    addrs.update({k: str(v) for k, v in doc.get("realtime", {}).items() if k in addrs})

    return ScenarioConfig(
        name=str(doc.get("name", name_hint)),
        duration_us=s_to_us(duration_s),
        seed=seed,
        quantum_us=ms_to_us(float(doc.get("quantum_ms", 1.0))),
        robot=robot,
        cloud=cloud,
        uplink=uplink,
        downlink=downlink,
        waypoints=tuple(waypoints),
        addrs=addrs,
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from exc
    return parse_scenario(doc, name_hint=path.stem)
