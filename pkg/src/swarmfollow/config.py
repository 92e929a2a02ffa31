"""Scenario schema, JSON loading with strict validation, and serialization.

Every field has a default; the all-defaults scenario is the parts-delivery
flight: the leader climbs 0.5 m then flies 1.5 m forward at 0.4 m/s while a
camera follower tracks the green ball on its back.
"""
from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field

from .coordination import AvoidanceConfig, Failure
from .geometry import CameraIntrinsics
from .perception import TrackerConfig
from .simulation import DynamicsParams, Scene, WaypointPlan

Vec3 = tuple[float, float, float]


class ConfigError(ValueError):
    """Scenario document is malformed or violates an invariant."""


@dataclass(frozen=True)
class LeaderSpec:
    start: Vec3 = (1.6, 0.0, 0.2)
    yaw: float = 0.0


@dataclass(frozen=True)
class FollowerSpec:
    start: Vec3 = (0.3, 0.0, 0.9)
    yaw: float = 0.0
    # desired position in the leader's body frame; None derives it from the
    # ball geometry and the radius setpoint
    follow_offset: Vec3 | None = None


@dataclass(frozen=True)
class ChannelConfig:
    latency_s: float = 0.0
    jitter_s: float = 0.0
    loss_prob: float = 0.0

    def __post_init__(self):
        if self.latency_s < 0 or self.jitter_s < 0:
            raise ValueError("latency_s and jitter_s must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")


@dataclass(frozen=True)
class CentralConfig:
    staleness_timeout_s: float | None = 0.5   # None disables the fail-safe
    pursuit_kp: float = 100.0
    yaw_kp: float = 100.0

    def __post_init__(self):
        if self.staleness_timeout_s is not None and not self.staleness_timeout_s > 0:
            raise ValueError("staleness_timeout_s must be > 0 or null")
        if self.pursuit_kp < 0 or self.yaw_kp < 0:
            raise ValueError("pursuit gains must be >= 0")


@dataclass(frozen=True)
class BatteryConfig:
    voltage: float = 3.8
    capacity_ah: float = 1.1
    draw_amps: float = 6.6

    def __post_init__(self):
        if not self.capacity_ah > 0:
            raise ValueError("capacity_ah must be > 0")
        if self.draw_amps < 0:
            raise ValueError("draw_amps must be >= 0")


@dataclass(frozen=True)
class QueueConfig:
    service_time_s: float = 0.231
    capacity: int | None = None

    def __post_init__(self):
        if not self.service_time_s > 0:
            raise ValueError("service_time_s must be > 0")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("capacity must be >= 1 or null")


@dataclass(frozen=True)
class LocalizationConfig:
    enabled: bool = True
    sigma_pos: float = 0.05
    sigma_yaw: float = 0.02

    def __post_init__(self):
        if self.sigma_pos < 0 or self.sigma_yaw < 0:
            raise ValueError("sigma_pos and sigma_yaw must be >= 0")


@dataclass(frozen=True)
class Scenario:
    duration_s: float = 20.0
    tick_dt_s: float = 1.0 / 30.0
    seed: int = 0
    mode: str = "decentralized"
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    scene: Scene = field(default_factory=Scene)
    leader: LeaderSpec = field(default_factory=LeaderSpec)
    followers: tuple[FollowerSpec, ...] = (FollowerSpec(),)
    plan: WaypointPlan = field(default_factory=WaypointPlan)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    avoidance: AvoidanceConfig = field(default_factory=AvoidanceConfig)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    central: CentralConfig = field(default_factory=CentralConfig)
    failures: tuple[Failure, ...] = ()
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    queue: QueueConfig = field(default_factory=QueueConfig)
    localization: LocalizationConfig = field(default_factory=LocalizationConfig)

    def __post_init__(self):
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")
        if not self.tick_dt_s > 0:
            raise ValueError("tick_dt_s must be > 0")
        if self.mode not in ("centralized", "decentralized"):
            raise ValueError(f"mode must be 'centralized' or 'decentralized', got {self.mode!r}")
        if not self.followers:
            raise ValueError("followers must list at least one follower")
        if not 0 <= self.scene.ball.attach_agent <= len(self.followers):
            raise ValueError("scene.ball.attach_agent must be an agent id (0 = leader)")

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration_s / self.tick_dt_s))

    def follow_offset(self, i: int) -> Vec3:
        """Desired follower position in the leader frame for follower index i."""
        spec = self.followers[i]
        if spec.follow_offset is not None:
            return spec.follow_offset
        distance = self.camera.fx * self.scene.ball.radius / self.tracker.radius_setpoint
        bx, by, bz = self.scene.ball.body_offset
        return (bx - distance, by, bz)

    def with_(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


# -- decoding -----------------------------------------------------------------

def _where(path: str) -> str:
    return path or "scenario"


def _decode(tp, value, path: str):
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{_where(path)}: expected an object, got {type(value).__name__}")
        hints = typing.get_type_hints(tp)
        names = [f.name for f in dataclasses.fields(tp) if f.init and not f.name.startswith("_")]
        for key in value:
            if key not in names:
                raise ConfigError(f"unknown key {key!r} in {_where(path)}")
        kwargs = {k: _decode(hints[k], v, f"{path}.{k}" if path else k) for k, v in value.items()}
        try:
            return tp(**kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{_where(path)}: {exc}") from None
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _decode(inner, value, path)
    if origin is tuple:
        args = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(f"{_where(path)}: expected a list")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_decode(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{_where(path)}: expected {len(args)} values, got {len(value)}")
        return tuple(_decode(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{_where(path)}: expected a number")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{_where(path)}: expected an integer")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{_where(path)}: expected true or false")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{_where(path)}: expected a string")
        return value
    raise ConfigError(f"{_where(path)}: unsupported field type {tp}")


def load_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return _decode(Scenario, doc, "")


def load_scenario_file(path) -> Scenario:
    with open(path, encoding="utf-8") as f:
        return load_scenario(f.read())


def to_jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj) if f.init and not f.name.startswith("_")}
    if isinstance(obj, (tuple, list)):
        return [to_jsonable(v) for v in obj]
    return obj


def dump_scenario(s: Scenario) -> str:
    return json.dumps(to_jsonable(s), indent=2)
