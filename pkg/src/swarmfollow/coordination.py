"""Centralized and decentralized follower architectures over a lossy channel."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .control import DEFAULT_LIMIT, HOVER, VelocityCommand, clamp
from .geometry import Pose, rotate_z, transform_point, wrap_angle
from .perception import PidStates, TrackerConfig, depth_avoid, track_frame

CENTRAL_ID = -1
# tick times and latencies are sums of floats; treat near-equal as due
TIME_EPS = 1e-9


@dataclass(frozen=True)
class Telemetry:
    agent: int
    pose: Pose
    velocity: tuple[float, float, float]
    battery_ah: float


@dataclass(frozen=True)
class CommandPayload:
    command: VelocityCommand
    data_time: float   # sent_at of the oldest telemetry the command was built from


@dataclass(frozen=True)
class Message:
    kind: str          # "telemetry" | "command"
    sender: int
    receiver: int
    payload: object
    sent_at: float

    def __post_init__(self):
        if self.kind not in ("telemetry", "command"):
            raise ValueError(f"unknown message kind {self.kind!r}")


@dataclass
class Channel:
    """Shared radio link. Loss is one Bernoulli draw at send time; latency is
    latency_s plus uniform jitter in [0, jitter_s]. Every send consumes exactly
    two uniforms from the stream regardless of parameters."""
    latency_s: float = 0.0
    jitter_s: float = 0.0
    loss_prob: float = 0.0
    in_flight: list = field(default_factory=list)
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    _seq: int = 0

    def __post_init__(self):
        if self.latency_s < 0 or self.jitter_s < 0:
            raise ValueError("latency and jitter must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")

    def send(self, m: Message, now: float, rng: np.random.Generator) -> bool:
        """Queue a message; returns False when it was lost."""
        if now + TIME_EPS < m.sent_at:
            raise ValueError("cannot send a message before its sent_at time")
        u_loss, u_lat = rng.random(2)
        self.sent += 1
        if u_loss < self.loss_prob:
            self.dropped += 1
            return False
        due = now + self.latency_s + self.jitter_s * u_lat
        heapq.heappush(self.in_flight, (due, self._seq, m))
        self._seq += 1
        return True

    def deliver(self, now: float) -> list[Message]:
        out = []
        while self.in_flight and self.in_flight[0][0] <= now + TIME_EPS:
            out.append(heapq.heappop(self.in_flight)[2])
        self.delivered += len(out)
        return out

    def conserved(self) -> bool:
        return self.sent == self.delivered + self.dropped + len(self.in_flight)


def channel_send(ch: Channel, m: Message, now: float, rng: np.random.Generator) -> Channel:
    ch.send(m, now, rng)
    return ch


# -- architecture state -------------------------------------------------------

@dataclass(frozen=True)
class Failure:
    kind: str          # "central" | "leader"
    at: float

    def __post_init__(self):
        if self.kind not in ("central", "leader"):
            raise ValueError(f"unknown failure kind {self.kind!r}")
        if self.at < 0:
            raise ValueError("failure time must be >= 0")


@dataclass(frozen=True)
class SwarmMode:
    mode: str = "decentralized"
    failures: tuple[Failure, ...] = ()

    def __post_init__(self):
        if self.mode not in ("centralized", "decentralized"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def _alive(self, kind: str, now: float) -> bool:
        return not any(f.kind == kind and now >= f.at for f in self.failures)

    def central_alive(self, now: float) -> bool:
        return self._alive("central", now)

    def leader_alive(self, now: float) -> bool:
        return self._alive("leader", now)


def inject_failure(mode: SwarmMode, kind: str, at: float) -> SwarmMode:
    return SwarmMode(mode.mode, mode.failures + (Failure(kind, at),))


# -- centralized pursuit ------------------------------------------------------

@dataclass
class CentralController:
    """Global-state pursuit: each follower is driven toward a point fixed in
    the leader's body frame, using only telemetry that reached the center."""
    leader_id: int
    follow_offsets: dict
    staleness_timeout: float | None = 0.5
    pursuit_kp: float = 100.0     # command units per meter
    yaw_kp: float = 100.0         # command units per radian
    limit: float = DEFAULT_LIMIT
    known: dict = field(default_factory=dict)   # agent -> (sent_at, Telemetry)

    def receive(self, inbox) -> None:
        for m in inbox:
            if m.kind != "telemetry":
                continue
            prev = self.known.get(m.sender)
            if prev is None or m.sent_at >= prev[0]:
                self.known[m.sender] = (m.sent_at, m.payload)

    def command_for(self, follower: int, now: float):
        """(command, data_time, stale) for one follower; data_time None if blind."""
        lead = self.known.get(self.leader_id)
        mine = self.known.get(follower)
        if lead is None or mine is None:
            return HOVER, None, False
        data_time = min(lead[0], mine[0])
        if self.staleness_timeout is not None and now - data_time > self.staleness_timeout:
            return HOVER, data_time, True
        lp, fp = lead[1].pose, mine[1].pose
        goal = transform_point(lp, self.follow_offsets[follower])
        err = [g - f for g, f in zip(goal, fp.position)]
        bx, by, bz = rotate_z(-fp.yaw, err)
        bearing = math.atan2(lp.position[1] - fp.position[1], lp.position[0] - fp.position[0])
        yaw_err = wrap_angle(bearing - fp.yaw)
        k = self.pursuit_kp
        cmd = VelocityCommand(forward=clamp(k * bx, self.limit), lateral=clamp(-k * by, self.limit),
                              vertical=clamp(k * bz, self.limit),
                              yaw_rate=clamp(-self.yaw_kp * yaw_err, self.limit))
        return cmd, data_time, False

    def step(self, inbox, now: float) -> list[Message]:
        self.receive(inbox)
        out = []
        for fid in sorted(self.follow_offsets):
            cmd, data_time, _ = self.command_for(fid, now)
            stamp = now if data_time is None else data_time
            out.append(Message("command", CENTRAL_ID, fid, CommandPayload(cmd, stamp), now))
        return out


def central_step(controller: CentralController, inbox, now: float) -> list[Message]:
    return controller.step(inbox, now)


# -- decentralized follower -----------------------------------------------------

@dataclass(frozen=True)
class AvoidanceConfig:
    threshold: int = 245
    gain: float = 0.3
    near: float = 0.3
    far: float = 10.0
    depth_scale: float = 0.25   # depth map resolution relative to the camera

    def __post_init__(self):
        if not 0 <= self.threshold <= 255:
            raise ValueError("threshold must be in [0, 255]")
        if not 0 < self.near < self.far:
            raise ValueError("need 0 < near < far")
        if not 0 < self.depth_scale <= 1:
            raise ValueError("depth_scale must be in (0, 1]")


def decentralized_step(frame: np.ndarray, depth: np.ndarray | None, cfg: TrackerConfig,
                       states: PidStates, dt: float, altitude: float,
                       avoid: AvoidanceConfig = AvoidanceConfig()):
    """Local-only follower update: avoidance, when triggered, overrides tracking.

    Returns (command, hud, states', avoiding).
    """
    cmd, hud, states = track_frame(frame, cfg, states, dt, altitude)
    if depth is not None:
        evade = depth_avoid(depth, avoid.threshold, avoid.gain, cfg.output_limit)
        if evade is not None:
            return evade, hud, states, True
    return cmd, hud, states, False
