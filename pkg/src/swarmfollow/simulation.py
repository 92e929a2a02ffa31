"""Kinematic drones, synthetic camera/depth rendering, waypoint leader,
battery bookkeeping, the depth-frame backlog queue and fiducial sightings."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .control import DEFAULT_LIMIT, HOVER, VelocityCommand, clamp
from .geometry import (CameraIntrinsics, Pose, pixel_rays, project_point, rotate_z,
                       transform_point, world_to_body)
from .perception import MarkerObservation

Vec3 = tuple[float, float, float]


# -- battery ----------------------------------------------------------------

NOMINAL_HOVER_DRAW_A = 6.6  # 1.1 Ah over a 10 minute flight


@dataclass(frozen=True)
class BatteryState:
    voltage: float = 3.8
    capacity_ah: float = 1.1
    consumed_ah: float = 0.0

    def __post_init__(self):
        if not self.capacity_ah > 0:
            raise ValueError("battery capacity must be > 0")
        if self.consumed_ah < 0:
            raise ValueError("consumed charge must be >= 0")

    @property
    def charge_ah(self) -> float:
        return max(0.0, self.capacity_ah - self.consumed_ah)


def battery_step(b: BatteryState, draw_amps: float, dt: float):
    """Drain draw*dt/3600 Ah; returns (battery', depleted)."""
    if draw_amps < 0:
        raise ValueError("draw must be >= 0")
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt > 0 and b.charge_ah > 0:
        b = replace(b, consumed_ah=b.consumed_ah + draw_amps * dt / 3600.0)
    return b, b.charge_ah == 0.0


# -- drone dynamics ---------------------------------------------------------

@dataclass(frozen=True)
class DynamicsParams:
    max_speed: float = 1.0        # m/s at command 100
    max_yaw_rate: float = 1.0     # rad/s at command 100
    tau: float = 0.2              # first-order velocity lag, s
    ir_floor: float = 0.10        # m
    command_limit: float = DEFAULT_LIMIT

    def __post_init__(self):
        if not (self.max_speed > 0 and self.max_yaw_rate > 0):
            raise ValueError("max_speed and max_yaw_rate must be > 0")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.ir_floor < 0:
            raise ValueError("ir_floor must be >= 0")


@dataclass(frozen=True)
class DroneState:
    pose: Pose = field(default_factory=Pose)
    velocity: Vec3 = (0.0, 0.0, 0.0)
    yaw_rate: float = 0.0         # rad/s, counterclockwise
    battery: BatteryState = field(default_factory=BatteryState)
    grounded: bool = False


def _lag(dt: float, tau: float) -> float:
    return 1.0 if tau == 0 else 1.0 - math.exp(-dt / tau)


def integrate_drone(s: DroneState, cmd: VelocityCommand, dt: float, p: DynamicsParams):
    """step_drone that also reports whether the IR floor clamped the altitude."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if s.grounded:
        return replace(s, velocity=(0.0, 0.0, 0.0), yaw_rate=0.0), False
    cmd = cmd.clamped(p.command_limit)
    scale = p.max_speed / 100.0
    v_body = (cmd.forward * scale, -cmd.lateral * scale, cmd.vertical * scale)
    v_target = rotate_z(s.pose.yaw, v_body)
    a = _lag(dt, p.tau)
    v = [vi + (ti - vi) * a for vi, ti in zip(s.velocity, v_target)]
    speed = math.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
    if speed > p.max_speed:
        v = [c * p.max_speed / speed for c in v]
    w_target = -cmd.yaw_rate / 100.0 * p.max_yaw_rate
    w = s.yaw_rate + (w_target - s.yaw_rate) * a
    w = min(max(w, -p.max_yaw_rate), p.max_yaw_rate)
    x, y, z = s.pose.position
    x, y, z = x + v[0] * dt, y + v[1] * dt, z + v[2] * dt
    floored = z < p.ir_floor
    if floored:
        z = p.ir_floor
        v[2] = max(v[2], 0.0)
    pose = Pose((x, y, z), s.pose.yaw + w * dt)
    return replace(s, pose=pose, velocity=(v[0], v[1], v[2]), yaw_rate=w), floored


def step_drone(s: DroneState, cmd: VelocityCommand, dt: float, params: DynamicsParams) -> DroneState:
    return integrate_drone(s, cmd, dt, params)[0]


# -- scene ------------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    attach_agent: int = 0
    body_offset: Vec3 = (-0.05, 0.0, 0.0)
    radius: float = 0.02
    color: tuple[int, int, int] = (0, 200, 0)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be > 0")
        if any(not 0 <= c <= 255 for c in self.color):
            raise ValueError("ball color channels must be in [0, 255]")


@dataclass(frozen=True)
class Marker:
    """A square fiducial; its pose yaw points along the outward face normal."""
    id: int
    pose: Pose


@dataclass(frozen=True)
class Wall:
    lo: Vec3
    hi: Vec3

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("wall lo must be strictly below hi on every axis")


def _default_markers() -> tuple[Marker, ...]:
    out = []
    i = 0
    for z in (1.4, 0.6):
        for y in (1.2, 0.4, -0.4, -1.2):
            out.append(Marker(i, Pose((5.0, y, z), math.pi)))
            i += 1
    return tuple(out)


@dataclass(frozen=True)
class Scene:
    ball: Ball = field(default_factory=Ball)
    markers: tuple[Marker, ...] = field(default_factory=_default_markers)
    marker_size: float = 0.15
    walls: tuple[Wall, ...] = (Wall((5.0, -3.0, 0.0), (5.2, 3.0, 3.0)),)
    background: tuple[int, int, int] = (110, 110, 110)
    marker_color: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        ids = [m.id for m in self.markers]
        if len(set(ids)) != len(ids):
            raise ValueError("marker ids must be unique")
        if not self.marker_size > 0:
            raise ValueError("marker_size must be > 0")

    def marker_map(self) -> dict[int, Pose]:
        return {m.id: m.pose for m in self.markers}

    def ball_position(self, agents) -> Vec3 | None:
        s = agents.get(self.ball.attach_agent)
        if s is None:
            return None
        return transform_point(s.pose, self.ball.body_offset)


def _fill_disc(img, u, v, r, color):
    h, w = img.shape[:2]
    x0, x1 = max(0, math.ceil(u - r)), min(w - 1, math.floor(u + r))
    y0, y1 = max(0, math.ceil(v - r)), min(h - 1, math.floor(v + r))
    if x0 > x1 or y0 > y1:
        return
    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    inside = (xx - u) ** 2 + (yy - v) ** 2 <= r * r
    img[y0:y1 + 1, x0:x1 + 1][inside] = color


def _fill_square(img, u, v, half, color):
    h, w = img.shape[:2]
    x0, x1 = max(0, math.ceil(u - half)), min(w - 1, math.floor(u + half))
    y0, y1 = max(0, math.ceil(v - half)), min(h - 1, math.floor(v + half))
    if x0 <= x1 and y0 <= y1:
        img[y0:y1 + 1, x0:x1 + 1] = color


@lru_cache(maxsize=4)
def _background(h: int, w: int, color) -> np.ndarray:
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = color
    img.flags.writeable = False
    return img


def _camera_depth(cam: Pose, p_world) -> float:
    return world_to_body(cam, p_world)[0]


def render_camera(scene: Scene, cam: Pose, k: CameraIntrinsics, agents) -> np.ndarray:
    """RGB frame: background, marker squares and the ball disc, far to near."""
    img = _background(k.height, k.width, tuple(scene.background)).copy()
    items = []
    for m in scene.markers:
        z = _camera_depth(cam, m.pose.position)
        if z > 0:
            items.append((z, 1, m.id, "marker", m.pose.position, scene.marker_size / 2.0))
    ball = scene.ball_position(agents)
    if ball is not None:
        z = _camera_depth(cam, ball)
        if z > 0:
            items.append((z, 0, 0, "ball", ball, scene.ball.radius))
    items.sort(key=lambda it: (-it[0], it[1], it[2]))
    for z, _, _, kind, pos, size in items:
        u, v = project_point(cam, k, pos)
        if kind == "ball":
            _fill_disc(img, u, v, k.fx * size / z, scene.ball.color)
        else:
            _fill_square(img, u, v, k.fx * size / z, scene.marker_color)
    return img


@lru_cache(maxsize=8)
def _rays(k: CameraIntrinsics) -> np.ndarray:
    return pixel_rays(k)


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def render_depth(scene: Scene, cam: Pose, k: CameraIntrinsics, near: float, far: float,
                 agents=None) -> np.ndarray:
    """Single-channel proximity map: 255 at `near`, 0 at `far` and for empty rays."""
    if not 0 < near < far:
        raise ValueError("need 0 < near < far")
    rays = _rays(k)
    c, s = math.cos(cam.yaw), math.sin(cam.yaw)
    dx = c * rays[..., 0] - s * rays[..., 1]
    dy = s * rays[..., 0] + c * rays[..., 1]
    dz = rays[..., 2]
    dirs = (dx, dy, dz)
    o = cam.position
    best = np.full(dx.shape, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for wall in scene.walls:
            t_lo = np.full(dx.shape, -np.inf)
            t_hi = np.full(dx.shape, np.inf)
            for axis in range(3):
                d = dirs[axis]
                t1 = (wall.lo[axis] - o[axis]) / d
                t2 = (wall.hi[axis] - o[axis]) / d
                inside_slab = wall.lo[axis] <= o[axis] <= wall.hi[axis]
                par = d == 0
                t1 = np.where(par, -np.inf if inside_slab else np.inf, t1)
                t2 = np.where(par, np.inf if inside_slab else -np.inf, t2)
                t_lo = np.maximum(t_lo, np.minimum(t1, t2))
                t_hi = np.minimum(t_hi, np.maximum(t1, t2))
            hit = (t_lo <= t_hi) & (t_hi > 0)
            t = np.where(t_lo > 0, t_lo, 0.0)
            best = np.where(hit & (t < best), t, best)
    ball = scene.ball_position(agents or {})
    if ball is not None:
        r = scene.ball.radius
        ox, oy, oz = (o[i] - ball[i] for i in range(3))
        b = dx * ox + dy * oy + dz * oz
        cterm = ox * ox + oy * oy + oz * oz - r * r
        disc = b * b - cterm
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where(t0 > 0, t0, np.where(t1 > 0, 0.0, np.inf))
        t = np.where(hit, t, np.inf)
        best = np.minimum(best, t)
    val = round_half_away(255.0 * (1.0 - (best - near) / (far - near)))
    val = np.where(np.isinf(best), 0.0, np.clip(val, 0, 255))
    return val.astype(np.uint8)


# -- leader waypoints -------------------------------------------------------

@dataclass(frozen=True)
class WaypointPlan:
    legs: tuple[Vec3, ...] = ((0.0, 0.0, 0.5), (1.5, 0.0, 0.0))
    speed: float = 0.4
    tolerance: float = 0.05

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError("speed must be > 0")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class LegProgress:
    index: int = 0
    origin: Vec3 | None = None

    def done(self, plan: WaypointPlan) -> bool:
        return self.index >= len(plan.legs)


def leader_step(s: DroneState, plan: WaypointPlan, progress: LegProgress, dt: float,
                params: DynamicsParams = DynamicsParams()):
    """Velocity command toward the current relative waypoint; (command, progress')."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    pos = s.pose.position
    if progress.origin is None:
        progress = LegProgress(progress.index, pos)
    while not progress.done(plan):
        leg = plan.legs[progress.index]
        target = tuple(o + d for o, d in zip(progress.origin, leg))
        err = [t - p for t, p in zip(target, pos)]
        dist = math.sqrt(sum(e * e for e in err))
        if dist > plan.tolerance:
            break
        progress = LegProgress(progress.index + 1, target)
    if progress.done(plan):
        return HOVER, progress
    speed = min(plan.speed, dist / dt)
    v_world = [e / dist * speed for e in err]
    bx, by, bz = rotate_z(-s.pose.yaw, v_world)
    unit = 100.0 / params.max_speed
    lim = params.command_limit
    cmd = VelocityCommand(forward=clamp(bx * unit, lim), lateral=clamp(-by * unit, lim),
                          vertical=clamp(bz * unit, lim))
    return cmd, progress


# -- frame backlog ----------------------------------------------------------

@dataclass
class ProcessedFrame:
    arrival: float
    completion: float
    frame: object

    @property
    def latency(self) -> float:
        return self.completion - self.arrival


@dataclass
class FrameQueue:
    """FIFO single server; `work_done` is service already spent on the head frame."""
    service_time: float = 0.231
    capacity: int | None = None
    pending: deque = field(default_factory=deque)
    work_done: float = 0.0
    arrived: int = 0
    processed: int = 0
    dropped: int = 0

    def __post_init__(self):
        if not self.service_time > 0:
            raise ValueError("service_time must be > 0")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("capacity must be >= 1 when bounded")

    @property
    def backlog(self) -> int:
        return len(self.pending)

    def step(self, arrivals, now: float, budget: float):
        """Admit this tick's frames, then serve for `budget` seconds from `now`."""
        if budget < 0:
            raise ValueError("budget must be >= 0")
        dropped_now = 0
        for fr in arrivals:
            self.arrived += 1
            if self.capacity is not None and len(self.pending) >= self.capacity:
                self.pending.popleft()
                self.work_done = 0.0
                self.dropped += 1
                dropped_now += 1
            self.pending.append((now, fr))
        out = []
        used = 0.0
        while self.pending:
            need = self.service_time - self.work_done
            if used + need > budget + 1e-12:
                self.work_done += budget - used
                break
            used += need
            self.work_done = 0.0
            arrival, fr = self.pending.popleft()
            self.processed += 1
            out.append(ProcessedFrame(arrival, now + used, fr))
        stats = {
            "latencies": [p.latency for p in out],
            "backlog": len(self.pending),
            "dropped": dropped_now,
        }
        return out, stats


def frame_queue_step(q: FrameQueue, arrivals, now: float, budget: float):
    """Functional form: returns (processed, q', stats) leaving q untouched."""
    q2 = replace(q, pending=deque(q.pending))
    processed, stats = q2.step(arrivals, now, budget)
    return processed, q2, stats


# -- fiducials ----------------------------------------------------------------

def visible_markers(scene: Scene, cam: Pose, k: CameraIntrinsics, sigma_pos: float,
                    sigma_yaw: float, rng: np.random.Generator,
                    near: float = 0.3, far: float = 10.0) -> list[MarkerObservation]:
    """Geometric marker sightings with Gaussian pose noise.

    Visible: center projects into the image, depth in (near, far) and the
    camera is on the marker's front side. One 4-vector of normals is drawn
    per visible marker whatever the sigmas, so streams stay aligned.
    """
    if sigma_pos < 0 or sigma_yaw < 0:
        raise ValueError("noise sigmas must be >= 0")
    out = []
    cx, cy, cz = cam.position
    for m in sorted(scene.markers, key=lambda m: m.id):
        depth = _camera_depth(cam, m.pose.position)
        if not near < depth < far:
            continue
        uv = project_point(cam, k, m.pose.position)
        if uv is None or not (0 <= uv[0] < k.width and 0 <= uv[1] < k.height):
            continue
        mx, my, _ = m.pose.position
        nx, ny = math.cos(m.pose.yaw), math.sin(m.pose.yaw)
        if nx * (cx - mx) + ny * (cy - my) <= 0:
            continue
        e = rng.standard_normal(4)
        est = Pose((cx + sigma_pos * e[0], cy + sigma_pos * e[1], cz + sigma_pos * e[2]),
                   cam.yaw + sigma_yaw * e[3])
        out.append(MarkerObservation(m.id, est))
    return out
