"""Yaw-only rigid poses and pinhole projection.

Conventions (world and body frames are right-handed, z up):
  - yaw is counterclockwise about +z, normalized to [-pi, pi)
  - the camera sits at the body origin and looks along body +x
  - image u grows to the right (body -y), v grows downward (body -z)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Map an angle to [-pi, pi)."""
    w = (a + math.pi) % TWO_PI - math.pi
    # float modulo can return TWO_PI itself for tiny negative inputs
    return -math.pi if w >= math.pi else w


def _vec3(v) -> tuple[float, float, float]:
    x, y, z = (float(c) for c in v)
    return (x, y, z)


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw: float = 0.0

    def __post_init__(self):
        pos = _vec3(self.position)
        if not all(math.isfinite(c) for c in pos):
            raise ValueError(f"pose position must be finite, got {pos}")
        if not math.isfinite(self.yaw):
            raise ValueError(f"pose yaw must be finite, got {self.yaw}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def xyz(self) -> np.ndarray:
        return np.array(self.position)


def rotate_z(yaw: float, v) -> tuple[float, float, float]:
    c, s = math.cos(yaw), math.sin(yaw)
    x, y, z = v
    return (c * x - s * y, s * x + c * y, z)


def transform_point(pose: Pose, p_body) -> tuple[float, float, float]:
    """Body-frame point to world frame: R(yaw) p + position."""
    r = rotate_z(pose.yaw, _vec3(p_body))
    px, py, pz = pose.position
    return (r[0] + px, r[1] + py, r[2] + pz)


def inverse(pose: Pose) -> Pose:
    px, py, pz = pose.position
    t = rotate_z(-pose.yaw, (-px, -py, -pz))
    return Pose(t, -pose.yaw)


def compose(a: Pose, b: Pose) -> Pose:
    """The pose of b's frame expressed in the frame a is relative to."""
    return Pose(transform_point(a, b.position), a.yaw + b.yaw)


def world_to_body(pose: Pose, p_world) -> tuple[float, float, float]:
    px, py, pz = pose.position
    x, y, z = _vec3(p_world)
    return rotate_z(-pose.yaw, (x - px, y - py, z - pz))


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float = 920.0
    fy: float = 920.0
    cx: float = 480.0
    cy: float = 360.0
    width: int = 960
    height: int = 720

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Same field of view at a different resolution."""
        w = max(1, int(round(self.width * factor)))
        h = max(1, int(round(self.height * factor)))
        sx, sy = w / self.width, h / self.height
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, w, h)


def body_to_camera(p_body) -> tuple[float, float, float]:
    """Body (forward, left, up) to camera (right, down, depth)."""
    x, y, z = p_body
    return (-y, -z, x)


def project_point(camera_pose: Pose, k: CameraIntrinsics, p_world):
    """Pixel (u, v) of a world point, or None when it is not in front of the camera."""
    right, down, depth = body_to_camera(world_to_body(camera_pose, p_world))
    if depth <= 0.0:
        return None
    return (k.cx + k.fx * right / depth, k.cy + k.fy * down / depth)


def pixel_rays(k: CameraIntrinsics) -> np.ndarray:
    """Unit ray directions in the body frame for every pixel center, shape (H, W, 3)."""
    u = np.arange(k.width, dtype=np.float64)
    v = np.arange(k.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    right = (uu - k.cx) / k.fx
    down = (vv - k.cy) / k.fy
    d = np.stack([np.ones_like(right), -right, -down], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)
