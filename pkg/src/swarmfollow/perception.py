"""Per-frame tracker, depth-map avoidance reflex and fiducial pose fusion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import imaging
from .control import (DEFAULT_LIMIT, HOVER, X_GAINS, Y_GAINS, Z_GAINS, PidGains,
                      PidState, VelocityCommand, assemble_command, clamp, pid_step)
from .geometry import CameraIntrinsics, Pose, wrap_angle
from .imaging import Circle, HsvBounds


@dataclass(frozen=True)
class TrackerConfig:
    bounds: HsvBounds = field(default_factory=HsvBounds)
    radius_setpoint: float = 15.0
    x_gains: PidGains = X_GAINS
    y_gains: PidGains = Y_GAINS
    z_gains: PidGains = Z_GAINS
    output_limit: float = DEFAULT_LIMIT
    min_component_area: int = 20
    erode_iterations: int = 2
    dilate_iterations: int = 2
    lateral_from_x: bool = False

    def __post_init__(self):
        if not self.radius_setpoint > 0:
            raise ValueError("radius_setpoint must be > 0")
        if self.min_component_area < 1:
            raise ValueError("min_component_area must be >= 1")
        if not self.output_limit > 0:
            raise ValueError("output_limit must be > 0")
        if self.erode_iterations < 1 or self.dilate_iterations < 1:
            raise ValueError("morphology iterations must be >= 1")


PidStates = tuple[PidState, PidState, PidState]
FRESH_STATES: PidStates = (PidState(), PidState(), PidState())


@dataclass(frozen=True)
class HudRecord:
    circle: Circle | None = None
    offset_vector: tuple[float, float] | None = None
    altitude: float = 0.0
    target_locked: bool = False


def _frame_dims(frame: np.ndarray) -> CameraIntrinsics:
    h, w = frame.shape[:2]
    return CameraIntrinsics(1.0, 1.0, w / 2.0, h / 2.0, w, h)


def clean_and_label(bmap: np.ndarray, erode_iterations: int, dilate_iterations: int):
    """Erode, dilate and extract components of a mask.

    Work is confined to the occupied bounding box plus the dilation margin;
    everything outside it is empty before and after morphology, so the
    result equals running on the full map.
    """
    rows = np.flatnonzero(bmap.any(axis=1))
    if rows.size == 0:
        return []
    cols = np.flatnonzero(bmap.any(axis=0))
    m = dilate_iterations
    r0, r1 = max(rows[0] - m, 0), min(rows[-1] + m + 1, bmap.shape[0])
    c0, c1 = max(cols[0] - m, 0), min(cols[-1] + m + 1, bmap.shape[1])
    crop = bmap[r0:r1, c0:c1]
    crop = imaging.morphology(crop, "erode", erode_iterations)
    crop = imaging.morphology(crop, "dilate", dilate_iterations)
    comps = imaging.find_external_components(crop)
    shift = np.array([c0, r0], dtype=np.int64)
    for cp in comps:
        cp.pixels += shift
        cp.contour += shift
    return comps


def locate_target(frame: np.ndarray, cfg: TrackerConfig) -> Circle | None:
    """Enclosing circle of the largest mask blob, or None when nothing qualifies."""
    imaging.check_image(frame, 3)
    bmap = imaging.segment(frame, cfg.bounds)
    comps = clean_and_label(bmap, cfg.erode_iterations, cfg.dilate_iterations)
    if not comps or comps[0].area < cfg.min_component_area:
        return None
    return imaging.min_enclosing_circle(comps[0].contour)


def track_frame(frame: np.ndarray, cfg: TrackerConfig, states: PidStates, dt: float,
                altitude: float):
    """Run the tracking pipeline on one RGB frame.

    Returns (command, hud, states'). When the target is missing the command is
    hover and the PID states are returned untouched.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    circle = locate_target(frame, cfg)
    if circle is None:
        return HOVER, HudRecord(altitude=altitude), states
    dx, dy, dr = imaging.compute_offsets(circle, _frame_dims(frame), cfg.radius_setpoint)
    sx, sy, sz = states
    x_out, sx = pid_step(cfg.x_gains, sx, dx, dt)
    y_out, sy = pid_step(cfg.y_gains, sy, dy, dt)
    z_out, sz = pid_step(cfg.z_gains, sz, dr, dt)
    cmd = assemble_command(x_out, y_out, z_out, cfg.output_limit, cfg.lateral_from_x)
    hud = HudRecord(circle, (dx, dy), altitude, True)
    return cmd, hud, (sx, sy, sz)


def depth_avoid(depth: np.ndarray, intensity_threshold: int, gain: float,
                limit: float = DEFAULT_LIMIT) -> VelocityCommand | None:
    """Steer away from the brightest (nearest) depth pixel if it reaches the threshold."""
    imaging.check_image(depth, 1)
    d = depth.reshape(depth.shape[0], depth.shape[1])
    idx = int(np.argmax(d))
    row, col = divmod(idx, d.shape[1])
    if int(d[row, col]) < intensity_threshold:
        return None
    dx = col - d.shape[1] / 2.0
    dy = row - d.shape[0] / 2.0
    # obstacle right (dx > 0) -> turn left; obstacle below (dy > 0) -> climb
    return VelocityCommand(forward=0.0, lateral=0.0,
                           vertical=clamp(gain * dy, limit), yaw_rate=clamp(-gain * dx, limit))


# -- fiducial localization --------------------------------------------------

@dataclass(frozen=True)
class MarkerObservation:
    marker_id: int
    camera_pose_estimate: Pose


@dataclass(frozen=True)
class PoseEstimate:
    pose: Pose
    covariance: np.ndarray  # 4x4 over (x, y, z, yaw)
    marker_count: int


class NoFixError(ValueError):
    """No marker observations were available for localization."""


def estimate_pose(observations) -> PoseEstimate:
    """Fuse per-marker camera poses: mean position, circular-mean yaw.

    The covariance is that of the mean (sample covariance / N).
    """
    obs = list(observations)
    if not obs:
        raise NoFixError("no fix: no marker observations")
    pos = np.array([o.camera_pose_estimate.position for o in obs])
    yaws = np.array([o.camera_pose_estimate.yaw for o in obs])
    n = len(obs)
    mean_pos = pos.mean(axis=0)
    mean_yaw = math.atan2(float(np.sin(yaws).mean()), float(np.cos(yaws).mean()))
    if n == 1:
        cov = np.zeros((4, 4))
    else:
        dyaw = np.array([wrap_angle(y - mean_yaw) for y in yaws])
        dev = np.column_stack([pos - mean_pos, dyaw])
        cov = dev.T @ dev / (n - 1) / n
        cov = (cov + cov.T) / 2.0
    return PoseEstimate(Pose(tuple(mean_pos), mean_yaw), cov, n)


# -- HUD ----------------------------------------------------------------------

CIRCLE_COLOR = (255, 255, 0)
ARROW_COLOR = (255, 0, 0)
HUD_FIELDS = ("tick", "altitude_m", "locked", "dx", "dy", "radius")


def render_hud(frame: np.ndarray, hud: HudRecord) -> np.ndarray:
    """Overlay the enclosing circle and the center-to-object segment on a copy."""
    imaging.check_image(frame, 3)
    out = frame.copy()
    if not hud.target_locked or hud.circle is None:
        return out
    h, w = out.shape[:2]
    cx, cy = hud.circle.center
    r = hud.circle.radius
    yy, xx = np.mgrid[0:h, 0:w]
    dist = np.hypot(xx - cx, yy - cy)
    out[(dist >= r - 0.5) & (dist < r + 0.5)] = CIRCLE_COLOR
    x0, y0 = w / 2.0, h / 2.0
    steps = int(math.ceil(max(abs(cx - x0), abs(cy - y0)))) + 1
    for t in np.linspace(0.0, 1.0, steps + 1):
        px = int(math.floor(x0 + t * (cx - x0) + 0.5))
        py = int(math.floor(y0 + t * (cy - y0) + 0.5))
        if 0 <= px < w and 0 <= py < h:
            out[py, px] = ARROW_COLOR
    return out


def hud_metadata(tick: int, hud: HudRecord) -> dict:
    dx, dy = hud.offset_vector if hud.offset_vector is not None else ("", "")
    return {
        "tick": tick,
        "altitude_m": hud.altitude,
        "locked": int(hud.target_locked),
        "dx": dx,
        "dy": dy,
        "radius": hud.circle.radius if hud.circle is not None else "",
    }


def write_hud_metadata(path, rows) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.DictWriter(f, fieldnames=HUD_FIELDS, lineterminator="\n")
        wr.writeheader()
        for row in rows:
            wr.writerow(row)
