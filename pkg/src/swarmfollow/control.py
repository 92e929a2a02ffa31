"""Per-plane PID controllers and the clamped velocity command record."""
from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_LIMIT = 100.0


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"PID gain {name} must be finite and >= 0, got {v}")


# Final object-following gains per image plane.
X_GAINS = PidGains(0.3, 0.0, 0.0)
Y_GAINS = PidGains(0.3, 0.08, 1.0)
Z_GAINS = PidGains(0.9, 0.06, 0.2)


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float | None = None

    def reset(self) -> "PidState":
        return PidState()


def pid_step(gains: PidGains, state: PidState, error: float, dt: float):
    """One controller update; returns (output, new_state).

    The derivative term is zero on the first step after a reset.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    integral = state.integral + error * dt
    deriv = 0.0 if state.prev_error is None else (error - state.prev_error) / dt
    out = gains.kp * error + gains.ki * integral + gains.kd * deriv
    return out, PidState(integral, error)


def clamp(value: float, limit: float = DEFAULT_LIMIT) -> float:
    if not limit > 0:
        raise ValueError("limit must be > 0")
    return min(max(value, -limit), limit)


@dataclass(frozen=True)
class VelocityCommand:
    """Body-frame command in [-limit, limit] units.

    forward: +body x; lateral: + to the right; vertical: + up;
    yaw_rate: + turns right (clockwise seen from above).
    """
    forward: float = 0.0
    lateral: float = 0.0
    vertical: float = 0.0
    yaw_rate: float = 0.0

    def clamped(self, limit: float = DEFAULT_LIMIT) -> "VelocityCommand":
        return VelocityCommand(clamp(self.forward, limit), clamp(self.lateral, limit),
                               clamp(self.vertical, limit), clamp(self.yaw_rate, limit))

    @property
    def is_hover(self) -> bool:
        return self.forward == 0 and self.lateral == 0 and self.vertical == 0 and self.yaw_rate == 0

    def as_dict(self) -> dict[str, float]:
        return {"forward": self.forward, "lateral": self.lateral,
                "vertical": self.vertical, "yaw_rate": self.yaw_rate}


HOVER = VelocityCommand()


def assemble_command(x_out: float, y_out: float, z_out: float,
                     limit: float = DEFAULT_LIMIT, lateral_from_x: bool = False) -> VelocityCommand:
    """Map plane outputs to axes: X -> yaw rate, Y -> vertical (flipped), Z -> forward."""
    return VelocityCommand(
        forward=clamp(z_out, limit),
        lateral=clamp(x_out, limit) if lateral_from_x else 0.0,
        vertical=clamp(-y_out, limit),
        yaw_rate=clamp(x_out, limit),
    )
