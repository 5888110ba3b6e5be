"""Point-mass aircraft kinematics and the fuel model.

Constant ground speed, turn-rate-limited heading changes, envelope-limited
vertical speed. Headings are degrees clockwise from north; x is east, y is
north (meters); altitude is feet; vertical speed ft/min.

Integration is fixed-step forward Euler. Within a step the heading and
vertical speed are updated first, then position and altitude integrate over
the full step at the new values, so each step's ground track is a straight
chord. Fuel burns at ``fuel_rate_cruise`` scaled by the climb factor while
vertical speed is positive and by the descent factor while negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

BASE_ALT_FT = 500.0


class DynamicsError(ValueError):
    """Raised for non-finite commands or malformed performance limits."""


@dataclass(frozen=True)
class PerformanceLimits:
    max_turn_rate_dps: float = 3.0
    max_climb_fpm: float = 2000.0
    max_descent_fpm: float = 1000.0
    fuel_rate_cruise: float = 1.0  # units/s
    fuel_factor_climb: float = 1.5
    fuel_factor_descent: float = 0.8

    def __post_init__(self) -> None:
        if self.fuel_factor_climb + self.fuel_factor_descent <= 2.0:
            raise DynamicsError(
                "fuel_factor_climb + fuel_factor_descent must exceed 2 so that "
                "vertical excursions cost net extra fuel"
            )


@dataclass(frozen=True)
class GuidanceCommand:
    target_heading_deg: float
    target_vs_fpm: float = 0.0
    saturated: bool = False  # no clear resolution existed; holding heading


@dataclass(frozen=True)
class AircraftState:
    x: float
    y: float
    alt_ft: float
    heading_deg: float  # [0, 360)
    ground_speed: float  # m/s, constant
    vs_fpm: float
    fuel_used: float
    time_s: float
    mode: str = "CRUISE"


def wrap_heading(heading_deg: float) -> float:
    return heading_deg % 360.0


def signed_heading_delta(from_deg: float, to_deg: float) -> float:
    """Shorter-arc delta in (-180, 180]; exactly-opposite headings give +180.

    The +180 convention makes the 180-degree tie break clockwise, which keeps
    the state transition deterministic.
    """
    delta = (to_deg - from_deg) % 360.0
    if delta > 180.0:
        delta -= 360.0
    return delta


def turn_toward(current_deg: float, target_deg: float, max_delta_deg: float) -> float:
    delta = signed_heading_delta(current_deg, target_deg)
    if abs(delta) <= max_delta_deg:
        return wrap_heading(target_deg)
    return wrap_heading(current_deg + math.copysign(max_delta_deg, delta))


def step_state(
    state: AircraftState,
    cmd: GuidanceCommand,
    dt: float,
    limits: PerformanceLimits,
) -> AircraftState:
    """Advance one integration step; pure function of its inputs."""
    if not (math.isfinite(cmd.target_heading_deg) and math.isfinite(cmd.target_vs_fpm)):
        raise DynamicsError(f"non-finite guidance command: {cmd}")
    if dt <= 0.0:
        raise DynamicsError(f"dt must be positive, got {dt}")

    heading = turn_toward(state.heading_deg, cmd.target_heading_deg, limits.max_turn_rate_dps * dt)

    vs = min(max(cmd.target_vs_fpm, -limits.max_descent_fpm), limits.max_climb_fpm)
    if vs < 0.0 and state.alt_ft <= BASE_ALT_FT:
        vs = 0.0  # never commanded below the base altitude

    h_rad = math.radians(heading)
    x = state.x + state.ground_speed * dt * math.sin(h_rad)
    y = state.y + state.ground_speed * dt * math.cos(h_rad)
    alt = state.alt_ft + vs * dt / 60.0
    if alt < BASE_ALT_FT:
        alt = BASE_ALT_FT
        vs = 0.0

    if vs > 0.0:
        factor = limits.fuel_factor_climb
    elif vs < 0.0:
        factor = limits.fuel_factor_descent
    else:
        factor = 1.0
    fuel = state.fuel_used + limits.fuel_rate_cruise * dt * factor

    return AircraftState(
        x=x,
        y=y,
        alt_ft=alt,
        heading_deg=heading,
        ground_speed=state.ground_speed,
        vs_fpm=vs,
        fuel_used=fuel,
        time_s=state.time_s + dt,
        mode=state.mode,
    )


def bearing_deg(from_xy: tuple[float, float], to_xy: tuple[float, float]) -> float:
    """Heading (deg clockwise from north) from one point toward another."""
    dx = to_xy[0] - from_xy[0]
    dy = to_xy[1] - from_xy[1]
    if dx == 0.0 and dy == 0.0:
        return 0.0
    return wrap_heading(math.degrees(math.atan2(dx, dy)))


@dataclass(frozen=True)
class BaselineFlight:
    """Straight-line, constant-altitude optimal flight between two points."""

    length_m: float
    duration_s: float
    fuel: float
    heading_deg: float


def baseline_trajectory(
    origin_xy: tuple[float, float],
    destination_xy: tuple[float, float],
    cruise_speed: float,
    limits: PerformanceLimits,
) -> BaselineFlight:
    length = math.dist(origin_xy, destination_xy)
    duration = length / cruise_speed
    return BaselineFlight(
        length_m=length,
        duration_s=duration,
        fuel=duration * limits.fuel_rate_cruise,
        heading_deg=bearing_deg(origin_xy, destination_xy),
    )
