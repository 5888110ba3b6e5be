"""Per-aircraft closed-loop mission logic: cruise, avoid, resume, descend.

The controller is a small state machine driven at decision ticks. It consumes
a decision context supplied by the scenario engine (alert state, hysteresis
clear-of-conflict, resolution and band queries) and produces guidance
commands plus an event stream.

Transitions:

* CRUISE commands the direct-to-destination heading; an avoid alert opens a
  maneuver record and enters AVOID.
* AVOID re-resolves every tick. The first resolution of a maneuver deviates
  minimally from the mission course; subsequent ticks resolve around the
  heading already commanded, so an established avoidance holds instead of
  relaxing back toward the course while the threat still sits near the
  lookahead boundary (that relaxation sawtooths straight into the threat).
  Once the hysteresis declares clear of conflict the record closes and the
  controller moves to RESUME, which is evaluated immediately within the same
  tick.
* RESUME re-enters AVOID on a new alert; otherwise it commands the
  direct-to-destination heading if that heading sits in a clear band, else it
  holds the current heading and retries next tick. While blocked it holds
  heading (rather than continuing the last avoidance turn); the held command
  is visible in the event log.
* DESCEND_TO_BASE (3D) overlays cruise guidance with a descent toward the
  base altitude, entered only when the descent band is clear and the
  destination is within the descent window (arrival requires the base
  altitude, so the descent belongs to the end of the mission; descending as
  soon as a conflict clears would re-couple the altitude strata mid-flight
  and pump the very conflict the climb just resolved). Capture within 25 ft
  levels off back to CRUISE.
* DONE is absorbing and assigned by the engine on arrival.

Arrived aircraft are removed from the traffic picture by the engine, so a
controller never sees tracks of landed traffic.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field
from typing import Protocol

from .dynamics import AircraftState, GuidanceCommand, bearing_deg

MODE_CRUISE = "CRUISE"
MODE_AVOID = "AVOID"
MODE_RESUME = "RESUME"
MODE_DESCEND = "DESCEND_TO_BASE"
MODE_DONE = "DONE"

KIND_HORIZONTAL = "horizontal"
KIND_VERTICAL = "vertical"
KIND_MIXED = "mixed"

ALT_CAPTURE_BAND_FT = 25.0


class DecisionContext(Protocol):
    """What the engine exposes to a controller at one decision tick."""

    def alert_avoid(self) -> bool: ...

    def clear_of_conflict(self) -> bool: ...

    def resolve(
        self, preferred_deg: float, current_deg: float, preferred_vs_fpm: float = 0.0
    ) -> GuidanceCommand: ...

    def heading_is_clear(self, heading_deg: float) -> bool: ...

    def descent_is_clear(self) -> bool: ...


@dataclass
class ManeuverRecord:
    aircraft_id: int
    start_time_s: float
    start_heading_deg: float
    end_time_s: float | None = None
    end_heading_deg: float | None = None
    kind: str = KIND_HORIZONTAL
    _vertical: bool = field(default=False, repr=False)
    _horizontal: bool = field(default=False, repr=False)

    def note_command(self, cmd: GuidanceCommand) -> None:
        if cmd.target_vs_fpm > 0.0:
            self._vertical = True
        if cmd.target_heading_deg != self.start_heading_deg:
            self._horizontal = True
        if self._vertical and self._horizontal:
            self.kind = KIND_MIXED
        elif self._vertical:
            self.kind = KIND_VERTICAL
        else:
            self.kind = KIND_HORIZONTAL


class MissionController:
    """State machine for one aircraft within one scenario run."""

    def __init__(
        self,
        aircraft_id: int,
        destination_xy: tuple[float, float],
        *,
        dims: str = "2d",
        base_alt_ft: float = 500.0,
        descent_rate_fpm: float = 500.0,
    ):
        self.aircraft_id = aircraft_id
        self.destination_xy = destination_xy
        self.dims = dims
        self.base_alt_ft = base_alt_ft
        self.descent_rate_fpm = descent_rate_fpm
        self.mode = MODE_CRUISE
        self.records: list[ManeuverRecord] = []
        self._open: ManeuverRecord | None = None
        self._avoid_heading: float | None = None
        self._avoid_vs: float = 0.0  # held vertical level within a maneuver

    def desired_heading(self, state: AircraftState) -> float:
        return bearing_deg((state.x, state.y), self.destination_xy)

    def mark_done(self) -> None:
        self.mode = MODE_DONE

    def decide(
        self, state: AircraftState, ctx: DecisionContext, t: float
    ) -> tuple[GuidanceCommand, list[dict]]:
        assert self.mode != MODE_DONE, "decide() must not be called after DONE"
        events: list[dict] = []
        desired = self.desired_heading(state)

        if self.mode in (MODE_CRUISE, MODE_DESCEND):
            if ctx.alert_avoid():
                cmd = self._enter_avoid(state, ctx, desired, t, events)
            else:
                cmd = self._cruise_command(state, ctx, desired, t, events)
        elif self.mode == MODE_AVOID:
            if ctx.clear_of_conflict():
                self._close_maneuver(state, t, events)
                self._transition(MODE_RESUME, t, events)
                cmd = self._resume_command(state, ctx, desired, t, events)
            else:
                anchor = self._avoid_heading if self._avoid_heading is not None else desired
                cmd = ctx.resolve(anchor, state.heading_deg, self._avoid_vs)
                self._avoid_heading = cmd.target_heading_deg
                self._avoid_vs = cmd.target_vs_fpm
                if self._open is not None:
                    self._open.note_command(cmd)
                if cmd.saturated:
                    events.append(
                        {"t": t, "aircraft": self.aircraft_id, "event": "saturated"}
                    )
        elif self.mode == MODE_RESUME:
            if ctx.alert_avoid():
                cmd = self._enter_avoid(state, ctx, desired, t, events)
            else:
                cmd = self._resume_command(state, ctx, desired, t, events)
        else:  # pragma: no cover - unreachable by construction
            raise AssertionError(f"unexpected mode {self.mode}")
        return cmd, events

    # -- helpers ------------------------------------------------------------

    def _transition(self, new_mode: str, t: float, events: list[dict]) -> None:
        events.append(
            {
                "t": t,
                "aircraft": self.aircraft_id,
                "event": "mode_transition",
                "from": self.mode,
                "to": new_mode,
            }
        )
        self.mode = new_mode

    def _enter_avoid(
        self,
        state: AircraftState,
        ctx: DecisionContext,
        desired: float,
        t: float,
        events: list[dict],
    ) -> GuidanceCommand:
        self._transition(MODE_AVOID, t, events)
        rec = ManeuverRecord(self.aircraft_id, t, state.heading_deg)
        self.records.append(rec)
        self._open = rec
        events.append(
            {"t": t, "aircraft": self.aircraft_id, "event": "maneuver_start",
             "heading": state.heading_deg}
        )
        cmd = ctx.resolve(desired, state.heading_deg, 0.0)
        self._avoid_heading = cmd.target_heading_deg
        self._avoid_vs = cmd.target_vs_fpm
        rec.note_command(cmd)
        return cmd

    def _close_maneuver(self, state: AircraftState, t: float, events: list[dict]) -> None:
        self._avoid_heading = None
        self._avoid_vs = 0.0
        if self._open is not None:
            self._open.end_time_s = t
            self._open.end_heading_deg = state.heading_deg
            events.append(
                {"t": t, "aircraft": self.aircraft_id, "event": "maneuver_end",
                 "heading": state.heading_deg, "kind": self._open.kind}
            )
            self._open = None

    def _resume_command(
        self,
        state: AircraftState,
        ctx: DecisionContext,
        desired: float,
        t: float,
        events: list[dict],
    ) -> GuidanceCommand:
        if ctx.heading_is_clear(desired):
            self._transition(MODE_CRUISE, t, events)
            return self._cruise_command(state, ctx, desired, t, events)
        return GuidanceCommand(state.heading_deg, 0.0)

    def _within_descent_window(self, state: AircraftState) -> bool:
        """Destination close enough that the descent to base must begin."""
        remaining = math.dist((state.x, state.y), self.destination_xy)
        descent_time_s = (state.alt_ft - self.base_alt_ft) / self.descent_rate_fpm * 60.0
        return remaining <= 1.3 * state.ground_speed * descent_time_s + 400.0

    def _cruise_command(
        self,
        state: AircraftState,
        ctx: DecisionContext,
        desired: float,
        t: float,
        events: list[dict],
    ) -> GuidanceCommand:
        vs = 0.0
        if self.dims == "3d":
            above = state.alt_ft - self.base_alt_ft
            if self.mode == MODE_DESCEND:
                if above <= ALT_CAPTURE_BAND_FT:
                    self._transition(MODE_CRUISE, t, events)
                elif not ctx.descent_is_clear():
                    self._transition(MODE_CRUISE, t, events)  # pause the descent
                else:
                    vs = -self.descent_rate_fpm
            elif (
                above > ALT_CAPTURE_BAND_FT
                and self._within_descent_window(state)
                and ctx.descent_is_clear()
            ):
                self._transition(MODE_DESCEND, t, events)
                vs = -self.descent_rate_fpm
        return GuidanceCommand(desired, vs)


def count_deviations(records: list[ManeuverRecord]) -> dict[int, int]:
    """Maneuvers started per aircraft id (one entry per AVOID entry)."""
    out: dict[int, int] = {}
    for rec in records:
        out[rec.aircraft_id] = out.get(rec.aircraft_id, 0) + 1
    return out
