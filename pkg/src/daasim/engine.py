"""Time-stepped scenario executor.

One scenario integrates up to four aircraft from their origin cells until all
have arrived or the timeout expires. Within each step:

1. a snapshot of all active tracks is taken;
2. pairwise conflict flags are evaluated against the snapshot and folded
   into each aircraft's clear-of-conflict hysteresis;
3. aircraft whose decision tick is due are decided in ascending id order,
   all against the same snapshot, so update order leaks no information;
4. every aircraft integrates one step under its currently held command;
5. separation monitors update with the closed-form minimum distance over the
   step's straight-line segment pair (no sampling misses), and arrivals are
   retired from the traffic picture.

Guidance uses the separation thresholds scaled by ``resolution_buffer`` so
resolutions aim a few percent beyond the raw threshold; the loss-of-separation
monitors always judge against the raw monitor thresholds.

On arrival (within ``capture_radius_m`` of the destination centroid, and in
3D within 50 ft of the base altitude) the remaining straight-line distance to
the centroid is credited to fuel, time, and path length, which makes results
comparable with the geometric baseline regardless of the capture radius.

Everything here is deterministic: identical (configuration, spec) inputs give
bit-identical results apart from the measured wall-clock.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import Airspace, m_to_ft
from .dynamics import (
    BASE_ALT_FT,
    AircraftState,
    GuidanceCommand,
    PerformanceLimits,
    bearing_deg,
    step_state,
)
from .daa import (
    DEFAULT_VS_LEVELS_FPM,
    SeparationThresholds,
    Track,
    CocTracker,
    apply_priority_suppression,
    candidate_conflict,
    compute_bands,
    conflict_within,
    select_recovery,
    select_resolution,
    vs_level_clear,
)
from .mission import MODE_AVOID, MissionController
from .scenario import PairTuple


class EngineError(RuntimeError):
    """Non-finite state or malformed spec detected during a run."""


@dataclass(frozen=True)
class ScenarioSpec:
    """Full configuration of one experiment; a value object, safe to share."""

    label: str = "ref_ip_2d_4k"
    daa_mode: str = "reference"  # reference | off
    priorities: str = "intrinsic"  # intrinsic | extrinsic
    dims: str = "2d"  # 2d | 3d
    thresholds: SeparationThresholds = SeparationThresholds()
    monitor_thresholds_ft: tuple[float, ...] = (2000.0, 4000.0)
    cruise_speed: float = 40.0  # m/s
    cell_radius: float = 2000.0  # m
    dt: float = 0.5  # s
    decision_period_cruise: float = 2.0  # s
    decision_period_avoid: float = 0.5  # s
    timeout_s: float = 1000.0
    limits: PerformanceLimits = PerformanceLimits()
    coc_hold_s: float = 5.0
    capture_radius_m: float = 200.0
    resolution_buffer: float = 1.05  # guidance margin over the raw threshold
    # vertical separation builds slowly (hundreds of ft/min against tens of
    # m/s horizontally), so guidance needs a proportionally larger margin in
    # that dimension before counting a stratum as decoupled
    vertical_buffer: float = 1.4
    band_transient_dt: float = 2.0  # s, arc sampling during band evaluation
    vs_levels: tuple[float, ...] = DEFAULT_VS_LEVELS_FPM
    descent_rate_fpm: float = 1000.0

    def __post_init__(self) -> None:
        if self.daa_mode not in ("reference", "off"):
            raise EngineError(f"unknown daa_mode {self.daa_mode!r}")
        if self.priorities not in ("intrinsic", "extrinsic"):
            raise EngineError(f"unknown priorities {self.priorities!r}")
        if self.dims not in ("2d", "3d"):
            raise EngineError(f"unknown dims {self.dims!r}")
        if self.decision_period_avoid > self.decision_period_cruise:
            raise EngineError("decision_period_avoid must not exceed decision_period_cruise")
        if any(th <= 0.0 for th in self.monitor_thresholds_ft):
            raise EngineError("monitor thresholds must be positive")
        if self.capture_radius_m < self.cruise_speed * self.dt:
            raise EngineError("capture radius smaller than one step of travel invites overshoot oscillation")
        if -self.descent_rate_fpm not in self.vs_levels:
            raise EngineError("descent_rate_fpm must correspond to a vertical-speed band level")
        lim = self.limits
        max_climb_cmd = max(self.vs_levels)
        if max_climb_cmd > 0.0:
            # climbs must cost more than the matching descent saves, at the
            # commanded rates, so vertical excursions never pay for themselves
            if (lim.fuel_factor_climb - 1.0) * self.descent_rate_fpm < (1.0 - lim.fuel_factor_descent) * max_climb_cmd:
                raise EngineError(
                    "fuel factors and commanded vertical rates would let a climb/descend "
                    "excursion burn less than level flight"
                )

    @property
    def guidance_thresholds(self) -> SeparationThresholds:
        # both protection dimensions carry the guidance margin; monitors
        # judge the raw thresholds
        return replace(
            self.thresholds,
            hmd_ft=self.thresholds.hmd_ft * self.resolution_buffer,
            zthr_ft=self.thresholds.zthr_ft * self.vertical_buffer,
        )

    @property
    def extrinsic(self) -> bool:
        return self.priorities == "extrinsic"


def spec_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "label": spec.label,
        "daa_mode": spec.daa_mode,
        "priorities": spec.priorities,
        "dims": spec.dims,
        "hmd_ft": spec.thresholds.hmd_ft,
        "zthr_ft": spec.thresholds.zthr_ft,
        "lookahead_s": spec.thresholds.lookahead_s,
        "monitor_thresholds_ft": list(spec.monitor_thresholds_ft),
        "cruise_speed": spec.cruise_speed,
        "cell_radius": spec.cell_radius,
        "dt": spec.dt,
        "decision_period_cruise": spec.decision_period_cruise,
        "decision_period_avoid": spec.decision_period_avoid,
        "timeout_s": spec.timeout_s,
        "max_turn_rate_dps": spec.limits.max_turn_rate_dps,
        "max_climb_fpm": spec.limits.max_climb_fpm,
        "max_descent_fpm": spec.limits.max_descent_fpm,
        "fuel_rate_cruise": spec.limits.fuel_rate_cruise,
        "fuel_factor_climb": spec.limits.fuel_factor_climb,
        "fuel_factor_descent": spec.limits.fuel_factor_descent,
        "coc_hold_s": spec.coc_hold_s,
        "capture_radius_m": spec.capture_radius_m,
        "resolution_buffer": spec.resolution_buffer,
        "vertical_buffer": spec.vertical_buffer,
        "band_transient_dt": spec.band_transient_dt,
        "vs_levels": list(spec.vs_levels),
        "descent_rate_fpm": spec.descent_rate_fpm,
    }


def spec_from_dict(data: dict) -> ScenarioSpec:
    data = dict(data)
    thresholds = SeparationThresholds(
        hmd_ft=data.pop("hmd_ft", 4000.0),
        zthr_ft=data.pop("zthr_ft", 450.0),
        lookahead_s=data.pop("lookahead_s", 60.0),
    )
    limits = PerformanceLimits(
        max_turn_rate_dps=data.pop("max_turn_rate_dps", 3.0),
        max_climb_fpm=data.pop("max_climb_fpm", 1000.0),
        max_descent_fpm=data.pop("max_descent_fpm", 1000.0),
        fuel_rate_cruise=data.pop("fuel_rate_cruise", 1.0),
        fuel_factor_climb=data.pop("fuel_factor_climb", 1.5),
        fuel_factor_descent=data.pop("fuel_factor_descent", 0.8),
    )
    if "monitor_thresholds_ft" in data:
        data["monitor_thresholds_ft"] = tuple(data["monitor_thresholds_ft"])
    if "vs_levels" in data:
        data["vs_levels"] = tuple(data["vs_levels"])
    return ScenarioSpec(thresholds=thresholds, limits=limits, **data)


@dataclass
class ScenarioResult:
    pairs: PairTuple
    n_aircraft: int
    fuels: list[float]
    flight_times: list[float]
    path_lengths: list[float]
    deviations: list[int]
    arrived: list[bool]
    min_sep_ft: dict[tuple[int, int], float]
    min_sep_gated_ft: dict[tuple[int, int], float]
    los: dict[float, bool]
    los_ungated: dict[float, bool]
    timeout: bool
    wall_clock_s: float
    error: str | None = None
    events: list[dict] = field(default_factory=list)

    def overall_min_sep_ft(self) -> float:
        return min(self.min_sep_ft.values()) if self.min_sep_ft else math.inf


@dataclass
class OpenLoopResult:
    pairs: PairTuple
    stopped_time_s: float
    stop_reason: str  # coc | complete | timeout
    distance_flown_m: float
    maneuvers_started: int
    heading_deltas_deg: list[float]
    timeout: bool
    wall_clock_s: float
    error: str | None = None
    events: list[dict] = field(default_factory=list)


@dataclass
class BaselineResult:
    pairs: PairTuple
    n_aircraft: int
    fuels: list[float]
    durations: list[float]
    lengths: list[float]
    min_sep_ft: dict[tuple[int, int], float]
    los: dict[float, bool]


# ---------------------------------------------------------------------------
# Closed-form straight-line baseline
# ---------------------------------------------------------------------------


def _pair_min_distance(
    ax: float, ay: float, bx: float, by: float, smax: float
) -> float:
    """min over s in [0, smax] of |(ax, ay) + s*(bx, by)|."""
    bb = bx * bx + by * by
    if bb > 0.0:
        s = -(ax * bx + ay * by) / bb
        s = min(max(s, 0.0), smax)
    else:
        s = 0.0
    return math.hypot(ax + s * bx, ay + s * by)


def run_baseline(pairs: PairTuple, spec: ScenarioSpec) -> BaselineResult:
    """Straight-line optimal flights, closed form, no time stepping.

    All aircraft depart simultaneously at equal speed and are removed upon
    reaching the destination centroid. Pair separations are parameterized by
    distance flown, so they are invariant to the cruise speed.
    """
    airspace = Airspace(spec.cell_radius)
    n = len(pairs)
    origins = [airspace.centroid(o) for o, _ in pairs]
    dests = [airspace.centroid(d) for _, d in pairs]
    lengths = [math.dist(o, d) for o, d in zip(origins, dests)]
    units = [
        ((d[0] - o[0]) / L, (d[1] - o[1]) / L)
        for o, d, L in zip(origins, dests, lengths)
    ]
    durations = [L / spec.cruise_speed for L in lengths]
    fuels = [t * spec.limits.fuel_rate_cruise for t in durations]

    min_sep: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            ax = origins[i][0] - origins[j][0]
            ay = origins[i][1] - origins[j][1]
            bx = units[i][0] - units[j][0]
            by = units[i][1] - units[j][1]
            smax = min(lengths[i], lengths[j])
            min_sep[(i, j)] = m_to_ft(_pair_min_distance(ax, ay, bx, by, smax))

    los = {
        th: any(sep < th for sep in min_sep.values())
        for th in spec.monitor_thresholds_ft
    }
    return BaselineResult(pairs, n, fuels, durations, lengths, min_sep, los)


def run_baseline_set(pairs_list: Sequence[PairTuple], spec: ScenarioSpec) -> dict:
    """Vectorized baseline over a whole scenario set (equal aircraft count).

    Returns arrays keyed by: ``lengths`` (n, k), ``durations``, ``fuels``,
    ``total_fuel`` (n,), ``min_sep_ft`` (n, k*(k-1)/2) and ``los`` mapping each
    monitor threshold to a boolean array.
    """
    airspace = Airspace(spec.cell_radius)
    n = len(pairs_list)
    if n == 0:
        return {
            "lengths": np.zeros((0, 0)),
            "durations": np.zeros((0, 0)),
            "fuels": np.zeros((0, 0)),
            "total_fuel": np.zeros(0),
            "min_sep_ft": np.zeros((0, 0)),
            "los": {th: np.zeros(0, dtype=bool) for th in spec.monitor_thresholds_ft},
        }
    k = len(pairs_list[0])
    centroids = {c: airspace.centroid(c) for c in range(7, 19)}
    orig = np.empty((n, k, 2))
    dest = np.empty((n, k, 2))
    for idx, pairs in enumerate(pairs_list):
        for a, (o, d) in enumerate(pairs):
            orig[idx, a] = centroids[o]
            dest[idx, a] = centroids[d]
    lengths = np.linalg.norm(dest - orig, axis=2)
    units = (dest - orig) / lengths[:, :, None]
    durations = lengths / spec.cruise_speed
    fuels = durations * spec.limits.fuel_rate_cruise

    pair_cols = [(i, j) for i in range(k) for j in range(i + 1, k)]
    min_sep = np.empty((n, len(pair_cols)))
    for col, (i, j) in enumerate(pair_cols):
        A = orig[:, i] - orig[:, j]
        B = units[:, i] - units[:, j]
        smax = np.minimum(lengths[:, i], lengths[:, j])
        bb = np.einsum("nd,nd->n", B, B)
        ab = np.einsum("nd,nd->n", A, B)
        s = np.where(bb > 0.0, -ab / np.where(bb > 0.0, bb, 1.0), 0.0)
        s = np.clip(s, 0.0, smax)
        closest = A + s[:, None] * B
        min_sep[:, col] = np.sqrt(np.einsum("nd,nd->n", closest, closest))
    min_sep_ft = min_sep / 0.3048
    los = {
        th: (min_sep_ft < th).any(axis=1) for th in spec.monitor_thresholds_ft
    }
    return {
        "lengths": lengths,
        "durations": durations,
        "fuels": fuels,
        "total_fuel": fuels.sum(axis=1),
        "min_sep_ft": min_sep_ft,
        "pair_columns": pair_cols,
        "los": los,
    }


# ---------------------------------------------------------------------------
# Closed-loop / open-loop integration
# ---------------------------------------------------------------------------


class _DecisionCtx:
    """Lazy advisory surface handed to a mission controller at one tick.

    Point queries (alert, resume heading check, descent check) are answered
    without sweeping the full band grid; a full sweep happens only when a
    resolution is actually requested.
    """

    __slots__ = ("sim", "own", "suppressed_tracks", "all_tracks", "in_conflict", "t")

    def __init__(
        self,
        sim: "_Simulation",
        own: Track,
        tracks: list[Track],
        all_tracks: list[Track],
        in_conflict: bool,
        t: float,
    ):
        self.sim = sim
        self.own = own
        self.suppressed_tracks = tracks
        self.all_tracks = all_tracks
        self.in_conflict = in_conflict
        self.t = t

    def alert_avoid(self) -> bool:
        return self.in_conflict

    def clear_of_conflict(self) -> bool:
        return self.sim.trackers[self.own.aircraft_id].is_clear(self.t)

    def _vs_candidates(self, preferred_vs_fpm: float) -> list[float]:
        """Upward levels in trial order: the held maneuver level first.

        Downgrading an established climb halves the rate at which vertical
        separation builds, exactly when it is being counted on, so the held
        level outranks smaller clear ones.
        """
        spec = self.sim.spec
        out = []
        if preferred_vs_fpm > 0.0:
            out.append(preferred_vs_fpm)
        out += [lv for lv in sorted(spec.vs_levels) if lv > 0.0 and lv != preferred_vs_fpm]
        return out

    def _joint_clear(self, heading_deg: float, vs_fpm: float) -> bool:
        """Conflict check of a (heading, vertical speed) command as a pair.

        Heading bands are swept at the current vertical rate and vertical
        levels at the current course; a command changing both at once must
        be verified jointly or corner cases slip between the two marginal
        evaluations.
        """
        spec = self.sim.spec
        own = self.own if vs_fpm == self.own.vs_fpm else replace(self.own, vs_fpm=vs_fpm)
        return not candidate_conflict(
            own,
            self.suppressed_tracks,
            self.sim.gth,
            spec.limits,
            heading_deg,
            dims=spec.dims,
            transient_dt=spec.band_transient_dt,
        )

    def resolve(
        self, preferred_deg: float, current_deg: float, preferred_vs_fpm: float = 0.0
    ) -> GuidanceCommand:
        spec = self.sim.spec
        gth = self.sim.gth
        # Fast path: when the preferred command itself is clear,
        # select_resolution would return it unchanged, so the full band sweep
        # is only needed once the preferred command is conflicted.
        if spec.dims == "3d":
            for lv in self._vs_candidates(preferred_vs_fpm) + [0.0]:
                if self._joint_clear(preferred_deg, lv):
                    return GuidanceCommand(preferred_deg % 360.0, lv)
        elif self.heading_is_clear(preferred_deg):
            return GuidanceCommand(preferred_deg % 360.0, 0.0)
        # Two-tier resolution: prefer candidates clear on the wide stability
        # horizon; if everything is conflicted there (a sandwich between
        # far-horizon threats), accept candidates that at least clear the
        # alerting lookahead. When even that saturates, a violation is
        # typically already in progress and holding heading would prolong
        # it, so recovery guidance picks the fastest way out instead.
        cmd = None
        for factor in (None, 1.0):
            kwargs = {} if factor is None else {"horizon_factor": factor}
            advisory = compute_bands(
                self.own,
                self.suppressed_tracks,
                gth,
                spec.limits,
                dims=spec.dims,
                vs_levels=spec.vs_levels,
                transient_dt=spec.band_transient_dt,
                **kwargs,
            )
            cmd = select_resolution(
                advisory, preferred_deg, dims=spec.dims, current_heading_deg=current_deg
            )
            if not cmd.saturated:
                if spec.dims != "3d":
                    return cmd
                # joint verification of the selected pair, held level first
                for lv in self._vs_candidates(preferred_vs_fpm) + [cmd.target_vs_fpm, 0.0]:
                    if self._joint_clear(cmd.target_heading_deg, lv):
                        return GuidanceCommand(cmd.target_heading_deg, lv)
                # nothing pairs cleanly with this heading; try the next tier
                cmd = GuidanceCommand(cmd.target_heading_deg, cmd.target_vs_fpm, saturated=True)
        recovery = select_recovery(
            self.own,
            self.suppressed_tracks,
            gth,
            spec.limits,
            preferred_deg,
            dims=spec.dims,
            vs_levels=spec.vs_levels,
            raw_thresholds=self.sim.recovery_floor,
        )
        return recovery if not recovery.saturated else cmd

    def heading_is_clear(self, heading_deg: float) -> bool:
        spec = self.sim.spec
        return not candidate_conflict(
            self.own,
            self.suppressed_tracks,
            self.sim.gth,
            spec.limits,
            heading_deg,
            dims=spec.dims,
            transient_dt=spec.band_transient_dt,
        )

    def descent_is_clear(self) -> bool:
        # the return descent is elective, not an avoidance maneuver, so it is
        # vetted against the full traffic picture: priority suppression
        # decides who yields in a conflict, not whether one may be created by
        # diving onto lower-priority traffic that cannot expect it
        spec = self.sim.spec
        return vs_level_clear(
            self.own,
            self.all_tracks,
            self.sim.gth,
            -spec.descent_rate_fpm,
            dims=spec.dims,
        )


class _Simulation:
    """Mutable state of one scenario run; shared by closed- and open-loop."""

    def __init__(self, pairs: PairTuple, spec: ScenarioSpec, collect_events: bool):
        self.spec = spec
        self.pairs = pairs
        self.collect_events = collect_events
        self.gth = spec.guidance_thresholds
        # raw monitors plus one decision step of relative motion: predictions
        # are made against a snapshot, so the other aircraft's simultaneous
        # command is up to one step stale; recovery must not thread the raw
        # threshold tighter than that staleness
        self.recovery_floor = replace(
            spec.thresholds,
            hmd_ft=spec.thresholds.hmd_ft + m_to_ft(2.0 * spec.cruise_speed * spec.dt),
            zthr_ft=spec.thresholds.zthr_ft
            + (spec.limits.max_climb_fpm + spec.limits.max_descent_fpm) / 60.0 * spec.dt,
        )
        self.airspace = Airspace(spec.cell_radius)
        n = len(pairs)
        self.n = n
        self.dest_xy = [self.airspace.centroid(d) for _, d in pairs]
        origin_xy = [self.airspace.centroid(o) for o, _ in pairs]
        self.states: list[AircraftState] = [
            AircraftState(
                x=ox,
                y=oy,
                alt_ft=BASE_ALT_FT,
                heading_deg=bearing_deg((ox, oy), self.dest_xy[i]),
                ground_speed=spec.cruise_speed,
                vs_fpm=0.0,
                fuel_used=0.0,
                time_s=0.0,
            )
            for i, (ox, oy) in enumerate(origin_xy)
        ]
        self.controllers = [
            MissionController(
                i,
                self.dest_xy[i],
                dims=spec.dims,
                base_alt_ft=BASE_ALT_FT,
                descent_rate_fpm=spec.descent_rate_fpm,
            )
            for i in range(n)
        ]
        self.trackers = [CocTracker(spec.coc_hold_s) for _ in range(n)]
        self.commands: list[GuidanceCommand] = [
            GuidanceCommand(self.states[i].heading_deg, 0.0) for i in range(n)
        ]
        # decision ticks are phase-staggered by id: simultaneous symmetric
        # decisions (notably mutual resumes, where each aircraft approves its
        # course against the other's still-diverted snapshot) would otherwise
        # lock equal-speed crossings into an avoid/resume limit cycle; the id
        # stagger is the same deterministic tie-break that orders in-step
        # updates
        self.next_decision = [i * spec.dt for i in range(n)]
        self.active: list[int] = list(range(n))
        self.path_lengths = [0.0] * n
        self.flight_times = [0.0] * n
        self.arrived = [False] * n
        self.events: list[dict] = []
        self.min_sep_m: dict[tuple[int, int], float] = {}
        self.min_sep_gated_m: dict[tuple[int, int], float] = {}
        for i in range(n):
            for j in range(i + 1, n):
                d0 = math.dist(
                    (self.states[i].x, self.states[i].y),
                    (self.states[j].x, self.states[j].y),
                )
                self.min_sep_m[(i, j)] = d0
                dalt0 = abs(self.states[i].alt_ft - self.states[j].alt_ft)
                self.min_sep_gated_m[(i, j)] = (
                    d0 if dalt0 < spec.thresholds.zthr_ft else math.inf
                )
        # conflicts cannot matter beyond this range within one lookahead
        self.conflict_range_m = (
            spec.guidance_thresholds.hmd_m
            + 2.0 * spec.cruise_speed * spec.thresholds.lookahead_s
            + 1.0
        )

    def log(self, event: dict) -> None:
        if self.collect_events:
            self.events.append(event)

    def track_of(self, i: int) -> Track:
        s = self.states[i]
        h = math.radians(s.heading_deg)
        return Track(
            aircraft_id=i,
            x=s.x,
            y=s.y,
            alt_ft=s.alt_ft,
            vx=s.ground_speed * math.sin(h),
            vy=s.ground_speed * math.cos(h),
            vs_fpm=s.vs_fpm,
        )

    def step_conflicts(self, tracks: dict[int, Track], t: float) -> dict[int, bool]:
        """Per-aircraft conflict flags against non-suppressed traffic."""
        spec = self.spec
        flags = {i: False for i in self.active}
        if spec.daa_mode == "off":
            for i in self.active:
                self.trackers[i].update(t, False)
            return flags
        gth = self.gth
        pair_hit: dict[tuple[int, int], bool] = {}
        for ii, i in enumerate(self.active):
            for j in self.active[ii + 1 :]:
                ti, tj = tracks[i], tracks[j]
                if (ti.x - tj.x) ** 2 + (ti.y - tj.y) ** 2 > self.conflict_range_m**2:
                    pair_hit[(i, j)] = pair_hit[(j, i)] = False
                elif spec.dims == "3d":
                    # the vertical envelope is seat-dependent: own commitment
                    # versus the other's reachable altitudes
                    pair_hit[(i, j)] = conflict_within(ti, tj, gth, dims="3d")
                    pair_hit[(j, i)] = conflict_within(tj, ti, gth, dims="3d")
                else:
                    pair_hit[(i, j)] = pair_hit[(j, i)] = conflict_within(ti, tj, gth, dims="2d")
        extr = spec.extrinsic
        for i in self.active:
            hit = False
            for j in self.active:
                if i == j:
                    continue
                if extr and j >= i:  # lower-priority intruders are suppressed
                    continue
                if pair_hit[(i, j)]:
                    hit = True
                    break
            flags[i] = hit
            self.trackers[i].update(t, hit)
        return flags

    def decide_due(self, tracks: dict[int, Track], flags: dict[int, bool], t: float) -> list[dict]:
        spec = self.spec
        tick_events: list[dict] = []
        for i in self.active:
            if t < self.next_decision[i]:
                continue
            ctlr = self.controllers[i]
            own = tracks[i]
            others = [tracks[j] for j in self.active if j != i]
            suppressed = apply_priority_suppression(i, others, spec.extrinsic)
            ctx = _DecisionCtx(self, own, suppressed, others, flags[i], t)
            cmd, events = ctlr.decide(self.states[i], ctx, t)
            if cmd != self.commands[i]:
                self.log(
                    {
                        "t": t,
                        "aircraft": i,
                        "event": "command",
                        "heading": cmd.target_heading_deg,
                        "vs": cmd.target_vs_fpm,
                        "saturated": cmd.saturated,
                    }
                )
            self.commands[i] = cmd
            for ev in events:
                self.log(ev)
            tick_events.extend(events)
            period = (
                spec.decision_period_avoid
                if ctlr.mode == MODE_AVOID
                else spec.decision_period_cruise
            )
            self.next_decision[i] = t + period
        return tick_events

    def integrate(self, t_new: float) -> None:
        spec = self.spec
        prev = {i: self.states[i] for i in self.active}
        for i in self.active:
            new = step_state(self.states[i], self.commands[i], spec.dt, spec.limits)
            if not (math.isfinite(new.x) and math.isfinite(new.y) and math.isfinite(new.alt_ft)):
                raise EngineError(f"non-finite state for aircraft {i} at t={t_new}")
            self.states[i] = new
            self.path_lengths[i] += spec.cruise_speed * spec.dt
            self.flight_times[i] = t_new
        self._update_monitors(prev)

    def _update_monitors(self, prev: dict[int, AircraftState]) -> None:
        zthr = self.spec.thresholds.zthr_ft
        act = self.active
        for ii, i in enumerate(act):
            for j in act[ii + 1 :]:
                pi0, pj0 = prev[i], prev[j]
                pi1, pj1 = self.states[i], self.states[j]
                ax = pi0.x - pj0.x
                ay = pi0.y - pj0.y
                bx = (pi1.x - pj1.x) - ax
                by = (pi1.y - pj1.y) - ay
                key = (i, j) if i < j else (j, i)
                bb = bx * bx + by * by
                tau = 0.0
                if bb > 0.0:
                    tau = min(max(-(ax * bx + ay * by) / bb, 0.0), 1.0)
                dmin = math.hypot(ax + tau * bx, ay + tau * by)
                if dmin < self.min_sep_m[key]:
                    self.min_sep_m[key] = dmin
                # vertical gate: minimum over the sub-interval where the
                # altitude difference stays inside zthr
                da0 = pi0.alt_ft - pj0.alt_ft
                da1 = pi1.alt_ft - pj1.alt_ft
                lo, hi = self._vertical_window(da0, da1, zthr)
                if lo is not None:
                    taug = min(max(tau, lo), hi)
                    dg = math.hypot(ax + taug * bx, ay + taug * by)
                    if dg < self.min_sep_gated_m[key]:
                        self.min_sep_gated_m[key] = dg

    @staticmethod
    def _vertical_window(da0: float, da1: float, zthr: float) -> tuple[float | None, float | None]:
        """Sub-interval of [0, 1] where |da0 + tau*(da1-da0)| < zthr."""
        slope = da1 - da0
        if slope == 0.0:
            return (0.0, 1.0) if abs(da0) < zthr else (None, None)
        t1 = (-zthr - da0) / slope
        t2 = (zthr - da0) / slope
        lo, hi = (t1, t2) if t1 <= t2 else (t2, t1)
        lo = max(lo, 0.0)
        hi = min(hi, 1.0)
        if lo >= hi:
            return (None, None)
        return (lo, hi)

    def retire_arrivals(self, t: float) -> None:
        spec = self.spec
        still = []
        for i in self.active:
            s = self.states[i]
            dist = math.dist((s.x, s.y), self.dest_xy[i])
            alt_ok = spec.dims == "2d" or abs(s.alt_ft - BASE_ALT_FT) <= 50.0
            if dist <= spec.capture_radius_m and alt_ok:
                credit_t = dist / spec.cruise_speed
                self.states[i] = replace(
                    s,
                    fuel_used=s.fuel_used + credit_t * spec.limits.fuel_rate_cruise,
                )
                self.path_lengths[i] += dist
                self.flight_times[i] = t + credit_t
                self.arrived[i] = True
                self.controllers[i].mark_done()
                self.log({"t": t, "aircraft": i, "event": "arrived"})
            else:
                still.append(i)
        self.active = still


def _run(pairs: PairTuple, spec: ScenarioSpec, collect_events: bool, open_loop: bool):
    sim = _Simulation(pairs, spec, collect_events)
    n_steps = int(round(spec.timeout_s / spec.dt))
    stop_reason = "complete"
    stopped_t = 0.0
    step = 0
    while sim.active and step < n_steps:
        t = step * spec.dt
        tracks = {i: sim.track_of(i) for i in sim.active}
        flags = sim.step_conflicts(tracks, t)
        tick_events = sim.decide_due(tracks, flags, t)
        if open_loop and any(ev.get("event") == "maneuver_end" for ev in tick_events):
            stop_reason = "coc"
            stopped_t = t
            break
        sim.integrate((step + 1) * spec.dt)
        sim.retire_arrivals((step + 1) * spec.dt)
        step += 1
    else:
        if sim.active:
            stop_reason = "timeout"
            stopped_t = step * spec.dt
            sim.log({"t": stopped_t, "event": "timeout", "pending": list(sim.active)})
        else:
            stopped_t = max(sim.flight_times) if sim.flight_times else 0.0
    return sim, stop_reason, stopped_t


def run_closed_loop(
    pairs: PairTuple, spec: ScenarioSpec, *, collect_events: bool = True
) -> ScenarioResult:
    """Integrate a scenario to completion or timeout; never raises for
    in-run numeric trouble (an error result is returned instead)."""
    t0 = time.perf_counter()
    try:
        sim, stop_reason, _ = _run(pairs, spec, collect_events, open_loop=False)
        timeout = stop_reason == "timeout"
        return _closed_result(sim, timeout, time.perf_counter() - t0)
    except Exception as exc:  # noqa: BLE001 - batch isolation by contract
        return ScenarioResult(
            pairs=pairs,
            n_aircraft=len(pairs),
            fuels=[math.nan] * len(pairs),
            flight_times=[math.nan] * len(pairs),
            path_lengths=[math.nan] * len(pairs),
            deviations=[0] * len(pairs),
            arrived=[False] * len(pairs),
            min_sep_ft={},
            min_sep_gated_ft={},
            los={th: False for th in spec.monitor_thresholds_ft},
            los_ungated={th: False for th in spec.monitor_thresholds_ft},
            timeout=False,
            wall_clock_s=time.perf_counter() - t0,
            error=f"{type(exc).__name__}: {exc}",
        )


def _closed_result(sim: _Simulation, timeout: bool, wall: float) -> ScenarioResult:
    spec = sim.spec
    min_sep_ft = {k: m_to_ft(v) for k, v in sim.min_sep_m.items()}
    min_gated_ft = {k: m_to_ft(v) if math.isfinite(v) else math.inf for k, v in sim.min_sep_gated_m.items()}
    if spec.dims == "2d":
        min_gated_ft = dict(min_sep_ft)
    los_gated = {
        th: any(v < th for v in min_gated_ft.values())
        for th in spec.monitor_thresholds_ft
    }
    los_ungated = {
        th: any(v < th for v in min_sep_ft.values())
        for th in spec.monitor_thresholds_ft
    }
    return ScenarioResult(
        pairs=sim.pairs,
        n_aircraft=sim.n,
        fuels=[s.fuel_used for s in sim.states],
        flight_times=list(sim.flight_times),
        path_lengths=list(sim.path_lengths),
        deviations=[len(c.records) for c in sim.controllers],
        arrived=list(sim.arrived),
        min_sep_ft=min_sep_ft,
        min_sep_gated_ft=min_gated_ft,
        los=los_gated,
        los_ungated=los_ungated,
        timeout=timeout,
        wall_clock_s=wall,
        events=sim.events,
    )


def run_open_loop(
    pairs: PairTuple, spec: ScenarioSpec, *, collect_events: bool = True
) -> OpenLoopResult:
    """Identical integration to the closed loop, but the run halts at the
    first maneuver that ends with its aircraft individually clear of
    conflict. Conflict-free scenarios run to completion with zero maneuvers."""
    t0 = time.perf_counter()
    try:
        sim, stop_reason, stopped_t = _run(pairs, spec, collect_events, open_loop=True)
        deltas = []
        for ctlr in sim.controllers:
            if ctlr.records:
                first = ctlr.records[0]
                d = abs(sim.states[ctlr.aircraft_id].heading_deg - first.start_heading_deg) % 360.0
                deltas.append(min(d, 360.0 - d))
        return OpenLoopResult(
            pairs=pairs,
            stopped_time_s=stopped_t,
            stop_reason=stop_reason,
            distance_flown_m=sum(sim.path_lengths),
            maneuvers_started=sum(len(c.records) for c in sim.controllers),
            heading_deltas_deg=deltas,
            timeout=stop_reason == "timeout",
            wall_clock_s=time.perf_counter() - t0,
            events=sim.events,
        )
    except Exception as exc:  # noqa: BLE001
        return OpenLoopResult(
            pairs=pairs,
            stopped_time_s=0.0,
            stop_reason="error",
            distance_flown_m=math.nan,
            maneuvers_started=0,
            heading_deltas_deg=[],
            timeout=False,
            wall_clock_s=time.perf_counter() - t0,
            error=f"{type(exc).__name__}: {exc}",
        )
