"""Reference well-clear engine: conflict prediction, bands, alerting.

This is the in-repo implementation behind the pluggable DAA interface
(tracks in, advisory out). Conflict detection is straight-line closest point
of approach: a pair is in conflict when the current horizontal range is
inside the horizontal miss-distance threshold, or the predicted miss distance
falls inside it within the lookahead. In 3D each clause is additionally gated
on vertical separation at its critical time.

Heading bands are computed on a 1-degree grid. Each candidate heading is
evaluated by simulating a maximum-rate turn onto it (the turn transient can
itself create conflicts) followed by straight flight; the turn arc is closed
form, sampled every ``transient_dt`` seconds, and the post-turn leg uses the
exact CPA test for the remaining lookahead. Evaluating the current heading
degenerates to the plain straight-line conflict test, so the current-heading
band label and the alert level agree exactly.

Vertical-speed bands are evaluated on a small grid of commanded levels; only
the vertical gate varies between levels because a vertical-speed change does
not alter the horizontal geometry.

All distances here are meters internally; thresholds arrive in feet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import ft_to_m
from .dynamics import (
    BASE_ALT_FT,
    GuidanceCommand,
    PerformanceLimits,
    signed_heading_delta,
    wrap_heading,
)

DEFAULT_VS_LEVELS_FPM = (-1000.0, -500.0, 0.0, 500.0, 1000.0, 2000.0)

# Bands are painted against a wider horizon than the alerting lookahead so
# that no candidate near the current heading can sit marginally clear at the
# moment an alert fires (the alert pins the entry time exactly at the
# lookahead boundary; a deeper band horizon removes that cliff from the
# resolution search). Resolutions therefore either achieve the full miss
# distance or push the violation well beyond the alerting horizon.
RESOLUTION_HORIZON_FACTOR = 2.0

ALERT_NONE = "none"
ALERT_CAUTION = "caution"
ALERT_AVOID = "avoid"

STATUS_SUPPRESSED = "suppressed"
STATUS_CLEAR = "clear"
STATUS_THREAT = "threat"

LABEL_CLEAR = "clear"
LABEL_CONFLICT = "conflict"


@dataclass(frozen=True)
class Track:
    aircraft_id: int
    x: float
    y: float
    alt_ft: float
    vx: float  # m/s east
    vy: float  # m/s north
    vs_fpm: float = 0.0

    @property
    def ground_speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def heading_deg(self) -> float:
        if self.vx == 0.0 and self.vy == 0.0:
            return 0.0
        return wrap_heading(math.degrees(math.atan2(self.vx, self.vy)))


@dataclass(frozen=True)
class SeparationThresholds:
    hmd_ft: float = 4000.0
    zthr_ft: float = 450.0  # vertical gate, 3D only
    lookahead_s: float = 60.0

    @property
    def hmd_m(self) -> float:
        return ft_to_m(self.hmd_ft)


@dataclass(frozen=True)
class Advisory:
    alert: str
    heading_bands: tuple[tuple[float, float, str], ...]  # (start, end, label), end-exclusive
    vs_bands: tuple[tuple[float, float, str], ...]  # (lo, hi, label) over the vs envelope
    vs_level_labels: tuple[tuple[float, str], ...]  # grid level -> label
    clear_of_conflict: bool
    per_intruder_status: dict[int, str] = field(default_factory=dict)


def time_to_cpa(sx: float, sy: float, vx: float, vy: float) -> float:
    """Time of closest approach for relative position s and velocity v.

    max(0, -(s.v)/|v|^2); 0 when the relative speed is zero (non-closing
    degenerate case, defined rather than raised).
    """
    vv = vx * vx + vy * vy
    if vv <= 0.0:
        return 0.0
    return max(0.0, -(sx * vx + sy * vy) / vv)


def predicted_hmd(sx: float, sy: float, vx: float, vy: float) -> float:
    """Predicted horizontal miss distance |s + v*tcpa|; never exceeds |s|."""
    t = time_to_cpa(sx, sy, vx, vy)
    return math.hypot(sx + vx * t, sy + vy * t)


def detect_conflict(
    own: Track,
    intruder: Track,
    thresholds: SeparationThresholds,
    *,
    dims: str = "2d",
) -> bool:
    """Straight-line conflict test, symmetric in its two arguments.

    Fires when the pair is currently inside the horizontal threshold, or the
    predicted miss distance is inside it with CPA within the lookahead. In 3D
    each clause requires vertical separation below ``zthr`` at its critical
    time (now, respectively CPA).
    """
    sx = intruder.x - own.x
    sy = intruder.y - own.y
    vx = intruder.vx - own.vx
    vy = intruder.vy - own.vy
    hmd = thresholds.hmd_m
    dalt = intruder.alt_ft - own.alt_ft
    dvs = (intruder.vs_fpm - own.vs_fpm) / 60.0  # ft/s

    if math.hypot(sx, sy) < hmd:
        if dims == "2d" or abs(dalt) < thresholds.zthr_ft:
            return True
    t = time_to_cpa(sx, sy, vx, vy)
    if t <= thresholds.lookahead_s:
        if math.hypot(sx + vx * t, sy + vy * t) < hmd:
            if dims == "2d" or abs(dalt + dvs * t) < thresholds.zthr_ft:
                return True
    return False


def _horizontal_violation_window(
    sx: float, sy: float, vx: float, vy: float, hmd: float
) -> tuple[float, float] | None:
    """Time interval during which straight-line horizontal range is < hmd.

    Returns None when the paths never come that close; the interval may
    start negative (already inside, or entered in the past).
    """
    vv = vx * vx + vy * vy
    if vv <= 0.0:
        return (-math.inf, math.inf) if sx * sx + sy * sy < hmd * hmd else None
    tcpa = -(sx * vx + sy * vy) / vv
    cx = sx + vx * tcpa
    cy = sy + vy * tcpa
    gap2 = hmd * hmd - (cx * cx + cy * cy)
    if gap2 <= 0.0:
        return None
    half = math.sqrt(gap2 / vv)
    return (tcpa - half, tcpa + half)


def _vertical_proximity_window(
    dalt: float, dvs_ft_s: float, zthr: float
) -> tuple[float, float] | None:
    """Time interval during which |dalt + dvs*t| < zthr (unclamped profiles)."""
    if dvs_ft_s == 0.0:
        return (-math.inf, math.inf) if abs(dalt) < zthr else None
    t1 = (-zthr - dalt) / dvs_ft_s
    t2 = (zthr - dalt) / dvs_ft_s
    return (t1, t2) if t1 <= t2 else (t2, t1)


def _clamp_time(alt: float, vs_ft_s: float, base_ft: float) -> float:
    """Time at which a descending profile reaches the base-altitude floor."""
    if vs_ft_s >= 0.0:
        return math.inf
    if alt <= base_ft:
        return 0.0
    return (alt - base_ft) / (-vs_ft_s)


def shift_vertical(alt: float, vs_ft_s: float, t: float, base_ft: float) -> tuple[float, float]:
    """Altitude and effective rate after t seconds, respecting the floor."""
    tc = _clamp_time(alt, vs_ft_s, base_ft)
    if t >= tc:
        return base_ft, 0.0
    return alt + vs_ft_s * t, vs_ft_s


def _interval_linear_below(c0: float, slope: float, t0: float, t1: float) -> tuple[float, float] | None:
    """Sub-interval of [t0, t1] where c0 + slope*(t - t0) < 0."""
    if slope == 0.0:
        return (t0, t1) if c0 < 0.0 else None
    crossing = t0 - c0 / slope
    if slope < 0.0:
        lo = max(t0, crossing)
        return (lo, t1) if lo <= t1 else None
    hi = min(t1, crossing)
    return (t0, hi) if t0 <= hi else None


def _vertical_proximity_windows(
    own_alt: float,
    own_vs_ft_s: float,
    intr_alt: float,
    intr_vs_ft_s: float,
    zthr: float,
    base_ft: float,
) -> list[tuple[float, float]]:
    """Future intervals where the intruder's reachable altitude band comes
    within ``zthr`` of the ownship's commanded profile.

    The ownship profile is a commitment (linear, leveling off at the base
    floor). The intruder's vertical intent is not observable beyond its
    current rate: a climber may level off anytime, a descender likewise, so
    the intruder occupies the envelope between its present altitude and the
    altitude its current rate reaches (floored at base). Crossing through
    that envelope is what turns simultaneous uncoordinated vertical
    maneuvers into collisions, so it counts as proximity even though the
    straight-line extrapolations themselves would miss each other.
    """
    c_own = _clamp_time(own_alt, own_vs_ft_s, base_ft)
    c_int = _clamp_time(intr_alt, intr_vs_ft_s, base_ft)
    breaks = sorted({0.0} | {c for c in (c_own, c_int) if math.isfinite(c) and c > 0.0})
    out: list[tuple[float, float]] = []
    horizon_cap = 36000.0  # far beyond any horizon actually queried
    for idx, t0 in enumerate(breaks):
        t1 = breaks[idx + 1] if idx + 1 < len(breaks) else horizon_cap
        if t1 <= t0:
            continue
        o_alt, o_rate = shift_vertical(own_alt, own_vs_ft_s, t0, base_ft)
        i_alt, i_rate = shift_vertical(intr_alt, intr_vs_ft_s, t0, base_ft)
        # intruder envelope boundaries within this segment
        hi_alt0, hi_rate = (i_alt, i_rate) if i_rate > 0.0 else (i_alt, 0.0)
        lo_alt0, lo_rate = (i_alt, i_rate) if i_rate < 0.0 else (i_alt, 0.0)
        # own below the envelope top + zthr:  o - hi - zthr < 0
        w_top = _interval_linear_below(o_alt - hi_alt0 - zthr, o_rate - hi_rate, t0, t1)
        if w_top is None:
            continue
        # own above the envelope bottom - zthr:  lo - o - zthr < 0
        w_bot = _interval_linear_below(lo_alt0 - o_alt - zthr, lo_rate - o_rate, t0, t1)
        if w_bot is None:
            continue
        lo = max(w_top[0], w_bot[0])
        hi = min(w_top[1], w_bot[1])
        if lo <= hi:
            if out and lo <= out[-1][1] + 1e-9:
                out[-1] = (out[-1][0], max(out[-1][1], hi))
            else:
                out.append((lo, hi))
    return out


def conflict_within(
    own: Track,
    intruder: Track,
    thresholds: SeparationThresholds,
    *,
    dims: str = "2d",
    horizon_s: float | None = None,
    base_alt_ft: float = BASE_ALT_FT,
) -> bool:
    """Conflict test over the violation *interval* within the horizon.

    Where ``detect_conflict`` asks whether the closest approach falls inside
    the lookahead, this asks whether a violation is in progress anywhere
    inside it: the horizontal sub-threshold window must overlap [0, horizon]
    and, in 3D, a window of vertical proximity (with descents leveling off at
    the base altitude). Two properties make this the alerting and
    band-evaluation test of the scenario engine:

    * the violation entry time moves smoothly with small heading changes,
      while the CPA time can jump across the lookahead boundary under a
      one-degree turn at shallow crossing angles, which would let
      ineffective resolutions masquerade as clear;
    * gating the vertical dimension at the CPA instant alone would approve
      climbs that gain altitude by CPA yet cross the horizontal threshold
      long before the vertical gap opens.
    """
    horizon = thresholds.lookahead_s if horizon_s is None else horizon_s
    sx = intruder.x - own.x
    sy = intruder.y - own.y
    window = _horizontal_violation_window(
        sx, sy, intruder.vx - own.vx, intruder.vy - own.vy, thresholds.hmd_m
    )
    if window is None:
        return False
    lo, hi = max(window[0], 0.0), min(window[1], horizon)
    if lo > hi:
        return False
    if dims == "2d":
        return True
    for v_lo, v_hi in _vertical_proximity_windows(
        own.alt_ft,
        own.vs_fpm / 60.0,
        intruder.alt_ft,
        intruder.vs_fpm / 60.0,
        thresholds.zthr_ft,
        base_alt_ft,
    ):
        if max(lo, v_lo) <= min(hi, v_hi):
            return True
    return False


def apply_priority_suppression(
    own_id: int, tracks: Sequence[Track], extrinsic: bool
) -> list[Track]:
    """With extrinsic priorities, drop intruders ranked below the ownship.

    Priority is -aircraft_id: id 0 outranks everyone and therefore never
    alerts. Without extrinsic priorities the track list passes through.
    """
    if not extrinsic:
        return list(tracks)
    return [t for t in tracks if t.aircraft_id < own_id]


def coc_hysteresis(history: Sequence[tuple[float, bool]], hold_s: float) -> bool:
    """Clear-of-conflict after ``hold_s`` continuous seconds without conflict.

    ``history`` is (time, in_conflict) samples in ascending time order; the
    verdict applies at the last sample's time. Reference semantics for the
    stateful tracker used inside scenario runs.
    """
    if not history:
        return True
    now, current = history[-1]
    if current:
        return False
    last_conflict = -math.inf
    for t, flag in history:
        if flag:
            last_conflict = t
    return (now - last_conflict) >= hold_s


class CocTracker:
    """Incremental form of ``coc_hysteresis`` for one aircraft in one run."""

    def __init__(self, hold_s: float):
        self.hold_s = hold_s
        self._last_conflict = -math.inf
        self._current = False

    def update(self, t: float, in_conflict: bool) -> bool:
        self._current = in_conflict
        if in_conflict:
            self._last_conflict = t
        return self.is_clear(t)

    def is_clear(self, t: float) -> bool:
        return (not self._current) and (t - self._last_conflict) >= self.hold_s


# ---------------------------------------------------------------------------
# Band computation
# ---------------------------------------------------------------------------


def _merge_bands(labels: np.ndarray) -> tuple[tuple[float, float, str], ...]:
    """Merge a circular 1-degree label grid into labeled intervals.

    Intervals are (start, end, label) with the end exclusive; an interval
    whose end is numerically <= its start wraps through north.
    """
    if bool(np.all(labels == labels[0])):
        return ((0.0, 360.0, LABEL_CONFLICT if labels[0] else LABEL_CLEAR),)
    changes = [int(i) for i in np.nonzero(labels != np.roll(labels, 1))[0]]
    bands: list[tuple[float, float, str]] = []
    for idx, start in enumerate(changes):
        end = changes[(idx + 1) % len(changes)]
        lab = LABEL_CONFLICT if labels[start] else LABEL_CLEAR
        bands.append((float(start), float(end), lab))
    return tuple(bands)


def heading_label(advisory: Advisory, heading_deg: float) -> str:
    """Band label covering a heading (intervals may wrap through north)."""
    h = wrap_heading(heading_deg)
    for s, e, lab in advisory.heading_bands:
        if e > s:
            if s <= h < e:
                return lab
        else:  # wraps through 0
            if h >= s or h < e:
                return lab
    return LABEL_CLEAR


def _turn_positions(
    x0: float,
    y0: float,
    h0_rad: float,
    speed: float,
    turn_sign: np.ndarray,
    rate_rad: float,
    times: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form arc positions during a constant-rate turn.

    ``turn_sign`` is per-candidate (+1 clockwise); ``times`` broadcasts
    against it. Valid only while t <= turn duration for that candidate.
    """
    w = turn_sign * rate_rad
    theta = h0_rad + w * times
    x = x0 + speed / w * (np.cos(h0_rad) - np.cos(theta))
    y = y0 + speed / w * (np.sin(theta) - np.sin(h0_rad))
    return x, y


def compute_bands(
    own: Track,
    intruders: Sequence[Track],
    thresholds: SeparationThresholds,
    limits: PerformanceLimits,
    *,
    dims: str = "2d",
    vs_levels: Sequence[float] = DEFAULT_VS_LEVELS_FPM,
    transient_dt: float = 1.0,
    horizon_factor: float = RESOLUTION_HORIZON_FACTOR,
) -> Advisory:
    """Heading and vertical-speed guidance bands against the given intruders.

    The intruder list must already have priority suppression applied.
    ``horizon_factor`` scales the band horizon relative to the alerting
    lookahead; the scenario engine retries a saturated advisory at factor 1
    (immediate threats only) before falling back to holding heading.

    Alert level: ``avoid`` when straight flight violates separation within
    the alerting lookahead (entry-time test), ``caution`` when a conflict
    band exists anywhere on the resolution horizon, ``none`` otherwise. A
    conflict band can therefore cover the current heading while the alert is
    still ``caution``: the threat is real but not yet inside the alerting
    horizon.
    """
    threat_now = {
        t.aircraft_id: conflict_within(own, t, thresholds, dims=dims) for t in intruders
    }
    current_conflict = any(threat_now.values())

    if not intruders:
        labels = np.zeros(360, dtype=bool)
    else:
        labels = _sweep_headings(
            own, intruders, thresholds, limits, dims, transient_dt, horizon_factor
        )

    vs_level_labels = _sweep_vs_levels(own, intruders, thresholds, dims, vs_levels, horizon_factor)

    any_conflict_band = bool(labels.any())
    if current_conflict:
        alert = ALERT_AVOID
    elif any_conflict_band:
        alert = ALERT_CAUTION
    else:
        alert = ALERT_NONE

    status = {
        aid: (STATUS_THREAT if hit else STATUS_CLEAR) for aid, hit in threat_now.items()
    }
    return Advisory(
        alert=alert,
        heading_bands=_merge_bands(labels),
        vs_bands=_vs_intervals(vs_levels, vs_level_labels),
        vs_level_labels=vs_level_labels,
        clear_of_conflict=not current_conflict,
        per_intruder_status=status,
    )


def _sweep_headings(
    own: Track,
    intruders: Sequence[Track],
    thresholds: SeparationThresholds,
    limits: PerformanceLimits,
    dims: str,
    transient_dt: float,
    horizon_factor: float = RESOLUTION_HORIZON_FACTOR,
) -> np.ndarray:
    """Conflict label per 1-degree candidate heading (vectorized)."""
    hmd = thresholds.hmd_m
    zthr = thresholds.zthr_ft
    look = thresholds.lookahead_s
    speed = own.ground_speed
    h0 = own.heading_deg
    h0_rad = math.radians(h0)
    rate = limits.max_turn_rate_dps

    candidates = np.arange(360.0)
    delta = (candidates - h0) % 360.0
    delta = np.where(delta > 180.0, delta - 360.0, delta)  # (-180, 180], tie at +180
    delta = np.where(delta == -180.0, 180.0, delta)
    turn_sign = np.where(delta >= 0.0, 1.0, -1.0)
    t_turn = np.abs(delta) / rate
    rate_rad = math.radians(rate)

    labels = np.zeros(360, dtype=bool)

    # Turn transient: sample every arc at once; a candidate is only live for
    # samples earlier than its own turn duration.
    max_turn = float(min(t_turn.max(), look))
    n_samples = int(max_turn / transient_dt) + 1
    times = (np.arange(n_samples) * transient_dt)[:, None]  # (m, 1)
    active = times < t_turn[None, :]  # (m, 360)
    if active.any():
        ox, oy = _turn_positions(own.x, own.y, h0_rad, speed, turn_sign, rate_rad, times)
        for tr in intruders:
            ix = tr.x + tr.vx * times
            iy = tr.y + tr.vy * times
            close = (ox - ix) ** 2 + (oy - iy) ** 2 < hmd * hmd
            if dims == "3d":
                o_alt = np.maximum(BASE_ALT_FT, own.alt_ft + own.vs_fpm / 60.0 * times)
                i_hi = tr.alt_ft + max(tr.vs_fpm, 0.0) / 60.0 * times
                i_lo = np.maximum(BASE_ALT_FT, tr.alt_ft + min(tr.vs_fpm, 0.0) / 60.0 * times)
                close &= (o_alt < i_hi + zthr) & (o_alt > i_lo - zthr)
            labels |= (active & close).any(axis=0)

    # Post-turn straight leg: exact violation-interval test from the turn-end
    # state against the resolution horizon (see ``conflict_within``). A
    # candidate is conflicted when the horizontal sub-threshold window
    # overlaps [0, horizon] after the turn and, in 3D, the vertical proximity
    # window, so clearance demands a genuine geometric resolution rather than
    # nudging the violation marginally past the alerting boundary.
    horizon = horizon_factor * look
    t_end = np.minimum(t_turn, look)
    ex, ey = _turn_positions(own.x, own.y, h0_rad, speed, turn_sign, rate_rad, t_end)
    # delta == 0 gives zero elapsed turn; force the exact start point
    straight = t_turn == 0.0
    ex = np.where(straight, own.x, ex)
    ey = np.where(straight, own.y, ey)
    cand_rad = np.radians(candidates)
    ovx = speed * np.sin(cand_rad)
    ovy = speed * np.cos(cand_rad)
    for tr in intruders:
        sx = (tr.x + tr.vx * t_end) - ex
        sy = (tr.y + tr.vy * t_end) - ey
        vx = tr.vx - ovx
        vy = tr.vy - ovy
        vv = vx * vx + vy * vy
        moving = vv > 0.0
        safe_vv = np.where(moving, vv, 1.0)
        tcpa = np.where(moving, -(sx * vx + sy * vy) / safe_vv, 0.0)
        cx = sx + vx * tcpa
        cy = sy + vy * tcpa
        gap2 = hmd * hmd - (cx * cx + cy * cy)
        half = np.sqrt(np.maximum(gap2, 0.0) / safe_vv)
        inside_now = sx * sx + sy * sy < hmd * hmd
        h_lo = np.where(moving, tcpa - half, np.where(inside_now, -np.inf, np.inf))
        h_hi = np.where(moving, tcpa + half, np.where(inside_now, np.inf, -np.inf))
        has_window = np.where(moving, gap2 > 0.0, inside_now)
        lo = np.maximum(h_lo, 0.0)
        hi = np.minimum(h_hi, horizon)
        if dims == "3d":
            # vertical windows are measured from now; shift into the per-
            # candidate turn-end frame and accept any overlapping piece
            hit = np.zeros(360, dtype=bool)
            for v_lo, v_hi in _vertical_proximity_windows(
                own.alt_ft, own.vs_fpm / 60.0, tr.alt_ft, tr.vs_fpm / 60.0, zthr, BASE_ALT_FT
            ):
                hit |= np.maximum(lo, v_lo - t_end) <= np.minimum(hi, v_hi - t_end)
            labels |= has_window & hit
        else:
            labels |= has_window & (lo <= hi)
    return labels


def _sweep_vs_levels(
    own: Track,
    intruders: Sequence[Track],
    thresholds: SeparationThresholds,
    dims: str,
    vs_levels: Sequence[float],
    horizon_factor: float = RESOLUTION_HORIZON_FACTOR,
) -> tuple[tuple[float, str], ...]:
    """Conflict label per commanded vertical-speed level, current heading held.

    Only the vertical gate varies between levels; labels use the same
    resolution horizon as the heading sweep.
    """
    horizon = horizon_factor * thresholds.lookahead_s
    out: list[tuple[float, str]] = []
    for level in vs_levels:
        conflict = False
        if dims == "3d":
            probe = replace(own, vs_fpm=level)
            conflict = any(
                conflict_within(probe, tr, thresholds, dims="3d", horizon_s=horizon)
                for tr in intruders
            )
        else:
            # 2D: vertical maneuvering is out of the envelope; only level flight
            # is meaningful and it mirrors the horizontal picture.
            if level == 0.0:
                conflict = any(
                    conflict_within(own, tr, thresholds, dims="2d", horizon_s=horizon)
                    for tr in intruders
                )
            else:
                conflict = True
        out.append((float(level), LABEL_CONFLICT if conflict else LABEL_CLEAR))
    return tuple(out)


def _vs_intervals(
    vs_levels: Sequence[float], level_labels: tuple[tuple[float, str], ...]
) -> tuple[tuple[float, float, str], ...]:
    """Partition of the vertical-speed envelope induced by the level grid."""
    levels = sorted(vs_levels)
    bounds = [levels[0]]
    for a, b in zip(levels, levels[1:]):
        bounds.append((a + b) / 2.0)
    bounds.append(levels[-1])
    by_level = dict(level_labels)
    return tuple(
        (bounds[i], bounds[i + 1], by_level[levels[i]]) for i in range(len(levels))
    )


def candidate_conflict(
    own: Track,
    intruders: Sequence[Track],
    thresholds: SeparationThresholds,
    limits: PerformanceLimits,
    heading_deg: float,
    *,
    dims: str = "2d",
    transient_dt: float = 1.0,
    horizon_factor: float = RESOLUTION_HORIZON_FACTOR,
) -> bool:
    """Single-heading version of the band sweep (same semantics, scalar).

    Used for cheap point queries (resume checks) without labeling the whole
    grid; agrees with the grid label of the same candidate heading.
    """
    speed = own.ground_speed
    h0 = own.heading_deg
    delta = signed_heading_delta(h0, heading_deg)
    rate = limits.max_turn_rate_dps
    t_turn = abs(delta) / rate
    look = thresholds.lookahead_s
    hmd = thresholds.hmd_m
    zthr = thresholds.zthr_ft
    sign = 1.0 if delta >= 0.0 else -1.0
    w = sign * math.radians(rate)
    h0_rad = math.radians(h0)

    def own_pos(t: float) -> tuple[float, float]:
        if t <= 0.0 or t_turn == 0.0:
            return (own.x, own.y)
        tt = min(t, t_turn)
        x = own.x + speed / w * (math.cos(h0_rad) - math.cos(h0_rad + w * tt))
        y = own.y + speed / w * (math.sin(h0_rad + w * tt) - math.sin(h0_rad))
        if t > t_turn:
            hd = math.radians(heading_deg)
            x += speed * (t - t_turn) * math.sin(hd)
            y += speed * (t - t_turn) * math.cos(hd)
        return (x, y)

    # turn transient
    k = 0
    while True:
        tk = k * transient_dt
        if tk >= min(t_turn, look):
            break
        ox, oy = own_pos(tk)
        for tr in intruders:
            dx = tr.x + tr.vx * tk - ox
            dy = tr.y + tr.vy * tk - oy
            if dx * dx + dy * dy < hmd * hmd:
                if dims == "2d":
                    return True
                o_alt, _ = shift_vertical(own.alt_ft, own.vs_fpm / 60.0, tk, BASE_ALT_FT)
                i_hi = tr.alt_ft + max(tr.vs_fpm, 0.0) / 60.0 * tk
                i_lo = max(BASE_ALT_FT, tr.alt_ft + min(tr.vs_fpm, 0.0) / 60.0 * tk)
                if i_lo - zthr < o_alt < i_hi + zthr:
                    return True
        k += 1

    # post-turn straight leg against the resolution horizon (see _sweep_headings)
    t_end = min(t_turn, look)
    ex, ey = own_pos(t_end)
    hd = math.radians(heading_deg)
    own_alt, own_vs = shift_vertical(own.alt_ft, own.vs_fpm / 60.0, t_end, BASE_ALT_FT)
    shifted_own = Track(
        own.aircraft_id, ex, ey, own_alt,
        speed * math.sin(hd), speed * math.cos(hd), own_vs * 60.0,
    )
    horizon = horizon_factor * look
    for tr in intruders:
        tr_alt, tr_vs = shift_vertical(tr.alt_ft, tr.vs_fpm / 60.0, t_end, BASE_ALT_FT)
        shifted = replace(
            tr,
            x=tr.x + tr.vx * t_end,
            y=tr.y + tr.vy * t_end,
            alt_ft=tr_alt,
            vs_fpm=tr_vs * 60.0,
        )
        if conflict_within(shifted_own, shifted, thresholds, dims=dims, horizon_s=horizon):
            return True
    return False


def vs_level_clear(
    own: Track,
    intruders: Sequence[Track],
    thresholds: SeparationThresholds,
    level_fpm: float,
    *,
    dims: str = "2d",
) -> bool:
    """True when flying the current heading at the commanded level is clear."""
    horizon = RESOLUTION_HORIZON_FACTOR * thresholds.lookahead_s
    if dims != "3d":
        return level_fpm == 0.0 and not any(
            conflict_within(own, tr, thresholds, dims="2d", horizon_s=horizon)
            for tr in intruders
        )
    probe = replace(own, vs_fpm=level_fpm)
    return not any(
        conflict_within(probe, tr, thresholds, dims="3d", horizon_s=horizon)
        for tr in intruders
    )


# ---------------------------------------------------------------------------
# Resolution selection
# ---------------------------------------------------------------------------


def select_resolution(
    advisory: Advisory,
    preferred_deg: float,
    *,
    dims: str = "2d",
    current_heading_deg: float | None = None,
) -> GuidanceCommand:
    """Clear heading nearest the preferred course; ties break clockwise.

    In 3D, when an upward vertical-speed level is clear (or no clear heading
    exists at all), the smallest clear upward level is commanded alongside.
    With nothing clear in either plane the command holds the current heading
    and is flagged saturated.
    """
    heading = _nearest_clear_heading(advisory, preferred_deg)

    vs_cmd = 0.0
    if dims == "3d":
        up_clear = sorted(
            level
            for level, label in advisory.vs_level_labels
            if level > 0.0 and label == LABEL_CLEAR
        )
        if heading is None or up_clear:
            if up_clear:
                vs_cmd = up_clear[0]

    if heading is None:
        hold = current_heading_deg if current_heading_deg is not None else preferred_deg
        if dims == "3d" and vs_cmd > 0.0:
            return GuidanceCommand(wrap_heading(hold), vs_cmd, saturated=False)
        return GuidanceCommand(wrap_heading(hold), 0.0, saturated=True)
    return GuidanceCommand(heading, vs_cmd, saturated=False)


def select_recovery(
    own: Track,
    intruders: Sequence[Track],
    thresholds: SeparationThresholds,
    limits: PerformanceLimits,
    preferred_deg: float,
    *,
    dims: str = "2d",
    vs_levels: Sequence[float] = DEFAULT_VS_LEVELS_FPM,
    raw_thresholds: SeparationThresholds | None = None,
) -> GuidanceCommand:
    """Least-bad maneuver while guidance-level separation is already violated.

    When every band is conflicted because a violation is in progress, the
    candidates still differ enormously in outcome. A coarse grid of headings
    (and upward levels in 3D) is scored by, in order: whether the candidate
    is predicted to violate the *raw* monitor thresholds at all (the
    guidance margin means many recoveries start inside the buffered volume
    but can still keep the real separation intact), the predicted instant
    the guidance violation ends, the number of fresh conflicts created, and
    angular distance to the preferred course.
    """
    hmd = thresholds.hmd_m
    zthr = thresholds.zthr_ft
    raw = raw_thresholds or thresholds
    threats = []
    others = []
    for tr in intruders:
        inside_h = math.hypot(tr.x - own.x, tr.y - own.y) < hmd
        inside_v = dims == "2d" or abs(tr.alt_ft - own.alt_ft) < zthr
        (threats if inside_h and inside_v else others).append(tr)
    if not threats:
        return GuidanceCommand(wrap_heading(preferred_deg), 0.0, saturated=True)

    speed = own.ground_speed
    rate = limits.max_turn_rate_dps
    levels = [0.0]
    if dims == "3d":
        levels += [lv for lv in sorted(vs_levels) if lv > 0.0]  # up-only recovery

    def pair_overlap_exit(tr, t_end, ovx, ovy, level, h_th_m, z_th_ft):
        """(violates, exit) for one threat under one candidate, post-turn."""
        sx = (tr.x + tr.vx * t_end) - (own.x + (ovx + own.vx) / 2.0 * t_end)
        sy = (tr.y + tr.vy * t_end) - (own.y + (ovy + own.vy) / 2.0 * t_end)
        window = _horizontal_violation_window(sx, sy, tr.vx - ovx, tr.vy - ovy, h_th_m)
        if window is None:
            return False, 0.0
        h_lo, h_hi = max(window[0], 0.0), window[1]
        if h_lo > h_hi:
            return False, 0.0
        if dims != "3d":
            return True, max(h_hi, 0.0)
        own_alt, own_vs = shift_vertical(own.alt_ft, level / 60.0, t_end, BASE_ALT_FT)
        tr_alt, tr_vs = shift_vertical(tr.alt_ft, tr.vs_fpm / 60.0, t_end, BASE_ALT_FT)
        for v_lo, v_hi in _vertical_proximity_windows(
            own_alt, own_vs, tr_alt, tr_vs, z_th_ft, BASE_ALT_FT
        ):
            lo = max(h_lo, v_lo)
            hi = min(h_hi, v_hi)
            if lo <= hi:
                return True, hi
        return False, 0.0

    best = None
    for cand in range(0, 360, 5):
        delta = signed_heading_delta(own.heading_deg, float(cand))
        t_end = abs(delta) / rate
        hd = math.radians(float(cand))
        ovx = speed * math.sin(hd)
        ovy = speed * math.cos(hd)
        for level in levels:
            exit_t = 0.0
            raw_hit = False
            for tr in threats:
                _, g_exit = pair_overlap_exit(tr, t_end, ovx, ovy, level, hmd, zthr)
                exit_t = max(exit_t, t_end + g_exit)
                hit, _ = pair_overlap_exit(tr, t_end, ovx, ovy, level, raw.hmd_m, raw.zthr_ft)
                raw_hit = raw_hit or hit
            cand_own = Track(own.aircraft_id, own.x, own.y, own.alt_ft, ovx, ovy, level)
            new_conflicts = sum(
                1 for tr in others if conflict_within(cand_own, tr, thresholds, dims=dims)
            )
            dist = abs(signed_heading_delta(preferred_deg, float(cand)))
            key = (1 if raw_hit else 0, round(exit_t, 3), new_conflicts, round(dist, 6), cand)
            if best is None or key < best[0]:
                best = (key, GuidanceCommand(float(cand), level))
    return best[1]


def _nearest_clear_heading(advisory: Advisory, preferred_deg: float) -> float | None:
    if heading_label(advisory, preferred_deg) == LABEL_CLEAR:
        return wrap_heading(preferred_deg)
    base = round(wrap_heading(preferred_deg))
    for d in range(0, 181):
        cw = wrap_heading(base + d)
        if heading_label(advisory, cw) == LABEL_CLEAR:
            return cw
        ccw = wrap_heading(base - d)
        if heading_label(advisory, ccw) == LABEL_CLEAR:
            return ccw
    return None
