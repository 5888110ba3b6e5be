"""Set-level performance indicators and the open-loop regression.

Indicators over a scenario set:

* inefficiency rate: mean over configurations of the relative excess total
  fuel of the DAA-compliant run over the straight-line optimal flights;
* loss-of-separation rate per monitor threshold: fraction of scenarios where
  any pair dipped below the threshold;
* timeout rate: fraction of scenarios where some aircraft never arrived.

Open-loop proxies: maneuvers started per kilometer flown (ratio of sums, the
set-level definition, not a mean of per-scenario ratios) and the mean

heading deviation of maneuvering aircraft at the stopping moment, wrapped to
[0, 180] degrees.

The regression is plain ordinary least squares via the normal equations with
an intercept; R^2 is 1 - SS_res/SS_tot. Empty or degenerate inputs produce a
flagged result rather than an exception, so one bad batch cannot sink a
sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class MetricsError(ValueError):
    """Raised for unknown thresholds or malformed regression inputs."""


def inefficiency(
    daa_total_fuels: Sequence[float], baseline_total_fuels: Sequence[float]
) -> float:
    """Mean over configurations of (fuel_daa - fuel_base) / fuel_base."""
    if len(daa_total_fuels) != len(baseline_total_fuels):
        raise MetricsError("mismatched scenario sets for inefficiency")
    if not daa_total_fuels:
        return 0.0
    total = 0.0
    for daa, base in zip(daa_total_fuels, baseline_total_fuels):
        if base <= 0.0:
            raise MetricsError("baseline fuel must be strictly positive")
        total += (daa - base) / base
    return total / len(daa_total_fuels)


def los_rate(flags: Sequence[bool]) -> float:
    """Fraction of scenarios flagged; an empty set counts as 0."""
    if not flags:
        return 0.0
    return sum(1 for f in flags if f) / len(flags)


def timeout_rate(flags: Sequence[bool]) -> float:
    if not flags:
        return 0.0
    return sum(1 for f in flags if f) / len(flags)


def lowc_ratio(rate_on: float, rate_off: float) -> float | None:
    """LoS rate with DAA active over the rate with DAA inactive.

    Undefined (None) when the DAA-off rate is zero.
    """
    if rate_off == 0.0:
        return None
    return rate_on / rate_off


@dataclass(frozen=True)
class OpenLoopMeasures:
    m_over_d_per_km: float
    alpha_bar_deg: float
    maneuvers: int
    distance_km: float
    degenerate: bool = False  # no maneuvers anywhere in the set


def open_loop_measures(
    maneuvers_started: Sequence[int],
    distances_flown_m: Sequence[float],
    heading_deltas_deg: Sequence[float],
) -> OpenLoopMeasures:
    total_m = sum(maneuvers_started)
    total_d_km = sum(distances_flown_m) / 1000.0
    if total_d_km <= 0.0:
        raise MetricsError("total flown distance must be positive")
    if total_m == 0:
        return OpenLoopMeasures(0.0, 0.0, 0, total_d_km, degenerate=True)
    alpha = sum(heading_deltas_deg) / len(heading_deltas_deg) if heading_deltas_deg else 0.0
    return OpenLoopMeasures(total_m / total_d_km, alpha, total_m, total_d_km)


@dataclass(frozen=True)
class RegressionModel:
    coefficients: tuple[float, ...]
    intercept: float
    r_squared: float | None
    feature_indices: tuple[int, ...]
    warning: str | None = None

    def predict(self, features: Sequence[float]) -> float:
        used = [features[i] for i in self.feature_indices]
        return self.intercept + sum(c * x for c, x in zip(self.coefficients, used))


def fit_linear(
    points: Sequence[tuple[Sequence[float], float]],
    feature_indices: Sequence[int] | None = None,
) -> RegressionModel:
    """Ordinary least squares with intercept over (features, target) points.

    ``feature_indices`` restricts the fit to a subset of features (the
    per-feature analysis). Collinear feature matrices fall back to the best
    single-feature fit, flagged in ``warning``.
    """
    if not points:
        raise MetricsError("regression requires at least one point")
    n_features = len(points[0][0])
    idx = tuple(range(n_features)) if feature_indices is None else tuple(feature_indices)
    if len(points) < len(idx) + 1:
        raise MetricsError(
            f"need at least {len(idx) + 1} points for a {len(idx)}-feature fit, got {len(points)}"
        )
    X = np.array([[p[0][i] for i in idx] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    A = np.column_stack([np.ones(len(points)), X])

    if len(idx) > 1 and np.linalg.matrix_rank(A) < A.shape[1]:
        candidates = [fit_linear(points, (i,)) for i in idx]
        best = max(candidates, key=lambda m: -math.inf if m.r_squared is None else m.r_squared)
        return RegressionModel(
            best.coefficients,
            best.intercept,
            best.r_squared,
            best.feature_indices,
            warning="collinear features; fell back to single-feature fit",
        )

    # normal equations; A is tall and well-conditioned at this problem size
    beta = np.linalg.solve(A.T @ A, A.T @ y)
    residuals = y - A @ beta
    ss_res = float(residuals @ residuals)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res < 1e-18 else None
    else:
        r2 = 1.0 - ss_res / ss_tot
    return RegressionModel(
        coefficients=tuple(float(b) for b in beta[1:]),
        intercept=float(beta[0]),
        r_squared=r2,
        feature_indices=idx,
    )
