"""Built-in scenario specifications.

Labels encode engine / priorities / dimensionality / separation threshold:
``ref`` is the in-repo reference well-clear engine, ``ip``/``ep`` intrinsic or
extrinsic priorities, ``2d``/``3d`` the maneuvering plane, and the suffix the
horizontal threshold. ``ref_ip_2d_2k_down`` is the downscaled variant (43 kt
cruise, 1 km cells).
"""

from __future__ import annotations

from dataclasses import replace

from .daa import SeparationThresholds
from .engine import ScenarioSpec

KT_TO_MS = 0.514444


def _spec(label: str, **kw) -> ScenarioSpec:
    return ScenarioSpec(label=label, **kw)


PRESETS: dict[str, ScenarioSpec] = {
    "ref_ip_2d_4k": _spec(
        "ref_ip_2d_4k",
        priorities="intrinsic",
        dims="2d",
        thresholds=SeparationThresholds(hmd_ft=4000.0),
    ),
    "ref_ep_2d_4k": _spec(
        "ref_ep_2d_4k",
        priorities="extrinsic",
        dims="2d",
        thresholds=SeparationThresholds(hmd_ft=4000.0),
    ),
    "ref_ep_3d_4k": _spec(
        "ref_ep_3d_4k",
        priorities="extrinsic",
        dims="3d",
        thresholds=SeparationThresholds(hmd_ft=4000.0),
    ),
    "ref_ep_2d_2k": _spec(
        "ref_ep_2d_2k",
        priorities="extrinsic",
        dims="2d",
        thresholds=SeparationThresholds(hmd_ft=2000.0),
    ),
    "ref_ip_2d_2k": _spec(
        "ref_ip_2d_2k",
        priorities="intrinsic",
        dims="2d",
        thresholds=SeparationThresholds(hmd_ft=2000.0),
    ),
    "ref_ep_2d_200ft": _spec(
        "ref_ep_2d_200ft",
        priorities="extrinsic",
        dims="2d",
        thresholds=SeparationThresholds(hmd_ft=200.0),
    ),
    "ref_ip_2d_2k_down": _spec(
        "ref_ip_2d_2k_down",
        priorities="intrinsic",
        dims="2d",
        thresholds=SeparationThresholds(hmd_ft=2000.0),
        cruise_speed=43.0 * KT_TO_MS,
        cell_radius=1000.0,
    ),
}


def get_preset(label: str, **overrides) -> ScenarioSpec:
    if label not in PRESETS:
        raise KeyError(f"unknown spec preset {label!r}; known: {sorted(PRESETS)}")
    spec = PRESETS[label]
    if overrides:
        spec = replace(spec, **overrides)
    return spec


def preset_labels() -> list[str]:
    return sorted(PRESETS)
