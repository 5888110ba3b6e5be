"""daasim: deterministic multi-aircraft detect-and-avoid simulation harness.

Core library (geometry, scenario generation, dynamics, the reference
well-clear engine, mission logic, scenario execution, metrics) plus a FastAPI
service wrapping batch runs and a thin CLI client.
"""

__version__ = "0.1.0"

from .geometry import Airspace, cell_centroid, rotate_cell  # noqa: E402,F401
from .scenario import (  # noqa: E402,F401
    SeparationPredicate,
    TrafficConfiguration,
    generate_configurations,
    validate_configuration,
)
from .engine import (  # noqa: E402,F401
    ScenarioSpec,
    run_baseline,
    run_closed_loop,
    run_open_loop,
)
from .presets import PRESETS, get_preset  # noqa: E402,F401
