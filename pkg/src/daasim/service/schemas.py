"""Request/response models for the batch service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class PredicateModel(BaseModel):
    mode: Literal["ring_steps", "hex_grid_distance", "euclidean_min"] = "hex_grid_distance"
    threshold: float = 4.0


class GenerateRequest(BaseModel):
    out_dir: str
    filename: str = "scenario_set.jsonl"
    predicate: PredicateModel = PredicateModel()
    id_assignment: Literal["ascending", "free"] = "ascending"
    distinct_destinations: bool = False
    n_aircraft: int = Field(default=4, ge=1, le=4)
    dedup_rotations: bool = False
    cell_radius_m: float = 2000.0


class GenerateResponse(BaseModel):
    set_path: str
    checksum: str
    count: int
    deduplicated: bool


class AssignmentModel(BaseModel):
    aircraft_id: int
    origin: int
    destination: int


class ValidateRequest(BaseModel):
    set_path: str | None = None
    configurations: list[list[AssignmentModel]] | None = None
    predicate: PredicateModel = PredicateModel()
    cell_radius_m: float = 2000.0


class ViolationModel(BaseModel):
    constraint: int
    aircraft: list[int]
    message: str


class ConfigurationReport(BaseModel):
    index: int
    violations: list[ViolationModel]


class ValidateResponse(BaseModel):
    n_checked: int
    n_valid: int
    reports: list[ConfigurationReport]


class RunRequest(BaseModel):
    spec: str = "ref_ip_2d_4k"
    overrides: dict = Field(default_factory=dict)
    set_path: str
    out_dir: str
    mode: Literal["closed_loop", "open_loop", "baseline"] = "closed_loop"
    sample: int | None = Field(default=None, ge=1)
    seed: int | None = None
    workers: int = Field(default=1, ge=1)
    events: Literal["auto", "on", "off"] = "auto"
    wait: bool = True


class JobModel(BaseModel):
    job_id: str
    state: Literal["queued", "running", "done", "failed"]
    mode: str
    label: str
    out_dir: str
    n_failed: int = 0
    summary: dict | None = None
    error: str | None = None


class RegressRequest(BaseModel):
    summary_paths: list[str]
    out_dir: str | None = None


class FitModel(BaseModel):
    coefficients: list[float]
    intercept: float
    r_squared: float | None
    features: list[str]
    warning: str | None = None


class RegressPoint(BaseModel):
    label: str
    m_over_d_per_km: float
    alpha_bar_deg: float
    inefficiency: float
    predicted: float


class RegressResponse(BaseModel):
    n_points: int
    combined: FitModel
    per_feature: dict[str, FitModel]
    points: list[RegressPoint]
    report_path: str | None = None
    plot_csv_path: str | None = None


class ReportRequest(BaseModel):
    results_csv: str


class ReportResponse(BaseModel):
    n: int
    rates: dict[str, float]
    mean_wall_clock_s: float


class PresetModel(BaseModel):
    label: str
    spec: dict


class HealthResponse(BaseModel):
    status: str
    version: str
