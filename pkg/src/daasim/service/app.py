"""The batch service: scenario sets in, runs and reports out.

Generation, validation, regression, and reports respond synchronously. Runs
either block until done (``wait=true``, the CLI default) or return a queued
job to poll via ``GET /runs/{job_id}``. All heavy lifting happens in the core
modules; this layer only translates between HTTP payloads and files on the
service host's filesystem.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..batch import recount_from_csv, regress_summaries, run_batch
from ..engine import spec_from_dict, spec_to_dict
from ..geometry import Airspace
from ..presets import PRESETS, get_preset
from ..scenario import (
    SeparationPredicate,
    TrafficConfiguration,
    dedup_rotations,
    generate_pairs,
    read_scenario_set,
    scenario_set_header,
    validate_configuration,
    write_scenario_set,
)
from .jobs import JobStore
from .schemas import (
    ConfigurationReport,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    JobModel,
    PresetModel,
    RegressRequest,
    RegressResponse,
    ReportRequest,
    ReportResponse,
    RunRequest,
    ValidateRequest,
    ValidateResponse,
    ViolationModel,
)


def create_app() -> FastAPI:
    app = FastAPI(title="daasim batch service", version=__version__)
    jobs = JobStore()

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.get("/presets", response_model=list[PresetModel])
    def presets():
        return [
            PresetModel(label=label, spec=spec_to_dict(spec))
            for label, spec in sorted(PRESETS.items())
        ]

    @app.post("/scenario-sets", response_model=GenerateResponse)
    def generate(req: GenerateRequest):
        airspace = Airspace(req.cell_radius_m)
        predicate = SeparationPredicate(req.predicate.mode, req.predicate.threshold)
        pairs = generate_pairs(
            airspace,
            predicate,
            id_assignment=req.id_assignment,
            distinct_destinations=req.distinct_destinations,
            n_aircraft=req.n_aircraft,
        )
        if req.dedup_rotations:
            pairs = dedup_rotations(pairs, predicate, airspace, id_assignment=req.id_assignment)
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / req.filename
        header = scenario_set_header(
            airspace,
            predicate,
            id_assignment=req.id_assignment,
            distinct_destinations=req.distinct_destinations,
            n_aircraft=req.n_aircraft,
            count=len(pairs),
        )
        header["dedup_rotations"] = req.dedup_rotations
        checksum = write_scenario_set(path, pairs, header)
        return GenerateResponse(
            set_path=str(path), checksum=checksum, count=len(pairs),
            deduplicated=req.dedup_rotations,
        )

    @app.post("/scenario-sets/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest):
        airspace = Airspace(req.cell_radius_m)
        predicate = SeparationPredicate(req.predicate.mode, req.predicate.threshold)
        if req.set_path is not None:
            try:
                _, pairs_list = read_scenario_set(req.set_path)
            except FileNotFoundError:
                raise HTTPException(status_code=404, detail=f"scenario set {req.set_path} not found")
            configs = [TrafficConfiguration.from_pairs(p) for p in pairs_list]
        elif req.configurations is not None:
            configs = [
                TrafficConfiguration.from_pairs([(a.origin, a.destination) for a in cfg])
                for cfg in req.configurations
            ]
        else:
            raise HTTPException(status_code=422, detail="provide set_path or configurations")
        reports = []
        n_valid = 0
        for idx, cfg in enumerate(configs):
            violations = validate_configuration(cfg, predicate, airspace)
            if violations:
                reports.append(
                    ConfigurationReport(
                        index=idx,
                        violations=[
                            ViolationModel(
                                constraint=v.constraint,
                                aircraft=list(v.aircraft),
                                message=v.message,
                            )
                            for v in violations
                        ],
                    )
                )
            else:
                n_valid += 1
        return ValidateResponse(n_checked=len(configs), n_valid=n_valid, reports=reports)

    @app.post("/runs", response_model=JobModel)
    def start_run(req: RunRequest):
        try:
            base = spec_to_dict(get_preset(req.spec))
            base.update(req.overrides)
            spec = spec_from_dict(base)
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"bad spec or overrides: {exc}")
        try:
            header, pairs_list = read_scenario_set(req.set_path)
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail=f"scenario set {req.set_path} not found")
        if req.sample is not None and req.sample > len(pairs_list):
            raise HTTPException(
                status_code=422,
                detail=f"sample {req.sample} exceeds set size {len(pairs_list)}",
            )
        from ..scenario import scenario_set_checksum

        checksum = scenario_set_checksum(req.set_path)
        job = jobs.create(req.mode, spec.label, req.out_dir)

        def work():
            return run_batch(
                pairs_list,
                spec,
                mode=req.mode,
                out_dir=req.out_dir,
                workers=req.workers,
                sample=req.sample,
                seed=req.seed,
                events=req.events,
                set_path=req.set_path,
                set_checksum=checksum,
            )

        if req.wait:
            jobs.run_sync(job, work)
        else:
            jobs.submit(job, work)
        return _job_model(job)

    @app.get("/runs/{job_id}", response_model=JobModel)
    def get_run(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return _job_model(job)

    @app.post("/regress", response_model=RegressResponse)
    def regress(req: RegressRequest):
        try:
            report = regress_summaries(req.summary_paths, req.out_dir)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return RegressResponse(**report)

    @app.post("/report", response_model=ReportResponse)
    def report(req: ReportRequest):
        try:
            counted = recount_from_csv(req.results_csv)
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail=f"results CSV {req.results_csv} not found")
        return ReportResponse(**counted)

    return app


def _job_model(job) -> JobModel:
    return JobModel(
        job_id=job.job_id,
        state=job.state,
        mode=job.mode,
        label=job.label,
        out_dir=job.out_dir,
        n_failed=job.n_failed,
        summary=job.summary,
        error=job.error,
    )
