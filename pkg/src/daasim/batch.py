"""Batch execution: manifests, worker pool, CSV/JSONL/summary persistence.

A run is fully determined by its manifest (spec, scenario set checksum,
mode, sample, seed). Scenarios fan out to a process pool; rows are collected,
sorted by configuration index, and written through a single sink, so the
results CSV and the summary are byte-identical regardless of worker count or
completion order. Wall-clock readings are the one nondeterministic output and
live in ``timing.json`` (and the wall_clock_s CSV column), never in
``summary.json``.

Outputs per run directory:

* ``manifest.json``   - the resolved run manifest
* ``results.csv``     - one row per scenario, documented column order
* ``events.jsonl``    - scenario-indexed event log records (when enabled)
* ``summary.json``    - deterministic set-level indicators
* ``timing.json``     - wall-clock bookkeeping
* ``failures.json``   - aborted scenarios, only when there are any
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
import time
from pathlib import Path
from typing import Sequence

from . import __version__
from .engine import (
    ScenarioSpec,
    run_baseline_set,
    run_closed_loop,
    run_open_loop,
    spec_from_dict,
    spec_to_dict,
)
from .metrics import inefficiency, los_rate, open_loop_measures, timeout_rate
from .scenario import (
    GENERATOR_VERSION,
    PairTuple,
    TrafficConfiguration,
    sample_configurations,
)

MODE_CLOSED = "closed_loop"
MODE_OPEN = "open_loop"
MODE_BASELINE = "baseline"

EVENTS_AUTO_LIMIT = 5000  # auto mode writes event logs only for sets this small

_PAIR_NAMES = ["01", "02", "03", "12", "13", "23"]
_PAIR_IDX = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def closed_loop_columns(spec: ScenarioSpec) -> list[str]:
    cols = ["index", "config_hash"]
    for i in range(4):
        cols += [f"fuel_{i}", f"time_s_{i}", f"path_m_{i}", f"deviations_{i}", f"arrived_{i}"]
    cols += [f"minsep_ft_{p}" for p in _PAIR_NAMES]
    cols += [f"minsep_gated_ft_{p}" for p in _PAIR_NAMES]
    for th in spec.monitor_thresholds_ft:
        cols.append(f"los_{int(th)}ft")
    for th in spec.monitor_thresholds_ft:
        cols.append(f"los_{int(th)}ft_ungated")
    cols += ["timeout", "error", "wall_clock_s"]
    return cols


OPEN_LOOP_COLUMNS = [
    "index",
    "config_hash",
    "stop_reason",
    "stopped_time_s",
    "distance_m",
    "maneuvers",
    "heading_deltas_deg",
    "timeout",
    "error",
    "wall_clock_s",
]


def baseline_columns(spec: ScenarioSpec) -> list[str]:
    cols = ["index", "config_hash"]
    for i in range(4):
        cols += [f"fuel_{i}", f"time_s_{i}", f"path_m_{i}"]
    cols += [f"minsep_ft_{p}" for p in _PAIR_NAMES]
    for th in spec.monitor_thresholds_ft:
        cols.append(f"los_{int(th)}ft")
    return cols


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def _config_hash(pairs: PairTuple) -> str:
    return TrafficConfiguration.from_pairs(pairs).config_hash()


# ---------------------------------------------------------------------------
# Worker pool
# ---------------------------------------------------------------------------

_WORKER_SPEC: ScenarioSpec | None = None
_WORKER_MODE: str = MODE_CLOSED
_WORKER_EVENTS: bool = False


def _init_worker(spec_dict: dict, mode: str, events: bool) -> None:
    global _WORKER_SPEC, _WORKER_MODE, _WORKER_EVENTS
    _WORKER_SPEC = spec_from_dict(spec_dict)
    _WORKER_MODE = mode
    _WORKER_EVENTS = events


def _run_one(item: tuple[int, PairTuple]) -> dict:
    idx, pairs = item
    spec = _WORKER_SPEC
    assert spec is not None
    if _WORKER_MODE == MODE_OPEN:
        res = run_open_loop(pairs, spec, collect_events=_WORKER_EVENTS)
        return {
            "index": idx,
            "config_hash": _config_hash(pairs),
            "stop_reason": res.stop_reason,
            "stopped_time_s": res.stopped_time_s,
            "distance_m": res.distance_flown_m,
            "maneuvers": res.maneuvers_started,
            "heading_deltas_deg": ";".join(repr(d) for d in res.heading_deltas_deg),
            "heading_deltas_list": list(res.heading_deltas_deg),
            "timeout": res.timeout,
            "error": res.error or "",
            "wall_clock_s": res.wall_clock_s,
            "events": res.events if _WORKER_EVENTS else [],
        }
    res = run_closed_loop(pairs, spec, collect_events=_WORKER_EVENTS)
    row: dict = {"index": idx, "config_hash": _config_hash(pairs)}
    for i in range(4):
        if i < res.n_aircraft:
            row[f"fuel_{i}"] = res.fuels[i]
            row[f"time_s_{i}"] = res.flight_times[i]
            row[f"path_m_{i}"] = res.path_lengths[i]
            row[f"deviations_{i}"] = res.deviations[i]
            row[f"arrived_{i}"] = res.arrived[i]
        else:
            for name in (f"fuel_{i}", f"time_s_{i}", f"path_m_{i}", f"deviations_{i}", f"arrived_{i}"):
                row[name] = None
    for name, key in zip(_PAIR_NAMES, _PAIR_IDX):
        row[f"minsep_ft_{name}"] = res.min_sep_ft.get(key)
        row[f"minsep_gated_ft_{name}"] = res.min_sep_gated_ft.get(key)
    for th in spec.monitor_thresholds_ft:
        row[f"los_{int(th)}ft"] = res.los.get(th, False)
        row[f"los_{int(th)}ft_ungated"] = res.los_ungated.get(th, False)
    row["timeout"] = res.timeout
    row["error"] = res.error or ""
    row["wall_clock_s"] = res.wall_clock_s
    row["total_fuel"] = sum(res.fuels) if not res.error else math.nan
    row["events"] = res.events if _WORKER_EVENTS else []
    return row


def _execute(
    items: list[tuple[int, PairTuple]],
    spec: ScenarioSpec,
    mode: str,
    workers: int,
    events: bool,
) -> list[dict]:
    if workers <= 1:
        _init_worker(spec_to_dict(spec), mode, events)
        rows = [_run_one(it) for it in items]
    else:
        chunk = max(1, len(items) // (workers * 8))
        with multiprocessing.Pool(
            workers, initializer=_init_worker, initargs=(spec_to_dict(spec), mode, events)
        ) as pool:
            rows = pool.map(_run_one, items, chunksize=chunk)
    rows.sort(key=lambda r: r["index"])
    return rows


# ---------------------------------------------------------------------------
# Run driver
# ---------------------------------------------------------------------------


def build_manifest(
    spec: ScenarioSpec,
    *,
    mode: str,
    set_path: str | None,
    set_checksum: str | None,
    set_count: int,
    sample: int | None,
    seed: int | None,
    workers: int,
    out_dir: str,
    events: bool,
) -> dict:
    return {
        "label": spec.label,
        "mode": mode,
        "spec": spec_to_dict(spec),
        "set_path": set_path,
        "set_checksum": set_checksum,
        "set_count": set_count,
        "sample": sample if sample is not None else "full",
        "seed": seed,
        "workers": workers,
        "out_dir": str(out_dir),
        "events": events,
        "package_version": __version__,
        "generator_version": GENERATOR_VERSION,
    }


def run_batch(
    pairs_list: Sequence[PairTuple],
    spec: ScenarioSpec,
    *,
    mode: str = MODE_CLOSED,
    out_dir: Path | str,
    workers: int = 1,
    sample: int | None = None,
    seed: int | None = None,
    events: str = "auto",
    set_path: str | None = None,
    set_checksum: str | None = None,
) -> dict:
    """Execute a batch and persist all artifacts; returns the summary dict."""
    if mode not in (MODE_CLOSED, MODE_OPEN, MODE_BASELINE):
        raise ValueError(f"unknown run mode {mode!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # closed-loop is the primary artifact set; other modes suffix their files
    # so one spec directory can hold all three runs plus the merged summary
    suffix = "" if mode == MODE_CLOSED else f"_{mode}"

    indices = list(range(len(pairs_list)))
    if sample is not None:
        indices = sorted(sample_configurations(indices, sample, seed if seed is not None else 0))
    items = [(i, pairs_list[i]) for i in indices]

    events_on = events == "on" or (events == "auto" and len(items) <= EVENTS_AUTO_LIMIT)
    if mode == MODE_BASELINE:
        events_on = False

    manifest = build_manifest(
        spec,
        mode=mode,
        set_path=set_path,
        set_checksum=set_checksum,
        set_count=len(pairs_list),
        sample=sample,
        seed=seed,
        workers=workers,
        out_dir=str(out),
        events=events_on,
    )
    (out / f"manifest{suffix}.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")

    t_start = time.perf_counter()
    if mode == MODE_BASELINE:
        summary_section, rows, columns = _run_baseline_mode(items, spec)
    else:
        rows = _execute(items, spec, mode, workers, events_on)
        if mode == MODE_CLOSED:
            summary_section, columns = _summarize_closed(rows, items, spec)
        else:
            summary_section, columns = _summarize_open(rows, spec)
    total_wall = time.perf_counter() - t_start

    _write_csv(out / f"results{suffix}.csv", columns, rows)
    if events_on:
        _write_events(out / f"events{suffix}.jsonl", rows)

    summary = {
        "label": spec.label,
        "set": {
            "path": set_path,
            "checksum": set_checksum,
            "count_total": len(pairs_list),
            "n_executed": len(items),
            "sample": sample if sample is not None else "full",
            "seed": seed,
        },
        mode: summary_section,
    }
    summary_path = out / "summary.json"
    summary = _merge_summary(summary_path, summary)
    summary_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")

    wall_clocks = [r["wall_clock_s"] for r in rows if "wall_clock_s" in r]
    timing = {
        "mode": mode,
        "total_wall_clock_s": total_wall,
        "sum_scenario_wall_clock_s": sum(wall_clocks) if wall_clocks else 0.0,
        "mean_scenario_compute_time_s": (sum(wall_clocks) / len(wall_clocks)) if wall_clocks else 0.0,
        "workers": workers,
        "n_executed": len(items),
    }
    (out / f"timing{suffix}.json").write_text(json.dumps(timing, sort_keys=True, indent=2) + "\n")

    failures = [
        {"index": r["index"], "error": r["error"]}
        for r in rows
        if r.get("error")
    ]
    if failures:
        (out / f"failures{suffix}.json").write_text(json.dumps(failures, sort_keys=True, indent=2) + "\n")
    return summary


def _run_baseline_mode(items, spec: ScenarioSpec):
    pairs_only = [p for _, p in items]
    data = run_baseline_set(pairs_only, spec)
    rows = []
    pair_cols = data.get("pair_columns", [])
    for n, (idx, pairs) in enumerate(items):
        row = {"index": idx, "config_hash": _config_hash(pairs)}
        k = len(pairs)
        for i in range(4):
            if i < k:
                row[f"fuel_{i}"] = float(data["fuels"][n, i])
                row[f"time_s_{i}"] = float(data["durations"][n, i])
                row[f"path_m_{i}"] = float(data["lengths"][n, i])
            else:
                row[f"fuel_{i}"] = row[f"time_s_{i}"] = row[f"path_m_{i}"] = None
        sep_by_pair = {pc: float(data["min_sep_ft"][n, c]) for c, pc in enumerate(pair_cols)}
        for name, key in zip(_PAIR_NAMES, _PAIR_IDX):
            row[f"minsep_ft_{name}"] = sep_by_pair.get(key)
        for th in spec.monitor_thresholds_ft:
            row[f"los_{int(th)}ft"] = bool(data["los"][th][n])
        rows.append(row)
    section = {
        "n_failed": 0,
        "los_rate": {
            str(int(th)): los_rate([bool(v) for v in data["los"][th]])
            for th in spec.monitor_thresholds_ft
        },
        "timeout_rate": 0.0,
        "mean_total_fuel": float(data["total_fuel"].mean()) if len(items) else 0.0,
    }
    return section, rows, baseline_columns(spec)


def _summarize_closed(rows: list[dict], items, spec: ScenarioSpec):
    ok = [r for r in rows if not r["error"]]
    ok_pairs = {r["index"] for r in ok}
    base = run_baseline_set([p for i, p in items if i in ok_pairs], spec)
    ineff = (
        inefficiency([r["total_fuel"] for r in ok], list(base["total_fuel"]))
        if ok
        else 0.0
    )
    section = {
        "n_failed": len(rows) - len(ok),
        "inefficiency_rate": ineff,
        "los_rate": {
            str(int(th)): los_rate([r[f"los_{int(th)}ft"] for r in ok])
            for th in spec.monitor_thresholds_ft
        },
        "los_rate_ungated": {
            str(int(th)): los_rate([r[f"los_{int(th)}ft_ungated"] for r in ok])
            for th in spec.monitor_thresholds_ft
        },
        "timeout_rate": timeout_rate([r["timeout"] for r in ok]),
        "arrival_rate": (
            sum(1 for r in ok for i in range(4) if r.get(f"arrived_{i}"))
            / max(1, sum(1 for r in ok for i in range(4) if r.get(f"arrived_{i}") is not None))
        ),
        "mean_deviations": (
            sum(r[f"deviations_{i}"] or 0 for r in ok for i in range(4)) / len(ok)
            if ok
            else 0.0
        ),
    }
    return section, closed_loop_columns(spec)


def _summarize_open(rows: list[dict], spec: ScenarioSpec):
    ok = [r for r in rows if not r["error"]]
    deltas: list[float] = []
    for r in ok:
        deltas.extend(r.get("heading_deltas_list", []))
    measures = open_loop_measures(
        [r["maneuvers"] for r in ok],
        [r["distance_m"] for r in ok],
        deltas,
    )
    section = {
        "n_failed": len(rows) - len(ok),
        "m_over_d_per_km": measures.m_over_d_per_km,
        "alpha_bar_deg": measures.alpha_bar_deg,
        "maneuvers_total": measures.maneuvers,
        "distance_total_km": measures.distance_km,
        "degenerate": measures.degenerate,
        "timeout_rate": timeout_rate([r["timeout"] for r in ok]),
    }
    return section, OPEN_LOOP_COLUMNS


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in columns])


def _write_events(path: Path, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            for ev in row.get("events", []):
                fh.write(json.dumps({"scenario": row["index"], **ev}, sort_keys=True) + "\n")


def _merge_summary(path: Path, new: dict) -> dict:
    """Fold a new mode section into an existing summary for the same set."""
    if path.exists():
        try:
            existing = json.loads(path.read_text())
        except json.JSONDecodeError:
            return new
        if (
            existing.get("label") == new.get("label")
            and existing.get("set", {}).get("checksum") == new.get("set", {}).get("checksum")
        ):
            merged = dict(existing)
            for key, value in new.items():
                merged[key] = value
            return merged
    return new


def regress_summaries(summary_paths: Sequence[str | Path], out_dir: str | Path | None = None) -> dict:
    """Fit the open-loop-to-inefficiency regression over per-spec summaries.

    Each label must carry both the closed-loop inefficiency and the open-loop
    measures (one merged summary file, or separate files grouped by label).
    Writes ``regression_report.json`` and a plot-ready CSV of (true,
    predicted) pairs when ``out_dir`` is given.
    """
    by_label: dict[str, dict] = {}
    for path in summary_paths:
        data = json.loads(Path(path).read_text())
        label = data.get("label")
        if not label:
            raise ValueError(f"summary {path} has no label")
        entry = by_label.setdefault(label, {"sources": []})
        entry["sources"].append(str(path))
        if "closed_loop" in data:
            entry["inefficiency"] = data["closed_loop"].get("inefficiency_rate")
        if "open_loop" in data:
            entry["m_over_d"] = data["open_loop"].get("m_over_d_per_km")
            entry["alpha_bar"] = data["open_loop"].get("alpha_bar_deg")
    for label, entry in sorted(by_label.items()):
        if entry.get("inefficiency") is None:
            raise ValueError(
                f"label {label} is missing closed-loop inefficiency (from {entry['sources']})"
            )
        if entry.get("m_over_d") is None or entry.get("alpha_bar") is None:
            raise ValueError(
                f"label {label} is missing open-loop measures (from {entry['sources']})"
            )
    if len(by_label) < 3:
        raise ValueError(f"regression needs at least 3 spec summaries, got {len(by_label)}")

    from .metrics import fit_linear

    labels = sorted(by_label)
    points = [
        ((by_label[l]["m_over_d"], by_label[l]["alpha_bar"]), by_label[l]["inefficiency"])
        for l in labels
    ]
    combined = fit_linear(points)
    per_feature = {
        "m_over_d_per_km": fit_linear(points, (0,)),
        "alpha_bar_deg": fit_linear(points, (1,)),
    }
    feature_names = ["m_over_d_per_km", "alpha_bar_deg"]

    def fit_dict(model):
        return {
            "coefficients": list(model.coefficients),
            "intercept": model.intercept,
            "r_squared": model.r_squared,
            "features": [feature_names[i] for i in model.feature_indices],
            "warning": model.warning,
        }

    rows = []
    for label, (features, target) in zip(labels, points):
        rows.append(
            {
                "label": label,
                "m_over_d_per_km": features[0],
                "alpha_bar_deg": features[1],
                "inefficiency": target,
                "predicted": combined.predict(features),
            }
        )
    report = {
        "n_points": len(points),
        "combined": fit_dict(combined),
        "per_feature": {k: fit_dict(v) for k, v in per_feature.items()},
        "points": rows,
        "report_path": None,
        "plot_csv_path": None,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        plot_path = out / "regression_plot.csv"
        with open(plot_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "m_over_d_per_km", "alpha_bar_deg", "inefficiency_true", "inefficiency_predicted"])
            for r in rows:
                writer.writerow([r["label"], _fmt(r["m_over_d_per_km"]), _fmt(r["alpha_bar_deg"]), _fmt(r["inefficiency"]), _fmt(r["predicted"])])
        report_path = out / "regression_report.json"
        report["plot_csv_path"] = str(plot_path)
        report["report_path"] = str(report_path)
        report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return report


def recount_from_csv(csv_path: Path | str) -> dict:
    """Independent single-pass recount of the rates in a results CSV.

    Used by the report command and as the recount oracle for summaries.
    """
    counts: dict[str, int] = {}
    flag_cols: list[str] = []
    n = 0
    wall = 0.0
    n_wall = 0
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        flag_cols = [
            c for c in (reader.fieldnames or []) if c.startswith("los_") or c == "timeout"
        ]
        for row in reader:
            if row.get("error"):
                continue
            n += 1
            for col in flag_cols:
                if row.get(col) == "1":
                    counts[col] = counts.get(col, 0) + 1
            if row.get("wall_clock_s"):
                wall += float(row["wall_clock_s"])
                n_wall += 1
    rates = {col: (counts.get(col, 0) / n if n else 0.0) for col in flag_cols}
    return {
        "n": n,
        "rates": rates,
        "mean_wall_clock_s": wall / n_wall if n_wall else 0.0,
    }
