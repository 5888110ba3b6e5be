"""HTTP surface of the batch service."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from daasim.service import create_app


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


@pytest.fixture()
def small_set(client, tmp_path):
    """A 2-aircraft scenario set: fast to generate and run."""
    resp = client.post(
        "/scenario-sets",
        json={"out_dir": str(tmp_path), "n_aircraft": 2},
    )
    assert resp.status_code == 200, resp.text
    return resp.json()


def test_health_and_presets(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"
    presets = client.get("/presets").json()
    labels = {p["label"] for p in presets}
    assert {"ref_ip_2d_4k", "ref_ep_2d_4k", "ref_ep_3d_4k", "ref_ep_2d_2k"} <= labels
    assert len(labels) == 7


def test_generate_writes_set_and_checksum(client, small_set, tmp_path):
    assert small_set["count"] == 1050
    set_path = tmp_path / "scenario_set.jsonl"
    assert set_path.exists()
    assert (tmp_path / "scenario_set.jsonl.sha256").read_text().strip() == small_set["checksum"]


def test_generate_dedup_reduces_count(client, tmp_path):
    resp = client.post(
        "/scenario-sets",
        json={"out_dir": str(tmp_path), "n_aircraft": 2, "dedup_rotations": True,
              "filename": "dedup.jsonl"},
    )
    data = resp.json()
    assert data["deduplicated"]
    assert 1050 / 6 <= data["count"] < 1050


def test_validate_set_all_valid(client, small_set):
    resp = client.post("/scenario-sets/validate", json={"set_path": small_set["set_path"]})
    data = resp.json()
    assert data["n_checked"] == data["n_valid"] == 1050
    assert data["reports"] == []


def test_validate_inline_configuration_violations(client):
    cfg = [
        {"aircraft_id": 0, "origin": 7, "destination": 8},
        {"aircraft_id": 1, "origin": 7, "destination": 13},
    ]
    resp = client.post("/scenario-sets/validate", json={"configurations": [cfg]})
    data = resp.json()
    assert data["n_valid"] == 0
    constraints = {v["constraint"] for v in data["reports"][0]["violations"]}
    assert 3 in constraints  # duplicate origin
    assert 4 in constraints  # origin/destination too close


def test_run_closed_loop_synchronous(client, small_set, tmp_path):
    out = tmp_path / "run"
    resp = client.post(
        "/runs",
        json={
            "spec": "ref_ip_2d_4k",
            "set_path": small_set["set_path"],
            "out_dir": str(out),
            "sample": 10,
            "seed": 1,
            "wait": True,
        },
    )
    assert resp.status_code == 200, resp.text
    job = resp.json()
    assert job["state"] == "done"
    assert job["summary"]["closed_loop"]["n_failed"] == 0
    for name in ("manifest.json", "results.csv", "summary.json", "timing.json", "events.jsonl"):
        assert (out / name).exists(), name
    polled = client.get(f"/runs/{job['job_id']}").json()
    assert polled["state"] == "done"


def test_run_background_job_polls_to_done(client, small_set, tmp_path):
    resp = client.post(
        "/runs",
        json={
            "spec": "ref_ep_2d_4k",
            "set_path": small_set["set_path"],
            "out_dir": str(tmp_path / "bg"),
            "sample": 5,
            "seed": 2,
            "wait": False,
        },
    )
    job = resp.json()
    assert job["state"] in ("queued", "running")
    deadline = time.time() + 60
    while time.time() < deadline:
        job = client.get(f"/runs/{job['job_id']}").json()
        if job["state"] in ("done", "failed"):
            break
        time.sleep(0.2)
    assert job["state"] == "done", job
    assert "closed_loop" in job["summary"]


def test_run_rejects_unknown_preset_and_missing_set(client, small_set, tmp_path):
    resp = client.post(
        "/runs",
        json={"spec": "nope", "set_path": small_set["set_path"], "out_dir": str(tmp_path)},
    )
    assert resp.status_code == 422
    resp = client.post(
        "/runs",
        json={"spec": "ref_ip_2d_4k", "set_path": str(tmp_path / "missing.jsonl"),
              "out_dir": str(tmp_path)},
    )
    assert resp.status_code == 404
    resp = client.post(
        "/runs",
        json={"spec": "ref_ip_2d_4k", "set_path": small_set["set_path"],
              "out_dir": str(tmp_path), "sample": 10**7},
    )
    assert resp.status_code == 422


def test_run_spec_overrides_apply(client, small_set, tmp_path):
    out = tmp_path / "ovr"
    resp = client.post(
        "/runs",
        json={
            "spec": "ref_ip_2d_4k",
            "overrides": {"timeout_s": 500.0, "label": "custom"},
            "set_path": small_set["set_path"],
            "out_dir": str(out),
            "sample": 3,
            "seed": 3,
            "mode": "baseline",
        },
    )
    assert resp.status_code == 200, resp.text
    manifest = json.loads((out / "manifest_baseline.json").read_text())
    assert manifest["spec"]["timeout_s"] == 500.0
    assert manifest["label"] == "custom"


def test_unknown_job_404(client):
    assert client.get("/runs/job-99999").status_code == 404


def test_regress_three_synthetic_summaries_exact_fit(client, tmp_path):
    # collinear synthetic data: inefficiency = 0.01 + 0.5 * m_over_d
    for i, (md, ineff) in enumerate([(0.1, 0.06), (0.2, 0.11), (0.4, 0.21)]):
        (tmp_path / f"s{i}.json").write_text(
            json.dumps(
                {
                    "label": f"spec{i}",
                    "closed_loop": {"inefficiency_rate": ineff},
                    "open_loop": {"m_over_d_per_km": md, "alpha_bar_deg": 10.0 + i},
                }
            )
        )
    resp = client.post(
        "/regress",
        json={
            "summary_paths": [str(tmp_path / f"s{i}.json") for i in range(3)],
            "out_dir": str(tmp_path),
        },
    )
    assert resp.status_code == 200, resp.text
    data = resp.json()
    assert data["n_points"] == 3
    assert data["combined"]["r_squared"] == pytest.approx(1.0, abs=1e-9)
    assert (tmp_path / "regression_plot.csv").exists()
    assert (tmp_path / "regression_report.json").exists()


def test_regress_missing_inefficiency_names_file(client, tmp_path):
    path = tmp_path / "incomplete.json"
    path.write_text(json.dumps({"label": "x", "open_loop": {"m_over_d_per_km": 1, "alpha_bar_deg": 2}}))
    others = []
    for i in range(2):
        p = tmp_path / f"ok{i}.json"
        p.write_text(
            json.dumps(
                {
                    "label": f"ok{i}",
                    "closed_loop": {"inefficiency_rate": 0.1},
                    "open_loop": {"m_over_d_per_km": 1.0, "alpha_bar_deg": 2.0},
                }
            )
        )
        others.append(str(p))
    resp = client.post("/regress", json={"summary_paths": [str(path)] + others})
    assert resp.status_code == 422
    assert "incomplete.json" in resp.json()["detail"]


def test_regress_refuses_fewer_than_three(client, tmp_path):
    p = tmp_path / "one.json"
    p.write_text(
        json.dumps(
            {
                "label": "only",
                "closed_loop": {"inefficiency_rate": 0.1},
                "open_loop": {"m_over_d_per_km": 1.0, "alpha_bar_deg": 2.0},
            }
        )
    )
    resp = client.post("/regress", json={"summary_paths": [str(p)]})
    assert resp.status_code == 422


def test_report_endpoint_recounts(client, small_set, tmp_path):
    out = tmp_path / "rep"
    client.post(
        "/runs",
        json={"spec": "ref_ip_2d_4k", "set_path": small_set["set_path"],
              "out_dir": str(out), "sample": 8, "seed": 4},
    )
    resp = client.post("/report", json={"results_csv": str(out / "results.csv")})
    data = resp.json()
    assert data["n"] == 8
    assert "timeout" in data["rates"]
    assert "los_2000ft" in data["rates"]
