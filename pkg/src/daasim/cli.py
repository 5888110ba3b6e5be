"""Command-line client for the batch service.

Every subcommand builds a request and sends it to the service: by default an
in-process instance (no server required), or a remote one when ``--server``
is given. Outputs land on the service host's filesystem, which for the
in-process default is the local one.

The ``DAASIM_OUT`` environment variable overrides the default output
directory; no other environment configuration exists.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def make_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # starlette warns about its httpx-backed test client, which is exactly
        # the in-process transport we want here
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

        from .service import create_app

        return TestClient(create_app())


def _default_out() -> str:
    return os.environ.get("DAASIM_OUT", "out")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _fail(resp) -> None:
    try:
        detail = resp.json().get("detail", resp.text)
    except Exception:  # noqa: BLE001
        detail = resp.text
    print(f"error ({resp.status_code}): {detail}", file=sys.stderr)
    raise SystemExit(2)


def cmd_generate(client, args) -> int:
    config = _load_config(args.config)
    payload = {
        "out_dir": args.out,
        "predicate": {"mode": args.predicate_mode, "threshold": args.predicate_threshold},
        "dedup_rotations": args.dedup_rotations,
    }
    payload.update(config.get("generate", {}))
    resp = client.post("/scenario-sets", json=payload)
    if resp.status_code != 200:
        _fail(resp)
    data = resp.json()
    print(f"wrote {data['count']} configurations to {data['set_path']}")
    print(f"checksum sha256 {data['checksum']}")
    return 0


def cmd_validate(client, args) -> int:
    payload = {
        "set_path": args.set,
        "predicate": {"mode": args.predicate_mode, "threshold": args.predicate_threshold},
    }
    resp = client.post("/scenario-sets/validate", json=payload)
    if resp.status_code != 200:
        _fail(resp)
    data = resp.json()
    print(f"checked {data['n_checked']} configurations: {data['n_valid']} valid")
    for report in data["reports"][:20]:
        for v in report["violations"]:
            print(f"  config {report['index']}: constraint {v['constraint']}: {v['message']}")
    if len(data["reports"]) > 20:
        print(f"  ... and {len(data['reports']) - 20} more invalid configurations")
    return 0 if data["n_checked"] == data["n_valid"] else 1


def cmd_run(client, args) -> int:
    if args.open_loop and args.baseline:
        print("error: --open-loop and --baseline are mutually exclusive", file=sys.stderr)
        return 2
    mode = "open_loop" if args.open_loop else "baseline" if args.baseline else "closed_loop"
    config = _load_config(args.config)
    payload = {
        "spec": args.spec,
        "overrides": config.get("overrides", {}),
        "set_path": args.set,
        "out_dir": args.out,
        "mode": mode,
        "sample": args.sample,
        "seed": args.seed,
        "workers": args.workers,
        "events": config.get("events", "auto"),
        "wait": True,
    }
    resp = client.post("/runs", json=payload)
    if resp.status_code != 200:
        _fail(resp)
    job = resp.json()
    if job["state"] == "failed":
        print(f"run failed: {job['error']}", file=sys.stderr)
        return 1
    summary = job["summary"] or {}
    section = summary.get(mode, {})
    print(f"{job['label']} [{mode}] over {summary.get('set', {}).get('n_executed', '?')} scenarios -> {args.out}")
    for key in ("inefficiency_rate", "timeout_rate", "m_over_d_per_km", "alpha_bar_deg"):
        if key in section:
            print(f"  {key}: {section[key]:.6g}")
    for key, value in sorted(section.get("los_rate", {}).items()):
        print(f"  los_rate[{key} ft]: {value:.6g}")
    if job["n_failed"]:
        print(f"  {job['n_failed']} scenario(s) aborted; see failures.json", file=sys.stderr)
        return 1
    return 0


def cmd_regress(client, args) -> int:
    payload = {"summary_paths": args.summaries, "out_dir": args.out}
    resp = client.post("/regress", json=payload)
    if resp.status_code != 200:
        _fail(resp)
    data = resp.json()
    combined = data["combined"]
    print(f"fitted {data['n_points']} spec points")
    r2 = combined["r_squared"]
    print(f"  combined R^2: {r2 if r2 is None else round(r2, 4)}")
    for name, fit in data["per_feature"].items():
        r2 = fit["r_squared"]
        print(f"  {name} alone R^2: {r2 if r2 is None else round(r2, 4)}")
    if data.get("plot_csv_path"):
        print(f"  plot data: {data['plot_csv_path']}")
    return 0


def cmd_report(client, args) -> int:
    resp = client.post("/report", json={"results_csv": args.results})
    if resp.status_code != 200:
        _fail(resp)
    data = resp.json()
    print(f"{data['n']} scenario rows")
    for key, value in sorted(data["rates"].items()):
        print(f"  {key}: {value:.6g}")
    print(f"  mean wall clock: {data['mean_wall_clock_s']:.4g} s")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daasim",
        description="multi-aircraft detect-and-avoid batch simulation harness",
    )
    parser.add_argument("--server", default=None, help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="enumerate a traffic configuration set")
    g.add_argument("--out", default=_default_out(), help="output directory")
    g.add_argument(
        "--predicate-mode",
        default="hex_grid_distance",
        choices=["ring_steps", "hex_grid_distance", "euclidean_min"],
    )
    g.add_argument("--predicate-threshold", type=float, default=None)
    g.add_argument("--dedup-rotations", action="store_true", help="emit one configuration per rotation orbit")
    g.add_argument("--config", default=None, help="JSON file with extra generator options")

    v = sub.add_parser("validate", help="validate a scenario-set file")
    v.add_argument("--set", required=True, help="scenario-set JSONL path")
    v.add_argument(
        "--predicate-mode",
        default="hex_grid_distance",
        choices=["ring_steps", "hex_grid_distance", "euclidean_min"],
    )
    v.add_argument("--predicate-threshold", type=float, default=None)

    r = sub.add_parser("run", help="execute a batch over a scenario set")
    r.add_argument("--spec", default="ref_ip_2d_4k", help="spec preset label")
    r.add_argument("--set", required=True, help="scenario-set JSONL path")
    r.add_argument("--out", default=_default_out(), help="output directory")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--sample", type=int, default=None, help="run a seeded sample of this size")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--open-loop", action="store_true", help="stop each scenario at the first completed maneuver")
    r.add_argument("--baseline", action="store_true", help="closed-form straight-line flights, no DAA")
    r.add_argument("--config", default=None, help="JSON file with spec overrides")

    reg = sub.add_parser("regress", help="fit inefficiency against open-loop measures")
    reg.add_argument("summaries", nargs="+", help="per-spec summary.json files (3 or more labels)")
    reg.add_argument("--out", default=_default_out(), help="directory for report and plot CSV")

    rep = sub.add_parser("report", help="recount rates from a results CSV")
    rep.add_argument("--results", required=True, help="results.csv path")

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    return parser


_DEFAULT_THRESHOLDS = {"ring_steps": 4.0, "hex_grid_distance": 4.0, "euclidean_min": 12000.0}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "predicate_threshold", None) is None and hasattr(args, "predicate_mode"):
        args.predicate_threshold = _DEFAULT_THRESHOLDS[args.predicate_mode]
    if args.command == "serve":
        return cmd_serve(args)
    client = make_client(args.server)
    try:
        if args.command == "generate":
            return cmd_generate(client, args)
        if args.command == "validate":
            return cmd_validate(client, args)
        if args.command == "run":
            return cmd_run(client, args)
        if args.command == "regress":
            return cmd_regress(client, args)
        if args.command == "report":
            return cmd_report(client, args)
    finally:
        client.close()
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
