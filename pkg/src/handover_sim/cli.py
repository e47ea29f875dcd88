"""Command-line interface.

Subcommands:

    run              execute a scenario, print a summary, optionally write the log
    compare          run static and adaptive on the same scenario side by side
    export           write trajectory samples (csv/json) from a run or a saved log
    validate-config  parse and validate a scenario file
    serve            start the HTTP service

Scenario path, output path, seed, and service URL can also come from the
HANDOVER_SIM_SCENARIO, HANDOVER_SIM_OUT, HANDOVER_SIM_SEED, and
HANDOVER_SIM_URL environment variables; explicit flags win.  With --url the
run/compare/validate commands post to a running service instead of executing
in-process.

Exit codes: 0 on a completed handover with a feasible plan, 1 on a fault,
an infeasible plan, or a run that never finished, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .hand_stream import ParseError
from .runlog import RunLog, export_trajectory, read_run_log, write_run_log
from .runner import compare_modes, run_scenario
from .scenario import (
    apply_overrides,
    config_digest,
    parse_override,
    scenario_from_document,
)

__all__ = ["main", "build_parser"]


def _env(name: str) -> Optional[str]:
    value = os.environ.get(name)
    return value if value else None


def _canon_bytes(doc: Any) -> bytes:
    return (json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n").encode(
        "utf-8"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="handover-sim",
        description="Deterministic handover motion planning and scenario simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, with_mode: bool = True) -> None:
        p.add_argument(
            "--scenario",
            default=_env("HANDOVER_SIM_SCENARIO"),
            help="scenario YAML path (env: HANDOVER_SIM_SCENARIO)",
        )
        p.add_argument(
            "--seed",
            default=_env("HANDOVER_SIM_SEED"),
            help="noise seed override (env: HANDOVER_SIM_SEED)",
        )
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted-path scenario override, repeatable (e.g. planner.lock_factor=0.5)",
        )
        p.add_argument(
            "--url",
            default=_env("HANDOVER_SIM_URL"),
            help="base URL of a running service; command executes remotely (env: HANDOVER_SIM_URL)",
        )
        if with_mode:
            p.add_argument(
                "--mode",
                choices=("static", "adaptive"),
                default="adaptive",
                help="handover mode (default: adaptive)",
            )

    p_run = sub.add_parser("run", help="execute one scenario")
    add_common(p_run)
    p_run.add_argument(
        "--out", default=_env("HANDOVER_SIM_OUT"), help="write the run log JSON here (env: HANDOVER_SIM_OUT)"
    )

    p_cmp = sub.add_parser("compare", help="run both modes and report side-by-side metrics")
    add_common(p_cmp, with_mode=False)
    p_cmp.add_argument(
        "--out", default=_env("HANDOVER_SIM_OUT"), help="write the comparison report JSON here"
    )

    p_exp = sub.add_parser("export", help="export trajectory samples")
    add_common(p_exp)
    p_exp.add_argument("--log", help="existing run log to export instead of running a scenario")
    p_exp.add_argument("--format", choices=("csv", "json"), default="csv", help="export format")
    p_exp.add_argument(
        "--out", default=_env("HANDOVER_SIM_OUT"), required=_env("HANDOVER_SIM_OUT") is None,
        help="output file path",
    )

    p_val = sub.add_parser("validate-config", help="parse and validate a scenario file")
    add_common(p_val)

    p_srv = sub.add_parser("serve", help="start the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8314)
    return parser


def _parse_seed(raw) -> Optional[int]:
    if raw is None:
        return None
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ParseError(f"seed must be an integer, got {raw!r}") from None


def _parse_overrides(pairs: List[str]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for pair in pairs:
        key, value = parse_override(pair)
        out[key] = value
    return out


def _require_scenario(args) -> Path:
    if not args.scenario:
        raise ParseError("a scenario is required (--scenario or HANDOVER_SIM_SCENARIO)")
    return Path(args.scenario)


def _load_document(path: Path, overrides: Dict[str, Any]) -> Dict[str, Any]:
    if not path.exists():
        raise ParseError(f"scenario file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path.name}: {exc}") from None
    if overrides:
        doc = apply_overrides(doc, overrides)
    return doc


def _post(url: str, route: str, payload: Dict[str, Any]) -> Dict[str, Any]:
    import httpx

    response = httpx.post(url.rstrip("/") + route, json=payload, timeout=300.0)
    if response.status_code >= 400:
        raise ParseError(f"service error {response.status_code}: {response.text}")
    return response.json()


def _summary_line(log_doc: Dict[str, Any], exit_code: int) -> str:
    header = log_doc["header"]
    metrics = log_doc["metrics"]
    return (
        f"scenario={header['scenario_id']} mode={header['mode']} seed={header['seed']} "
        f"state={metrics['final_state']} feasible={metrics['feasible']} "
        f"replans={metrics['n_replans']} exit={exit_code}"
    )


def _cmd_run(args) -> int:
    overrides = _parse_overrides(args.override)
    seed = _parse_seed(args.seed)
    path = _require_scenario(args)
    if args.url:
        doc = _load_document(path, overrides)
        reply = _post(args.url, "/scenario/run", {"scenario": doc, "mode": args.mode, "seed": seed})
        exit_code = int(reply["exit_code"])
        log_doc = reply["run_log"]
        if args.out:
            Path(args.out).write_bytes(_canon_bytes(log_doc))
        print(_summary_line(log_doc, exit_code))
        return exit_code

    log = run_scenario(path, args.mode, overrides, seed)
    if args.out:
        write_run_log(log, args.out)
    print(_summary_line(log.to_document(), log.exit_code()))
    return log.exit_code()


def _cmd_compare(args) -> int:
    overrides = _parse_overrides(args.override)
    seed = _parse_seed(args.seed)
    path = _require_scenario(args)
    if args.url:
        doc = _load_document(path, overrides)
        reply = _post(args.url, "/scenario/compare", {"scenario": doc, "seed": seed})
        exit_code = int(reply["exit_code"])
        report_doc = reply["report"]
        if args.out:
            Path(args.out).write_bytes(_canon_bytes(report_doc))
        summary = report_doc["summary"]
    else:
        report = compare_modes(path, overrides, seed)
        exit_code = report.exit_code()
        if args.out:
            Path(args.out).write_bytes(report.to_json_bytes())
        summary = report.summary()
    deltas = summary["deltas_adaptive_minus_static"]
    print(
        f"static: state={summary['static']['final_state']} replans={summary['static']['n_replans']}"
    )
    print(
        f"adaptive: state={summary['adaptive']['final_state']} replans={summary['adaptive']['n_replans']}"
    )
    printable = {k: v for k, v in deltas.items() if v is not None}
    print(f"deltas (adaptive - static): {json.dumps(printable, sort_keys=True)}")
    return exit_code


def _cmd_export(args) -> int:
    if args.log:
        log = read_run_log(args.log)
    else:
        overrides = _parse_overrides(args.override)
        seed = _parse_seed(args.seed)
        path = _require_scenario(args)
        log = run_scenario(path, args.mode, overrides, seed)
    out = export_trajectory(log, args.format, args.out)
    n = sum(1 for t in log.ticks if t.traj_time is not None)
    print(f"wrote {n} samples to {out}")
    return 0 if n > 0 or log.exit_code() == 0 else 1


def _cmd_validate(args) -> int:
    overrides = _parse_overrides(args.override)
    seed = _parse_seed(args.seed)
    path = _require_scenario(args)
    if args.url:
        doc = _load_document(path, overrides)
        reply = _post(args.url, "/scenario/validate", {"scenario": doc, "mode": args.mode, "seed": seed})
        if not reply["valid"]:
            print(f"invalid: {reply['error']}", file=sys.stderr)
            return 2
        print(f"ok: {reply['scenario_id']} digest={reply['config_digest']}")
        return 0
    doc = _load_document(path, overrides)
    scenario = scenario_from_document(doc, base_dir=path.parent)
    digest = config_digest(doc, args.mode, seed)
    print(f"ok: {scenario.scenario_id} digest={digest}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "compare": _cmd_compare,
        "export": _cmd_export,
        "validate-config": _cmd_validate,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
