"""Command-line front end.

Two modes of working:

* against a gateway (default): ``run`` posts the configuration and tails
  the event stream, which is how CI watches a scenario converge;
* fully local (``--local``): the run executes in-process, which needs no
  server and is what the benchmark scripts use.

``replay``, ``report``, and ``metrics`` only ever read event logs, so
they take either a run id (resolved under the data directory) or a
direct path to an ``events.jsonl`` file.

Environment: ``TAPELOOP_DATA_DIR`` relocates run storage,
``TAPELOOP_SERVER`` points at a default gateway, and
``TAPELOOP_BACKEND_KEY`` carries the credential for live LLM backends.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .bus import BusEvent, event_from_dict, read_log
from .domain import (
    DomainError,
    RunConfig,
    SpecValidationError,
    canonical_hash,
    to_jsonable,
    validate_specification,
)
from .hitl import ResolutionInvalid
from .llm import default_registry
from .metrics import (
    aggregate_table,
    compare_zero_shot,
    load_zero_shot,
    metrics_for_log_file,
    render_table_json,
    render_table_text,
)
from .tooling import (
    AdapterConfigError,
    ScenarioIncomplete,
    SchemaViolation,
    SubprocessToolchain,
    load_adapters,
    load_scenario,
)
from .workflow import (
    EventLog,
    RunExecutor,
    RunStatus,
    default_run_id,
    execute_scenario_run,
    replay_run,
    resolve_data_dir,
    validate_scenario,
    verify_signoff,
)

SERVER_ENV = "TAPELOOP_SERVER"
DEFAULT_SERVER = "http://127.0.0.1:8734"

EXIT_OK = 0
EXIT_FAILURE = 2
EXIT_ABORTED = 3


def _log_path(ref: str, data_dir: Path) -> Path:
    """A run id under the data directory, or a direct path to a log."""
    direct = Path(ref)
    if direct.is_file():
        return direct
    candidate = data_dir / "runs" / ref / "events.jsonl"
    if candidate.is_file():
        return candidate
    raise FileNotFoundError(f"no event log for {ref!r} (looked at {direct} and {candidate})")


def _describe(event: BusEvent) -> str:
    p = event.payload
    etype = p.get("type", "?")
    extra = ""
    if etype == "deliberation-finished":
        extra = f" {p.get('task_id')} accepted={p.get('accepted')} iterations={p.get('iterations_used')}"
    elif etype == "proposal":
        extra = f" {p.get('task_id')} iter {p.get('iteration')}"
    elif etype == "critique":
        extra = f" {p.get('task_id')} verdict={p.get('verdict')}"
    elif etype == "artifact-accepted":
        kind = p.get("kind")
        if kind == "rtl":
            data = p.get("data", {})
            extra = f" rtl {data.get('module_name')} rev {data.get('revision')}"
        else:
            extra = f" {kind} {p.get('entry_id', '')}"
    elif etype == "tool-report":
        extra = f" {p.get('kind')}"
    elif etype == "ticket-opened":
        t = p.get("ticket", {})
        extra = f" {t.get('ticket_id')} {t.get('trigger')}"
    elif etype == "resolution-applied":
        extra = f" {p.get('ticket_id')} {p.get('resolution', {}).get('kind')}"
    elif etype == "gate-checked":
        reasons = p.get("reasons", [])
        extra = " passed" if p.get("passed") else f" blocked ({len(reasons)} reasons)"
    elif etype == "phase-entered":
        extra = f" {p.get('phase')}"
    elif etype == "coverage-round":
        extra = f" round {p.get('round')} added={p.get('added')}"
    elif etype == "run-aborted":
        extra = f" {p.get('reason')}"
    return f"{event.seq:>5}  {event.granularity.value:<9} {event.sender:<18} {etype}{extra}"


def _print_events(events: Sequence[BusEvent], chat: bool) -> None:
    for event in events:
        if not chat and event.granularity.value == "chat":
            continue
        print(_describe(event))


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

class StdinResolutionSource:
    """Interactive source for live local runs: one JSON object per ticket.

    Prints the ticket to stderr and reads a single line of JSON from
    stdin.  EOF aborts the run deliberately, attributed to the operator.
    """

    def next_resolution(self, state: Any, ticket: Any, stage: Any) -> Any:
        sys.stderr.write(json.dumps(to_jsonable(ticket), indent=2, sort_keys=True) + "\n")
        sys.stderr.write("resolution json> ")
        sys.stderr.flush()
        line = sys.stdin.readline()
        if not line.strip():
            return stage({"kind": "abort", "reviewer": "operator", "effort_minutes": 0,
                          "note": "stdin closed"})
        while True:
            try:
                return stage(json.loads(line))
            except (json.JSONDecodeError, ResolutionInvalid, DomainError) as exc:
                sys.stderr.write(f"rejected: {exc}\nresolution json> ")
                sys.stderr.flush()
                line = sys.stdin.readline()
                if not line.strip():
                    return stage({"kind": "abort", "reviewer": "operator",
                                  "effort_minutes": 0, "note": "stdin closed"})


def _load_config(path: str, spec_design: str, scenario_path: str | None) -> tuple[RunConfig, dict]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise SpecValidationError([])
    extras = {k: raw.pop(k) for k in ("base_url", "model", "adapters") if k in raw}
    raw.setdefault("design_id", spec_design)
    raw.setdefault("backend_id", "scripted-mock")
    raw.setdefault("temperature", 0.2)
    config = RunConfig(
        design_id=raw["design_id"],
        backend_id=raw["backend_id"],
        temperature=raw["temperature"],
        random_seed=raw.get("random_seed", 0),
        iteration_threshold=raw.get("iteration_threshold", 5),
        coverage_target_pct=raw.get("coverage_target_pct", 95.0),
        step_budget=raw.get("step_budget", 10_000),
        scenario_path=scenario_path,
    )
    return config, extras


def _cmd_run(args: argparse.Namespace) -> int:
    spec_text = Path(args.spec).read_text(encoding="utf-8")
    try:
        spec = validate_specification(spec_text)
    except SpecValidationError as exc:
        for v in exc.violations:
            print(f"spec: {v.kind}({v.subject}): {v.detail}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        config, extras = _load_config(args.config, spec.design_id, args.scenario)
    except SpecValidationError as exc:
        for v in exc.violations:
            print(f"config: {v.kind}({v.subject}): {v.detail}", file=sys.stderr)
        return EXIT_FAILURE

    if not args.local:
        return _run_remote(args, config)

    data_dir = resolve_data_dir(args.data_dir)
    if args.scenario:
        try:
            scenario = load_scenario(args.scenario)
        except SchemaViolation as exc:
            print(exc, file=sys.stderr)
            return EXIT_FAILURE
        if scenario.design_id != spec.design_id:
            print(f"scenario is for {scenario.design_id!r}, spec defines {spec.design_id!r}",
                  file=sys.stderr)
            return EXIT_FAILURE
        scenario_spec = validate_specification(
            scenario.spec_path().read_text(encoding="utf-8")
        )
        if canonical_hash(to_jsonable(scenario_spec)) != canonical_hash(to_jsonable(spec)):
            print("scenario's spec file differs from --spec; refusing to run a mix",
                  file=sys.stderr)
            return EXIT_FAILURE
        state, log = execute_scenario_run(
            scenario,
            config.temperature,
            data_dir=data_dir,
            run_id=args.run_id,
            iteration_threshold=config.iteration_threshold,
            seed=config.random_seed,
        )
    else:
        state, log = _run_live(args, config, spec, extras, data_dir)
        if state is None:
            return EXIT_FAILURE

    _print_events(log.events(), chat=args.chat)
    print(f"\nrun {state.run_id}: {state.status.value}")
    if state.coverage is not None:
        print(f"coverage {state.coverage.consolidated_pct:.2f}% "
              f"(target {state.coverage_target():.1f}%), "
              f"waived {len(state.waived_locations)}")
    print(f"tickets {len(state.tickets)}, human minutes rtl/formal "
          f"{state.human_minutes_rtl}/{state.human_minutes_formal}")
    return EXIT_OK if state.status is RunStatus.SIGNED_OFF else EXIT_ABORTED


def _run_live(args, config, spec, extras, data_dir):
    """Drive a non-scripted run: registry backend + subprocess tools."""
    registry = default_registry()
    if config.backend_id == "scripted-mock":
        print("scripted-mock backend needs --scenario", file=sys.stderr)
        return None, None
    try:
        backend = registry.create(config.backend_id, **{
            k: v for k, v in extras.items() if k in ("base_url", "model")
        })
    except DomainError as exc:
        print(exc, file=sys.stderr)
        return None, None
    adapters_path = extras.get("adapters") or args.adapters
    if not adapters_path:
        print("live runs need an adapter config (--adapters or config 'adapters')",
              file=sys.stderr)
        return None, None
    try:
        adapters = load_adapters(adapters_path)
    except AdapterConfigError as exc:
        print(exc, file=sys.stderr)
        return None, None
    rid = args.run_id or default_run_id(config.design_id, config.temperature, config.random_seed)
    run_dir = data_dir / "runs" / rid
    run_dir.mkdir(parents=True, exist_ok=True)
    log = EventLog(run_dir / "events.jsonl")
    executor = RunExecutor(
        run_id=rid,
        config=config,
        spec=spec,
        backend=backend,
        toolchain=SubprocessToolchain(adapters, run_dir / "tools"),
        resolution_source=StdinResolutionSource(),
        log=log,
    )
    return executor.run(), log


def _run_remote(args: argparse.Namespace, config: RunConfig) -> int:
    import httpx

    if not args.scenario:
        print("remote runs are scripted; pass --scenario (or use --local)", file=sys.stderr)
        return EXIT_FAILURE
    server = args.server
    body = {
        "config": to_jsonable(config),
        "scenario": args.scenario,
    }
    if args.run_id:
        body["run_id"] = args.run_id
    with httpx.Client(base_url=server, timeout=60.0) as client:
        r = client.post("/runs", json=body)
        if r.status_code != 201:
            print(f"{server}/runs -> {r.status_code}: {r.text}", file=sys.stderr)
            return EXIT_FAILURE
        rid = r.json()["run_id"]
        print(f"run {rid} started on {server}")
        cursor = 1
        status = "running"
        while True:
            page = client.get(f"/runs/{rid}/events.json",
                              params={"from": cursor, "limit": 500}).json()
            events = page["events"]
            for raw in events:
                event = event_from_dict(raw)
                if args.chat or event.granularity.value != "chat":
                    print(_describe(event))
                etype = raw["payload"].get("type")
                if etype in ("signed-off", "run-aborted"):
                    status = "signed-off" if etype == "signed-off" else "aborted"
            if events:
                cursor = page["next_seq"]
            if status != "running":
                break
            summary = client.get(f"/runs/{rid}").json()
            if summary["status"] == "blocked-hitl":
                print(f"  [blocked on {summary['open_tickets']}; resolve via the console "
                      f"or POST {server}/runs/{rid}/escalations/<id>/resolution]")
                import time

                time.sleep(0.5)
    print(f"\nrun {rid}: {status}")
    return EXIT_OK if status == "signed-off" else EXIT_ABORTED


# ---------------------------------------------------------------------------
# replay / report / metrics / scenario / serve
# ---------------------------------------------------------------------------

def _cmd_replay(args: argparse.Namespace) -> int:
    data_dir = resolve_data_dir(args.data_dir)
    try:
        path = _log_path(args.run, data_dir)
        state, events = replay_run(path, verify_hashes=not args.no_verify)
    except (FileNotFoundError, DomainError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_FAILURE
    if args.events:
        _print_events(events, chat=args.chat)
    print(f"run {state.run_id}: {state.status.value} ({len(events)} events, "
          f"{'hashes verified' if not args.no_verify else 'hashes skipped'})")
    print(f"design {state.design_id}, phase {state.phase.value}, "
          f"properties {len(state.properties)}, tickets {len(state.tickets)}")
    if state.coverage is not None:
        print(f"coverage {state.coverage.consolidated_pct:.2f}%, "
              f"waived {len(state.waived_locations)}")
    print(f"state hash {canonical_hash(state)}")
    print(f"event digest {state.event_digest}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    data_dir = resolve_data_dir(args.data_dir)
    try:
        path = _log_path(args.run, data_dir)
        report = verify_signoff(read_log(path))
    except (FileNotFoundError, DomainError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_metrics(args: argparse.Namespace) -> int:
    data_dir = resolve_data_dir(args.data_dir)
    try:
        paths = [_log_path(ref, data_dir) for ref in args.runs]
        rows = [metrics_for_log_file(p) for p in paths]
        table = aggregate_table(rows)
    except (FileNotFoundError, DomainError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_FAILURE
    comparison = None
    if args.zero_shot:
        try:
            comparison = compare_zero_shot(rows, load_zero_shot(args.zero_shot))
        except (DomainError, ValueError, OSError) as exc:
            print(exc, file=sys.stderr)
            return EXIT_FAILURE
    if args.json:
        doc = json.loads(render_table_json(table))
        if comparison is not None:
            doc["zero_shot"] = to_jsonable(comparison)
        print(json.dumps(doc, indent=2, sort_keys=True))
        return EXIT_OK
    print(render_table_text(table))
    if comparison is not None:
        print()
        print("initial coverage vs zero-shot baseline:")
        for design, delta in sorted(comparison.deltas.items()):
            print(f"  {design:<10} {delta:+.2f}")
        print(f"  mean: {comparison.mean_mas_pct:.3f} vs {comparison.mean_zero_shot_pct:.3f} "
              f"({comparison.mean_delta_pct:+.3f})")
    return EXIT_OK


def _cmd_scenario(args: argparse.Namespace) -> int:
    failures = 0
    for ref in args.files:
        try:
            validate_scenario(ref)
        except (SchemaViolation, ScenarioIncomplete, OSError) as exc:
            failures += 1
            print(f"FAIL {ref}: {exc}")
        else:
            print(f"ok   {ref}")
    return EXIT_FAILURE if failures else EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(scenario_dir=args.scenario_dir, data_dir=args.data_dir)
    print(f"gateway on http://{args.host}:{args.port} "
          f"(scenarios from {args.scenario_dir})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    import os

    parser = argparse.ArgumentParser(
        prog="tapeloop",
        description="agent-driven RTL sign-off runs: execute, replay, audit, aggregate",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one run (gateway by default, --local for in-process)")
    run.add_argument("--config", required=True, help="JSON file with run configuration")
    run.add_argument("--spec", required=True, help="design specification document")
    run.add_argument("--scenario", help="scripted scenario file (required unless live backend)")
    run.add_argument("--local", action="store_true", help="execute in-process, no server")
    run.add_argument("--server", default=os.environ.get(SERVER_ENV, DEFAULT_SERVER))
    run.add_argument("--run-id", default=None)
    run.add_argument("--data-dir", default=None)
    run.add_argument("--adapters", default=None, help="tool adapter config for live runs")
    run.add_argument("--chat", action="store_true", help="include chat-granularity events")
    run.set_defaults(fn=_cmd_run)

    replay = sub.add_parser("replay", help="rebuild state from a log, verifying hashes")
    replay.add_argument("run", help="run id or path to events.jsonl")
    replay.add_argument("--data-dir", default=None)
    replay.add_argument("--events", action="store_true", help="print the event lines too")
    replay.add_argument("--chat", action="store_true")
    replay.add_argument("--no-verify", action="store_true", help="skip hash verification")
    replay.set_defaults(fn=_cmd_replay)

    report = sub.add_parser("report", help="verify and print a run's sign-off report")
    report.add_argument("run", help="run id or path to events.jsonl")
    report.add_argument("--data-dir", default=None)
    report.set_defaults(fn=_cmd_report)

    metrics = sub.add_parser("metrics", help="benchmark table over finished runs")
    msub = metrics.add_subparsers(dest="metrics_command", required=True)
    table = msub.add_parser("table", help="per-run rows plus unweighted means")
    table.add_argument("runs", nargs="+", help="run ids or log paths")
    table.add_argument("--data-dir", default=None)
    table.add_argument("--zero-shot", default=None, help="baseline json for the delta column")
    table.add_argument("--json", action="store_true")
    table.set_defaults(fn=_cmd_metrics)

    scenario = sub.add_parser("scenario", help="scenario file tools")
    ssub = scenario.add_subparsers(dest="scenario_command", required=True)
    validate = ssub.add_parser("validate", help="schema-check and dry-run all buckets")
    validate.add_argument("files", nargs="+")
    validate.set_defaults(fn=_cmd_scenario)

    serve = sub.add_parser("serve", help="start the HTTP gateway")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8734)
    serve.add_argument("--scenario-dir", default="scenarios")
    serve.add_argument("--data-dir", default=None)
    serve.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
