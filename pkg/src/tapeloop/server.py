"""HTTP gateway: scenario runs as resources, escalations as an inbox.

One process hosts many runs.  Each run executes on its own thread against
a :class:`~tapeloop.workflow.QueuedResolutionSource`, so a blocked run
sits in the escalation inbox until some client posts a resolution.  The
event log is exposed both as plain JSON pages and as a server-sent-event
stream; clients reconnect with ``from_seq`` and never miss an event
because the log is append-only and gapless.

The gateway holds no state of its own: every response is derived from
the run's event log or the executor's latest folded state.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from . import hitl
from .bus import BusEvent, EventLog
from .domain import DomainError, RunConfig, SpecValidationError, to_jsonable
from .hitl import ConflictingState, ResolutionInvalid, TicketStatus
from .llm import default_registry
from .tooling import Scenario, SchemaViolation, load_scenario
from .workflow import (
    QueuedResolutionSource,
    RunState,
    RunStatus,
    default_run_id,
    execute_scenario_run,
    resolve_data_dir,
    temperature_bucket,
    transcript_view,
)

TERMINAL_EVENTS = ("signed-off", "run-aborted")

#: submit() blocks at most this long before the gateway reports a stuck run
SUBMIT_TIMEOUT_S = 30.0


@dataclass
class RunHandle:
    """One executing (or finished) run owned by the gateway."""

    run_id: str
    scenario: Scenario
    temperature: float
    seed: int
    log: EventLog
    source: QueuedResolutionSource
    abort_flag: threading.Event
    thread: threading.Thread | None = None
    error: str | None = None
    _state: RunState | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def state(self) -> RunState | None:
        with self._lock:
            return self._state

    def on_state(self, state: RunState) -> None:
        with self._lock:
            self._state = state

    def summary(self) -> dict[str, Any]:
        state = self.state
        base: dict[str, Any] = {
            "run_id": self.run_id,
            "design_id": self.scenario.design_id,
            "scenario": self.scenario.path,
            "temperature": self.temperature,
            "bucket": temperature_bucket(self.temperature).value,
            "seed": self.seed,
            "events": len(self.log),
            "latest_seq": len(self.log),
            "error": self.error,
        }
        if state is None:
            base.update({"status": "starting", "phase": None, "open_ticket_count": 0})
            return base
        base.update(
            {
                "status": state.public_state(),
                "phase": state.phase.value,
                "properties": len(state.properties),
                "artifacts": [a.module_name for a in state.artifacts],
                "open_counterexamples": len(state.counterexamples),
                "coverage_pct": state.coverage.consolidated_pct if state.coverage else None,
                "coverage_target_pct": state.coverage_target(),
                "waived_locations": list(state.waived_locations),
                "open_tickets": [t.ticket_id for t in state.open_tickets()],
                "open_ticket_count": len(state.open_tickets()),
                "tickets": len(state.tickets),
                "human_minutes_rtl": state.human_minutes_rtl,
                "human_minutes_formal": state.human_minutes_formal,
                "signed_off": state.status is RunStatus.SIGNED_OFF,
            }
        )
        return base


class RunRegistry:
    def __init__(self, scenario_dir: Path, data_dir: Path | None):
        self.scenario_dir = scenario_dir
        self.data_dir = data_dir
        self._runs: dict[str, RunHandle] = {}
        self._lock = threading.Lock()

    def resolve_scenario(self, ref: str) -> Scenario:
        """Accept a bare name (looked up in scenario_dir) or a path."""
        candidate = Path(ref)
        if not candidate.suffix:
            candidate = self.scenario_dir / f"{ref}.json"
        if not candidate.exists():
            candidate = self.scenario_dir / ref
        if not candidate.exists():
            raise FileNotFoundError(ref)
        return load_scenario(candidate)

    def start(self, scenario: Scenario, temperature: float, seed: int,
              run_id: str | None) -> RunHandle:
        rid = run_id or default_run_id(scenario.design_id, temperature, seed)
        with self._lock:
            if rid in self._runs:
                raise ConflictingState(rid, "run id already in use")
            handle = RunHandle(
                run_id=rid,
                scenario=scenario,
                temperature=temperature,
                seed=seed,
                log=EventLog(),
                source=QueuedResolutionSource(),
                abort_flag=threading.Event(),
            )
            self._runs[rid] = handle

        def drive() -> None:
            try:
                execute_scenario_run(
                    scenario,
                    temperature,
                    data_dir=self.data_dir,
                    run_id=rid,
                    seed=seed,
                    resolution_source=handle.source,
                    abort_flag=handle.abort_flag,
                    state_listener=handle.on_state,
                    log=handle.log,
                )
            except Exception as exc:  # surfaced via the summary, not lost
                handle.error = f"{type(exc).__name__}: {exc}"

        thread = threading.Thread(target=drive, name=f"run-{rid}", daemon=True)
        handle.thread = thread
        thread.start()
        return handle

    def get(self, run_id: str) -> RunHandle:
        with self._lock:
            handle = self._runs.get(run_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}")
        return handle

    def all(self) -> list[RunHandle]:
        with self._lock:
            return list(self._runs.values())


def _event_dict(event: BusEvent) -> dict[str, Any]:
    return json.loads(event.to_line())


def _sse_frame(event: BusEvent) -> str:
    return f"id: {event.seq}\nevent: {event.granularity.value}\ndata: {event.to_line()}\n\n"


def _ticket_view(handle: RunHandle, ticket: Any) -> dict[str, Any]:
    view = to_jsonable(ticket)
    view["run_id"] = handle.run_id
    view["design_id"] = handle.scenario.design_id
    return view


def create_app(
    scenario_dir: str | Path = "scenarios",
    data_dir: str | Path | None = None,
    persist: bool = False,
) -> FastAPI:
    """Build the gateway app.

    ``persist=False`` keeps run logs in memory only, which is what the
    test suite and the demo console want; pass a directory to keep JSONL
    logs and sign-off reports on disk.
    """
    registry = RunRegistry(
        Path(scenario_dir),
        resolve_data_dir(data_dir) if (persist or data_dir is not None) else None,
    )
    app = FastAPI(title="tapeloop gateway", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.registry = registry

    @app.get("/health")
    def health() -> dict[str, Any]:
        return {"ok": True, "runs": len(registry.all())}

    @app.get("/scenarios")
    def scenarios() -> list[dict[str, Any]]:
        out = []
        for path in sorted(registry.scenario_dir.glob("*.json")):
            try:
                sc = load_scenario(path)
            except (SchemaViolation, OSError):
                continue
            out.append(
                {
                    "name": path.stem,
                    "path": str(path),
                    "design_id": sc.design_id,
                    "description": sc.description,
                    "expected_status": sc.expected.get("status"),
                }
            )
        return out

    @app.post("/runs", status_code=201)
    def create_run(body: dict[str, Any]) -> dict[str, Any]:
        ref = body.get("scenario")
        if not isinstance(ref, str) or not ref:
            raise HTTPException(status_code=422, detail="body needs a 'scenario' name or path")
        try:
            scenario = registry.resolve_scenario(ref)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=f"scenario not found: {exc}") from exc
        except SchemaViolation as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

        # the body carries a full config object, or bare temperature/seed
        # shorthand; either way the ranges are checked before anything runs
        wire = dict(body.get("config") or {})
        wire.setdefault("design_id", scenario.design_id)
        wire.setdefault("backend_id", "scripted-mock")
        wire.setdefault("temperature", body.get("temperature", 0.2))
        wire.setdefault("random_seed", body.get("seed", 0))
        if not isinstance(wire.get("temperature"), (int, float)):
            raise HTTPException(status_code=422, detail="temperature must be a number")
        if not isinstance(wire.get("random_seed"), int):
            raise HTTPException(status_code=422, detail="random_seed must be an integer")
        try:
            config = RunConfig(
                design_id=str(wire["design_id"]),
                backend_id=str(wire["backend_id"]),
                temperature=float(wire["temperature"]),
                random_seed=wire["random_seed"],
                iteration_threshold=wire.get("iteration_threshold", 5),
                coverage_target_pct=wire.get("coverage_target_pct", 95.0),
                scenario_path=str(scenario.path),
            )
        except SpecValidationError as exc:
            raise HTTPException(
                status_code=400,
                detail={"violations": [to_jsonable(v) for v in exc.violations]},
            ) from exc
        if config.backend_id not in default_registry().known():
            raise HTTPException(
                status_code=404, detail=f"unknown backend {config.backend_id!r}"
            )
        if config.backend_id != "scripted-mock":
            raise HTTPException(
                status_code=422,
                detail="the gateway executes scripted runs; use the CLI for live backends",
            )
        if config.design_id != scenario.design_id:
            raise HTTPException(
                status_code=400,
                detail={"violations": [{"kind": "design-mismatch", "subject": config.design_id,
                                        "detail": f"scenario is for {scenario.design_id!r}"}]},
            )
        try:
            handle = registry.start(scenario, config.temperature, config.random_seed,
                                    body.get("run_id"))
        except ConflictingState as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except DomainError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return handle.summary()

    @app.get("/runs")
    def list_runs() -> list[dict[str, Any]]:
        return [h.summary() for h in registry.all()]

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict[str, Any]:
        return registry.get(run_id).summary()

    @app.get("/runs/{run_id}/events.json")
    def get_events(
        run_id: str,
        from_seq: int = Query(1, ge=1, alias="from"),
        limit: int = Query(500, ge=1, le=5000),
    ) -> dict[str, Any]:
        handle = registry.get(run_id)
        events = handle.log.events_from(from_seq)[:limit]
        return {
            "run_id": run_id,
            "events": [_event_dict(e) for e in events],
            "next_seq": (events[-1].seq + 1) if events else from_seq,
            "total": len(handle.log),
        }

    @app.get("/runs/{run_id}/events")
    def stream_events(run_id: str, request: Request,
                      from_seq: int = Query(1, ge=1, alias="from")):
        handle = registry.get(run_id)

        def tail() -> Iterator[str]:
            cursor = from_seq - 1
            while True:
                batch = handle.log.events_from(cursor + 1)
                for event in batch:
                    cursor = event.seq
                    yield _sse_frame(event)
                    if event.payload.get("type") in TERMINAL_EVENTS:
                        return
                if handle.error is not None:
                    yield f"event: run-error\ndata: {json.dumps(handle.error)}\n\n"
                    return
                if not handle.log.wait_beyond(cursor, timeout=2.0):
                    yield ": keep-alive\n\n"

        return StreamingResponse(
            tail(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.get("/runs/{run_id}/transcript")
    def get_transcript(run_id: str) -> list[dict[str, Any]]:
        handle = registry.get(run_id)
        return transcript_view(handle.log.events())

    @app.get("/runs/{run_id}/report")
    def get_report(run_id: str) -> dict[str, Any]:
        handle = registry.get(run_id)
        state = handle.state
        if state is None or state.report is None:
            raise HTTPException(status_code=409, detail="run has not signed off")
        return state.report

    @app.post("/runs/{run_id}/abort", status_code=202)
    def abort_run(run_id: str) -> dict[str, Any]:
        handle = registry.get(run_id)
        handle.abort_flag.set()
        state = handle.state
        # a run parked on an open ticket never rechecks the flag on its
        # own; answer the ticket with an abort to wake it
        if state is not None and state.status is RunStatus.BLOCKED:
            open_tickets = state.open_tickets()
            if open_tickets:
                try:
                    handle.source.submit(
                        open_tickets[0].ticket_id,
                        {"kind": "abort", "reviewer": "api", "effort_minutes": 0,
                         "note": "aborted via gateway"},
                        timeout=SUBMIT_TIMEOUT_S,
                    )
                except (DomainError, TimeoutError):
                    pass
        return {"run_id": run_id, "aborting": True}

    @app.get("/runs/{run_id}/escalations")
    def run_escalations(run_id: str, status: str = Query("all")) -> list[dict[str, Any]]:
        handle = registry.get(run_id)
        state = handle.state
        if state is None:
            return []
        tickets = state.tickets
        if status == "open":
            tickets = tuple(t for t in tickets if t.status is TicketStatus.OPEN)
        return [_ticket_view(handle, t) for t in tickets]

    @app.get("/escalations")
    def all_escalations(status: str = Query("open")) -> list[dict[str, Any]]:
        out: list[dict[str, Any]] = []
        for handle in registry.all():
            state = handle.state
            if state is None:
                continue
            for ticket in state.tickets:
                if status == "open" and ticket.status is not TicketStatus.OPEN:
                    continue
                out.append(_ticket_view(handle, ticket))
        return out

    def _submit_resolution(handle: RunHandle, ticket_id: str, body: dict[str, Any]) -> dict[str, Any]:
        state = handle.state
        ticket = None
        if state is not None:
            ticket = next((t for t in state.tickets if t.ticket_id == ticket_id), None)
        if ticket is None:
            raise HTTPException(
                status_code=404, detail=f"no ticket {ticket_id!r} on {handle.run_id}"
            )
        # already answered, or nobody left to consume the queue: reject
        # here instead of parking the client on a dead submission
        if ticket.status is not TicketStatus.OPEN or handle.error is not None or (
            state is not None and state.status in (RunStatus.SIGNED_OFF, RunStatus.ABORTED)
        ):
            raise HTTPException(status_code=409, detail=f"ticket {ticket_id} is not open")
        try:
            handle.source.submit(ticket_id, body, timeout=SUBMIT_TIMEOUT_S)
        except (ResolutionInvalid, hitl.PatchFailed) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except ConflictingState as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except TimeoutError as exc:
            raise HTTPException(status_code=504, detail=str(exc)) from exc
        return {"run_id": handle.run_id, "ticket_id": ticket_id, "accepted": True}

    @app.post("/runs/{run_id}/escalations/{ticket_id}/resolution")
    def resolve_ticket(run_id: str, ticket_id: str, body: dict[str, Any]) -> dict[str, Any]:
        return _submit_resolution(registry.get(run_id), ticket_id, body)

    @app.post("/escalations/{ticket_ref}/resolution")
    def resolve_by_ref(ticket_ref: str, body: dict[str, Any]) -> dict[str, Any]:
        """Resolve by ``run_id:ticket_id``, or a bare ticket id if unambiguous."""
        if ":" in ticket_ref:
            run_id, _, ticket_id = ticket_ref.partition(":")
            return _submit_resolution(registry.get(run_id), ticket_id, body)
        matches = [
            h for h in registry.all()
            if h.state is not None
            and any(t.ticket_id == ticket_ref and t.status is TicketStatus.OPEN
                    for t in h.state.tickets)
        ]
        if len(matches) > 1:
            raise HTTPException(
                status_code=409,
                detail=f"ticket id {ticket_ref!r} is open on several runs; "
                       f"use run_id:ticket_id",
            )
        if matches:
            return _submit_resolution(matches[0], ticket_ref, body)
        # no open match: find a closed one for an honest 409, else 404
        for h in registry.all():
            if h.state is not None and any(t.ticket_id == ticket_ref for t in h.state.tickets):
                return _submit_resolution(h, ticket_ref, body)
        raise HTTPException(status_code=404, detail=f"no ticket {ticket_ref!r}")

    return app


def main(argv: list[str] | None = None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="serve the run gateway")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8734)
    parser.add_argument("--scenario-dir", default="scenarios")
    parser.add_argument("--data-dir", default=None,
                        help="persist event logs under this directory")
    args = parser.parse_args(argv)
    app = create_app(scenario_dir=args.scenario_dir, data_dir=args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
