"""Run state machine, event fold, executor, sign-off gate, and replay.

The architecture is event-sourced.  The executor never mutates state
directly: it decides on an event, folds it through :func:`apply_event`
(a pure function), and appends it to the log together with the canonical
hash of the resulting state.  Replay is the same fold over the recorded
events, so a live run and its replay cannot disagree without tripping a
hash mismatch.  State additionally carries a rolling digest over every
event's bytes, which makes any post-hoc edit of any logged payload
detectable even when the edit would not change domain state.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol, Sequence

from . import agents, hitl
from .agents import (
    HUMAN,
    ORCHESTRATOR,
    DeliberationEngine,
    DeliberationOutcome,
    build_default_roles,
    critic_roles,
)
from .bus import (
    BusEvent,
    EventLog,
    Granularity,
    GroupChatManager,
    groupchat_topic,
    hitl_topic,
    read_log,
    replay_fold,
    tool_topic,
)
from .domain import (
    CexRecord,
    CoverageSnapshot,
    DesignSpecification,
    DomainError,
    LintFinding,
    LintSeverity,
    PropertyProvenance,
    PropertyStatus,
    RtlArtifact,
    RunConfig,
    ArtifactProvenance,
    SvaProperty,
    artifact_from_dict,
    canonical_hash,
    canonical_json,
    cex_from_dict,
    config_from_dict,
    coverage_from_dict,
    lint_finding_from_dict,
    microarchitecture_from_dict,
    spec_from_dict,
    to_jsonable,
    validate_specification,
    vplan_from_dict,
)
from .hitl import (
    ConflictingState,
    EscalationTicket,
    Resolution,
    ResolutionInvalid,
    ResolutionKind,
    TicketStatus,
    TicketTrigger,
    apply_unified_diff,
    next_ticket_id,
    parse_resolution,
    ticket_from_dict,
)
from .llm import Backend, ScriptedMockBackend, build_workflow_definition, temperature_bucket
from .tooling import (
    Scenario,
    ScenarioIncomplete,
    ScheduleExhausted,
    ToolInvocationError,
    load_scenario,
    parse_coverage_report,
    parse_formal_report,
    parse_lint_report,
)

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "TAPELOOP_DATA_DIR"

#: Events kept in reserve so escalation and abort can still be recorded
#: after the step budget trips.
BUDGET_RESERVE = 16

PHASES = ("planning", "development", "execution")


def resolve_data_dir(explicit: str | Path | None = None) -> Path:
    if explicit is not None:
        return Path(explicit)
    return Path(os.environ.get(DATA_DIR_ENV, "tapeloop-data"))


class Phase(str, Enum):
    PLANNING = "planning"
    DEVELOPMENT = "development"
    EXECUTION = "execution"


class RunStatus(str, Enum):
    RUNNING = "running"
    BLOCKED = "blocked-hitl"
    SIGNED_OFF = "signed-off"
    ABORTED = "aborted"


class ReplayError(DomainError):
    pass


class SignOffUnsound(DomainError):
    """A recorded sign-off does not pass the gate against its own state."""


class GateFailed(DomainError):
    def __init__(self, reasons: Sequence[str]):
        self.reasons = tuple(reasons)
        super().__init__("sign-off gate failed: " + "; ".join(reasons))


class ScenarioDefect(DomainError):
    """A scripted scenario asked the engine to do something invalid."""


# ---------------------------------------------------------------------------
# Run state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunState:
    run_id: str
    design_id: str
    phase: Phase
    status: RunStatus
    definition_hash: str
    config: RunConfig
    spec: DesignSpecification
    event_digest: str
    microarchitecture_raw: str = ""
    microarchitecture: Any = None
    vplan: Any = None
    artifacts: tuple[RtlArtifact, ...] = ()
    properties: tuple[SvaProperty, ...] = ()
    counterexamples: tuple[CexRecord, ...] = ()
    lint_run_count: int = 0
    formal_run_count: int = 0
    coverage_run_count: int = 0
    review_count: int = 0
    last_lint: tuple[LintFinding, ...] | None = None
    last_review: dict[str, Any] | None = None
    coverage: CoverageSnapshot | None = None
    waived_locations: tuple[str, ...] = ()
    tickets: tuple[EscalationTicket, ...] = ()
    closure_round_count: int = 0
    fruitless_closure_rounds: int = 0
    human_minutes_rtl: int = 0
    human_minutes_formal: int = 0
    gate_reasons: tuple[str, ...] = ()
    report: dict[str, Any] | None = None

    # -- views ---------------------------------------------------------

    def public_state(self) -> str:
        if self.status in (RunStatus.SIGNED_OFF, RunStatus.ABORTED, RunStatus.BLOCKED):
            return self.status.value
        return self.phase.value

    def artifact(self, module_name: str) -> RtlArtifact | None:
        for a in self.artifacts:
            if a.module_name == module_name:
                return a
        return None

    def property_by_id(self, property_id: str) -> SvaProperty | None:
        for p in self.properties:
            if p.property_id == property_id:
                return p
        return None

    def blocking_lint(self) -> tuple[LintFinding, ...]:
        if self.last_lint is None:
            return ()
        return tuple(f for f in self.last_lint if f.blocks_sign_off)

    def open_tickets(self) -> tuple[EscalationTicket, ...]:
        return tuple(t for t in self.tickets if t.status is TicketStatus.OPEN)

    def coverage_target(self) -> float:
        return self.spec.coverage_target_pct


def _advance_digest(prev: str, event: BusEvent) -> str:
    import hashlib

    body = canonical_json(
        {
            "seq": event.seq,
            "granularity": event.granularity.value,
            "sender": event.sender,
            "topic": event.topic,
            "payload": event.payload,
        }
    )
    return hashlib.sha256((prev + body).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# The event fold
# ---------------------------------------------------------------------------

def apply_event(state: RunState | None, event: BusEvent) -> RunState:
    """Pure transition: fold one logged event into run state.

    Total over every event a correct executor can emit; anything else is a
    corrupt log and raises :class:`ReplayError`.
    """
    etype = event.payload.get("type")
    if state is None:
        if etype != "run-created":
            raise ReplayError(f"log must start with run-created, got {etype!r} at seq {event.seq}")
        payload = event.payload
        state = RunState(
            run_id=payload["run_id"],
            design_id=payload["spec"]["design_id"],
            phase=Phase.PLANNING,
            status=RunStatus.RUNNING,
            definition_hash=payload["definition_hash"],
            config=config_from_dict(payload["config"]),
            spec=spec_from_dict(payload["spec"]),
            event_digest="",
        )
        return replace(state, event_digest=_advance_digest("", event))

    new = _apply_semantic(state, event, etype)
    return replace(new, event_digest=_advance_digest(state.event_digest, event))


def _apply_semantic(state: RunState, event: BusEvent, etype: str | None) -> RunState:
    payload = event.payload
    if etype in ("proposal", "critique", "deliberation-started", "deliberation-finished",
                 "tasks-dispatched", "tool-failed", "gate-checked"):
        if etype == "gate-checked":
            return replace(state, gate_reasons=tuple(payload.get("reasons", [])))
        return state

    if etype == "run-created":
        raise ReplayError(f"duplicate run-created at seq {event.seq}")

    if etype == "phase-entered":
        return replace(state, phase=Phase(payload["phase"]))

    if etype == "artifact-accepted":
        return _apply_artifact(state, payload, event.seq)

    if etype == "property-updated":
        return _apply_property_update(state, payload, event.seq)

    if etype == "properties-reset":
        return _reset_properties(state, tuple(payload["property_ids"]), event.seq)

    if etype == "tool-report":
        return _apply_tool_report(state, payload, event.seq)

    if etype == "design-review":
        return replace(
            state,
            review_count=state.review_count + 1,
            last_review={
                "functional_pass": payload["functional_pass"],
                "synthesizable": payload["synthesizable"],
                "placeholders_present": payload["placeholders_present"],
                "notes": payload.get("notes", ""),
            },
        )

    if etype == "ticket-opened":
        ticket = ticket_from_dict(payload["ticket"])
        if any(t.ticket_id == ticket.ticket_id for t in state.tickets):
            raise ReplayError(f"duplicate ticket {ticket.ticket_id} at seq {event.seq}")
        return replace(state, tickets=state.tickets + (ticket,), status=RunStatus.BLOCKED)

    if etype == "resolution-applied":
        return _apply_resolution(state, payload, event.seq)

    if etype == "coverage-round":
        return replace(
            state,
            closure_round_count=payload["round"],
            fruitless_closure_rounds=payload["fruitless_rounds"],
        )

    if etype == "signed-off":
        return replace(state, status=RunStatus.SIGNED_OFF, report=dict(payload["report"]))

    if etype == "run-aborted":
        return replace(state, status=RunStatus.ABORTED)

    raise ReplayError(f"unknown event type {etype!r} at seq {event.seq}")


def _apply_artifact(state: RunState, payload: dict[str, Any], seq: int) -> RunState:
    kind = payload["kind"]
    if kind == "microarchitecture":
        return replace(
            state,
            microarchitecture=microarchitecture_from_dict(payload["data"]),
            microarchitecture_raw=payload["raw_text"],
        )
    if kind == "vplan":
        return replace(state, vplan=vplan_from_dict(payload["data"]))
    if kind == "rtl":
        incoming = artifact_from_dict(payload["data"])
        existing = state.artifact(incoming.module_name)
        if existing is None:
            if incoming.revision != 1:
                raise ReplayError(f"new module {incoming.module_name} must start at revision 1 (seq {seq})")
            arts = state.artifacts + (incoming,)
        else:
            if incoming.revision != existing.revision + 1:
                raise ReplayError(
                    f"module {incoming.module_name} revision {incoming.revision} "
                    f"does not follow {existing.revision} (seq {seq})"
                )
            arts = tuple(incoming if a.module_name == incoming.module_name else a for a in state.artifacts)
            # source changed: recorded counterexamples no longer describe this RTL
            state = _invalidate_cexs(replace(state, artifacts=arts))
            return state
        return replace(state, artifacts=arts)
    if kind == "properties":
        existing_ids = {p.property_id for p in state.properties}
        fresh: list[SvaProperty] = []
        for item in payload["properties"]:
            if item["property_id"] in existing_ids:
                raise ReplayError(f"duplicate property id {item['property_id']} at seq {seq}")
            existing_ids.add(item["property_id"])
            fresh.append(
                SvaProperty(
                    property_id=item["property_id"],
                    vplan_entry_id=payload["entry_id"],
                    body_text=item["body_text"],
                    status=PropertyStatus.UNCHECKED,
                    provenance=PropertyProvenance(payload.get("provenance", "agent-generated")),
                )
            )
        return replace(state, properties=state.properties + tuple(fresh))
    raise ReplayError(f"unknown artifact kind {kind!r} at seq {seq}")


def _invalidate_cexs(state: RunState) -> RunState:
    props = tuple(
        p.with_status(PropertyStatus.UNCHECKED) if p.status is PropertyStatus.CEX else p
        for p in state.properties
    )
    return replace(state, properties=props, counterexamples=())


def _apply_property_update(state: RunState, payload: dict[str, Any], seq: int) -> RunState:
    pid = payload["property_id"]
    target = state.property_by_id(pid)
    if target is None:
        raise ReplayError(f"property-updated names unknown property {pid} at seq {seq}")
    updated = SvaProperty(
        property_id=pid,
        vplan_entry_id=target.vplan_entry_id,
        body_text=payload["body_text"],
        status=PropertyStatus.UNCHECKED,
        provenance=PropertyProvenance(payload.get("provenance", target.provenance.value)),
    )
    props = tuple(updated if p.property_id == pid else p for p in state.properties)
    cexs = tuple(c for c in state.counterexamples if c.property_id != pid)
    return replace(state, properties=props, counterexamples=cexs)


def _reset_properties(state: RunState, ids: tuple[str, ...], seq: int) -> RunState:
    id_set = set(ids)
    props = []
    for p in state.properties:
        if p.property_id in id_set:
            props.append(p.with_status(PropertyStatus.UNCHECKED))
        else:
            props.append(p)
    cexs = tuple(c for c in state.counterexamples if c.property_id not in id_set)
    return replace(state, properties=tuple(props), counterexamples=cexs)


def _apply_tool_report(state: RunState, payload: dict[str, Any], seq: int) -> RunState:
    kind = payload["kind"]
    parsed = payload["parsed"]
    if kind == "lint":
        findings = tuple(lint_finding_from_dict(f) for f in parsed["findings"])
        return replace(state, last_lint=findings, lint_run_count=state.lint_run_count + 1)
    if kind == "formal":
        props = list(state.properties)
        cexs = list(state.counterexamples)
        by_id = {p.property_id: i for i, p in enumerate(props)}
        for verdict in parsed["verdicts"]:
            pid = verdict["property_id"]
            if pid not in by_id:
                raise ReplayError(f"formal verdict for unknown property {pid} at seq {seq}")
            idx = by_id[pid]
            status = PropertyStatus(verdict["status"])
            props[idx] = props[idx].with_status(status)
            if status is PropertyStatus.CEX:
                cexs.append(cex_from_dict(verdict["cex"]))
        return replace(
            state,
            properties=tuple(props),
            counterexamples=tuple(cexs),
            formal_run_count=state.formal_run_count + 1,
        )
    if kind == "coverage":
        snapshot = coverage_from_dict(parsed["snapshot"])
        waived = set(state.waived_locations)
        merged = CoverageSnapshot(
            code_pct=snapshot.code_pct,
            assertion_pct=snapshot.assertion_pct,
            functional_pct=snapshot.functional_pct,
            uncovered=snapshot.uncovered,
            unreachable_waived=tuple(l for l in snapshot.uncovered if l in waived),
        )
        return replace(state, coverage=merged, coverage_run_count=state.coverage_run_count + 1)
    raise ReplayError(f"unknown tool-report kind {kind!r} at seq {seq}")


def _apply_resolution(state: RunState, payload: dict[str, Any], seq: int) -> RunState:
    ticket_id = payload["ticket_id"]
    resolution = hitl.resolution_from_dict(payload["resolution"])
    effects = payload.get("effects", {})
    matched = [t for t in state.tickets if t.ticket_id == ticket_id]
    if not matched:
        raise ReplayError(f"resolution for unknown ticket {ticket_id} at seq {seq}")
    ticket = matched[0]
    if ticket.status is not TicketStatus.OPEN:
        raise ReplayError(f"resolution for closed ticket {ticket_id} at seq {seq}")
    tickets = tuple(
        t.resolved_with(resolution) if t.ticket_id == ticket_id else t for t in state.tickets
    )
    state = replace(state, tickets=tickets)

    ledger = hitl.MINUTES_LEDGER[resolution.kind]
    if ledger == "rtl":
        state = replace(state, human_minutes_rtl=state.human_minutes_rtl + resolution.effort_minutes)
    elif ledger == "formal":
        state = replace(state, human_minutes_formal=state.human_minutes_formal + resolution.effort_minutes)

    kind = resolution.kind
    if kind is ResolutionKind.ABORT:
        return replace(state, status=RunStatus.ABORTED)

    if kind is ResolutionKind.PATCH_RTL:
        existing = state.artifact(resolution.module_name)
        if existing is None:
            raise ReplayError(f"patch for unknown module {resolution.module_name} at seq {seq}")
        patched = RtlArtifact(
            module_name=existing.module_name,
            source_text=effects["new_source"],
            revision=existing.revision + 1,
            provenance=ArtifactProvenance.HUMAN_PATCHED,
            source_language_tag=existing.source_language_tag,
        )
        arts = tuple(patched if a.module_name == patched.module_name else a for a in state.artifacts)
        state = _invalidate_cexs(replace(state, artifacts=arts))
    elif kind is ResolutionKind.REPLACE_PROPERTIES:
        by_id = {item["property_id"]: item["body_text"] for item in resolution.properties}
        props = []
        for p in state.properties:
            if p.property_id in by_id:
                props.append(
                    SvaProperty(
                        property_id=p.property_id,
                        vplan_entry_id=p.vplan_entry_id,
                        body_text=by_id[p.property_id],
                        status=PropertyStatus.UNCHECKED,
                        provenance=PropertyProvenance.HUMAN_EDITED,
                    )
                )
            else:
                props.append(p)
        touched = set(by_id)
        cexs = tuple(c for c in state.counterexamples if c.property_id not in touched)
        state = replace(state, properties=tuple(props), counterexamples=cexs)
    elif kind is ResolutionKind.REMOVE_PROPERTIES:
        drop = set(resolution.property_ids)
        unknown = drop - {p.property_id for p in state.properties}
        if unknown:
            raise ReplayError(f"remove-properties names unknown ids {sorted(unknown)} at seq {seq}")
        props = tuple(p for p in state.properties if p.property_id not in drop)
        cexs = tuple(c for c in state.counterexamples if c.property_id not in drop)
        state = replace(state, properties=props, counterexamples=cexs)
    elif kind is ResolutionKind.ADD_PROPERTIES:
        existing_ids = {p.property_id for p in state.properties}
        fresh = []
        for item in resolution.properties:
            if item["property_id"] in existing_ids:
                raise ReplayError(f"add-properties reuses id {item['property_id']} at seq {seq}")
            fresh.append(
                SvaProperty(
                    property_id=item["property_id"],
                    vplan_entry_id=effects.get("entry_id", "human"),
                    body_text=item["body_text"],
                    status=PropertyStatus.UNCHECKED,
                    provenance=PropertyProvenance.HUMAN_ADDED,
                )
            )
        state = replace(state, properties=state.properties + tuple(fresh))
    elif kind is ResolutionKind.WAIVE_UNREACHABLE:
        waived = tuple(dict.fromkeys(state.waived_locations + resolution.waived_locations))
        state = replace(state, waived_locations=waived)
        if state.coverage is not None:
            waived_set = set(waived)
            cov = state.coverage
            state = replace(
                state,
                coverage=CoverageSnapshot(
                    code_pct=cov.code_pct,
                    assertion_pct=cov.assertion_pct,
                    functional_pct=cov.functional_pct,
                    uncovered=cov.uncovered,
                    unreachable_waived=tuple(l for l in cov.uncovered if l in waived_set),
                ),
            )
    elif kind is ResolutionKind.EDIT_SPEC:
        state = replace(state, spec=spec_from_dict(effects["spec"]))

    return replace(state, status=RunStatus.RUNNING, fruitless_closure_rounds=0)


# ---------------------------------------------------------------------------
# Sign-off gate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GateResult:
    passed: bool
    reasons: tuple[str, ...]


def check_gate(state: RunState) -> GateResult:
    """Evaluate the sign-off gate against current state.

    Passing requires, all at once: lint evidence with zero fatal or error
    findings; a non-empty property set with every property proven or
    waived; coverage evidence whose effective consolidated value meets the
    target (waiving every uncovered location counts as 100); and no open
    tickets.
    """
    reasons: list[str] = []

    if state.last_lint is None:
        reasons.append("no-lint-evidence")
    else:
        blocking = state.blocking_lint()
        if blocking:
            reasons.append(f"lint-blocking-findings:{len(blocking)}")

    if not state.properties:
        reasons.append("no-properties")
    for p in state.properties:
        if p.status not in (PropertyStatus.PROVEN, PropertyStatus.WAIVED):
            reasons.append(f"property-unproven:{p.property_id}:{p.status.value}")

    if state.coverage is None:
        reasons.append("no-coverage-evidence")
    else:
        effective = state.coverage.effective_consolidated_pct()
        target = state.coverage_target()
        if effective < target:
            reasons.append(f"coverage-below-target:{effective!r}<{target!r}")

    open_tickets = state.open_tickets()
    if open_tickets:
        reasons.append(f"open-tickets:{len(open_tickets)}")

    return GateResult(passed=not reasons, reasons=tuple(reasons))


def build_signoff_report(state: RunState, event_count: int) -> dict[str, Any]:
    assert state.coverage is not None and state.last_lint is not None
    sev = {s: 0 for s in LintSeverity}
    for f in state.last_lint:
        sev[f.severity] += 1
    by_status = {s.value: 0 for s in PropertyStatus}
    by_prov = {p.value: 0 for p in PropertyProvenance}
    for p in state.properties:
        by_status[p.status.value] += 1
        by_prov[p.provenance.value] += 1
    cov = state.coverage
    return {
        "run_id": state.run_id,
        "design_id": state.design_id,
        "definition_hash": state.definition_hash,
        "lint": {s.value: sev[s] for s in LintSeverity},
        "properties": {
            "total": len(state.properties),
            "by_status": by_status,
            "by_provenance": by_prov,
        },
        "coverage": {
            "code_pct": cov.code_pct,
            "assertion_pct": cov.assertion_pct,
            "functional_pct": cov.functional_pct,
            "consolidated_pct": cov.consolidated_pct,
            "effective_pct": cov.effective_consolidated_pct(),
            "target_pct": state.coverage_target(),
            "waived_locations": list(cov.unreachable_waived),
            "outstanding_gaps": list(cov.gap_locations()),
        },
        "tickets": [
            {
                "ticket_id": t.ticket_id,
                "trigger": t.trigger.value,
                "resolution_kind": t.resolution.kind.value if t.resolution else None,
                "reviewer": t.resolution.reviewer if t.resolution else None,
                "effort_minutes": t.resolution.effort_minutes if t.resolution else 0,
            }
            for t in state.tickets
        ],
        "human_minutes": {
            "rtl": state.human_minutes_rtl,
            "formal": state.human_minutes_formal,
            "total": state.human_minutes_rtl + state.human_minutes_formal,
        },
        "counts": {
            "events": event_count,
            "lint_runs": state.lint_run_count,
            "formal_runs": state.formal_run_count,
            "coverage_runs": state.coverage_run_count,
            "reviews": state.review_count,
            "closure_rounds": state.closure_round_count,
        },
    }


def sign_off(state: RunState, event_count: int) -> dict[str, Any]:
    """Gate then report; raises :class:`GateFailed` with every reason."""
    result = check_gate(state)
    if not result.passed:
        raise GateFailed(result.reasons)
    return build_signoff_report(state, event_count)


# ---------------------------------------------------------------------------
# Resolution sources
# ---------------------------------------------------------------------------

StageFn = Callable[[dict[str, Any]], tuple[Resolution, dict[str, Any]]]


class ResolutionSource(Protocol):
    def next_resolution(
        self, state: RunState, ticket: EscalationTicket, stage: StageFn
    ) -> tuple[Resolution, dict[str, Any]]: ...


class ScriptedResolutionSource:
    """Replays a scenario's resolution list in ticket order.

    Entries must match the opened ticket's trigger; a mismatch means the
    scenario was authored against a different engine behavior and is
    reported as a defect rather than silently consumed.  When the script
    runs out, the stand-in reviewer aborts the run (zero minutes), keeping
    every scripted run terminating.
    """

    def __init__(self, entries: Sequence[dict[str, Any]], bucket: str):
        self._entries = list(entries)
        self._bucket = bucket
        self._cursor = 0

    def next_resolution(
        self, state: RunState, ticket: EscalationTicket, stage: StageFn
    ) -> tuple[Resolution, dict[str, Any]]:
        if self._cursor >= len(self._entries):
            wire = {
                "kind": "abort",
                "reviewer": "auto",
                "effort_minutes": 0,
                "note": "resolution script exhausted",
            }
            return stage(wire)
        entry = self._entries[self._cursor]
        self._cursor += 1
        if entry.get("trigger") != ticket.trigger.value:
            raise ScenarioDefect(
                f"scripted resolution {self._cursor} expects trigger {entry.get('trigger')!r}, "
                f"ticket {ticket.ticket_id} opened with {ticket.trigger.value!r}"
            )
        wire = dict(entry.get("resolution", {}))
        per_bucket = entry.get("per_bucket", {})
        if self._bucket in per_bucket:
            wire = dict(per_bucket[self._bucket])
        try:
            return stage(wire)
        except (ResolutionInvalid, hitl.PatchFailed) as exc:
            raise ScenarioDefect(f"scripted resolution {self._cursor} rejected: {exc}") from exc


class QueuedResolutionSource:
    """Feeds an executor from concurrent submitters (the HTTP gateway).

    ``submit`` blocks its caller until the executor judges the submission:
    accepted, invalid, or conflicting (wrong/closed ticket).  The first
    valid submission for the open ticket wins; everything else queued for
    that ticket is answered with a conflict.
    """

    def __init__(self) -> None:
        import queue

        self._queue: "queue.Queue[tuple[str, dict[str, Any], _ReplyBox]]" = queue.Queue()

    def submit(self, ticket_id: str, data: dict[str, Any], timeout: float = 30.0) -> None:
        box = _ReplyBox()
        self._queue.put((ticket_id, data, box))
        box.wait(timeout)

    def next_resolution(
        self, state: RunState, ticket: EscalationTicket, stage: StageFn
    ) -> tuple[Resolution, dict[str, Any]]:
        while True:
            ticket_id, data, box = self._queue.get()
            if ticket_id != ticket.ticket_id:
                box.reject(ConflictingState(ticket_id, "ticket is not open"))
                continue
            try:
                staged = stage(data)
            except (ResolutionInvalid, hitl.PatchFailed) as exc:
                box.reject(exc)
                continue
            box.accept()
            return staged


class _ReplyBox:
    def __init__(self) -> None:
        import threading

        self._done = threading.Event()
        self._error: Exception | None = None

    def accept(self) -> None:
        self._done.set()

    def reject(self, error: Exception) -> None:
        self._error = error
        self._done.set()

    def wait(self, timeout: float) -> None:
        if not self._done.wait(timeout):
            raise TimeoutError("executor did not answer the submission in time")
        if self._error is not None:
            raise self._error


# ---------------------------------------------------------------------------
# Resolution validation (shared by all sources)
# ---------------------------------------------------------------------------

def stage_resolution(state: RunState, wire: dict[str, Any]) -> tuple[Resolution, dict[str, Any]]:
    """Validate a wire resolution against current state; compute effects.

    Raises :class:`ResolutionInvalid` (shape or reference problems) or
    :class:`~tapeloop.hitl.PatchFailed` (diff does not apply).  Effects are
    everything the fold needs so that replay never re-runs patch logic.
    """
    resolution = parse_resolution(wire)
    effects: dict[str, Any] = {}
    from .domain import SpecValidationError, Violation

    if resolution.kind is ResolutionKind.PATCH_RTL:
        target = state.artifact(resolution.module_name)
        if target is None:
            raise ResolutionInvalid(
                [Violation("unknown-module", resolution.module_name, "no such artifact")]
            )
        effects["new_source"] = apply_unified_diff(target.source_text, resolution.diff)
    elif resolution.kind in (ResolutionKind.REPLACE_PROPERTIES, ResolutionKind.REMOVE_PROPERTIES):
        ids = (
            [p["property_id"] for p in resolution.properties]
            if resolution.kind is ResolutionKind.REPLACE_PROPERTIES
            else list(resolution.property_ids)
        )
        known = {p.property_id for p in state.properties}
        missing = [i for i in ids if i not in known]
        if missing:
            raise ResolutionInvalid(
                [Violation("unknown-property", i, "no such property") for i in missing]
            )
    elif resolution.kind is ResolutionKind.ADD_PROPERTIES:
        known = {p.property_id for p in state.properties}
        clashes = [p["property_id"] for p in resolution.properties if p["property_id"] in known]
        if clashes:
            raise ResolutionInvalid(
                [Violation("duplicate-property", i, "id already in use") for i in clashes]
            )
        effects["entry_id"] = "human"
    elif resolution.kind is ResolutionKind.WAIVE_UNREACHABLE:
        if state.coverage is None:
            raise ResolutionInvalid(
                [Violation("no-coverage", "waive-unreachable", "no coverage evidence yet")]
            )
        uncovered = set(state.coverage.uncovered)
        unknown = [l for l in resolution.waived_locations if l not in uncovered]
        if unknown:
            raise ResolutionInvalid(
                [Violation("unknown-location", l, "not among uncovered locations") for l in unknown]
            )
    elif resolution.kind is ResolutionKind.EDIT_SPEC:
        try:
            new_spec = validate_specification(resolution.spec_text)
        except SpecValidationError as exc:
            raise ResolutionInvalid(exc.violations) from exc
        if new_spec.design_id != state.design_id:
            raise ResolutionInvalid(
                [Violation("design-mismatch", new_spec.design_id, "edit-spec cannot rename the design")]
            )
        effects["spec"] = to_jsonable(new_spec)

    return resolution, effects


# ---------------------------------------------------------------------------
# Executor
# ---------------------------------------------------------------------------

class Toolchain(Protocol):
    def run_lint(self, artifacts: dict[str, str]) -> str: ...
    def run_formal(self, properties: Sequence[SvaProperty], artifacts: dict[str, str]) -> str: ...
    def run_coverage(self, properties: Sequence[SvaProperty], artifacts: dict[str, str]) -> str: ...


class RunExecutor:
    """Drives one run from creation to sign-off, abort, or budget stop.

    All decisions derive from (state, scripted inputs); wall clock never
    enters any event, so repeated executions of one configuration produce
    byte-identical logs.
    """

    def __init__(
        self,
        run_id: str,
        config: RunConfig,
        spec: DesignSpecification,
        backend: Backend,
        toolchain: Toolchain,
        resolution_source: ResolutionSource,
        log: EventLog,
        include_lrm_expert: bool = False,
        abort_flag: Any = None,
        state_listener: Callable[[RunState], None] | None = None,
    ):
        self.run_id = run_id
        self.config = config
        self.log = log
        self._initial_spec = spec
        self._backend = backend
        self._tools = toolchain
        self._source = resolution_source
        self._abort_flag = abort_flag
        self._listener = state_listener

        roles = build_default_roles(include_lrm_expert)
        self._critics = critic_roles(roles)
        enabled = tuple(sorted(r.role_id for r in roles.values() if r.enabled))
        self._definition = build_workflow_definition(enabled, PHASES, config.iteration_threshold)
        participants = list(enabled) + [ORCHESTRATOR, HUMAN]
        self._chat = GroupChatManager(run_id, participants)
        self._engine = DeliberationEngine(
            backend, self._chat, self._emit, config.temperature, config.iteration_threshold
        )

        self.state: RunState | None = None
        self._last_lint_key: tuple | None = None
        self._last_coverage_key: tuple | None = None
        self._fix_lint_counts: dict[str, int] = {}
        self._fix_cex_counts: dict[str, int] = {}
        self._closure_baseline: float | None = None
        self._pending_round = 0
        self._budget_ticketed = False

    # -- event plumbing -------------------------------------------------

    def _emit(self, granularity: Granularity, sender: str, topic: str, payload: dict[str, Any]) -> BusEvent:
        payload = to_jsonable(payload)
        event = BusEvent(
            seq=self.log.next_seq,
            granularity=granularity,
            sender=sender,
            topic=topic,
            payload=payload,
            state_hash_after="",
        )
        new_state = apply_event(self.state, event)
        stamped = BusEvent(
            seq=event.seq,
            granularity=event.granularity,
            sender=event.sender,
            topic=event.topic,
            payload=event.payload,
            state_hash_after=canonical_hash(new_state),
        )
        self.log.ingest(stamped)
        self.state = new_state
        if self._listener is not None:
            self._listener(new_state)
        return stamped

    def _lifecycle(self, payload: dict[str, Any], topic: str | None = None) -> BusEvent:
        return self._emit(
            Granularity.LIFECYCLE, ORCHESTRATOR, topic or groupchat_topic(self.run_id), payload
        )

    # -- helpers ---------------------------------------------------------

    def _sources(self) -> dict[str, str]:
        assert self.state is not None
        return {a.module_name: a.source_text for a in self.state.artifacts}

    def _concat_rtl(self) -> str:
        assert self.state is not None
        return "\n\n".join(a.source_text for a in self.state.artifacts)

    def _abort_requested(self) -> bool:
        return self._abort_flag is not None and self._abort_flag.is_set()

    def _over_soft_budget(self) -> bool:
        return len(self.log) >= self.config.step_budget - BUDGET_RESERVE

    def _terminal(self) -> bool:
        return self.state is not None and self.state.status in (
            RunStatus.SIGNED_OFF,
            RunStatus.ABORTED,
        )

    def _abort(self, reason: str) -> None:
        self._lifecycle({"type": "run-aborted", "reason": reason})

    def _checkpoint(self) -> bool:
        """Honor aborts and the step budget; True when the run must stop."""
        if self._terminal():
            return True
        if self._abort_requested():
            self._abort("abort-requested")
            return True
        if self._over_soft_budget():
            if self._budget_ticketed or len(self.log) >= self.config.step_budget - 4:
                self._abort("step-budget-exhausted")
                return True
            self._budget_ticketed = True
            self._escalate(
                TicketTrigger.STEP_BUDGET,
                f"event budget nearly exhausted ({len(self.log)}/{self.config.step_budget})",
                {"events": len(self.log), "budget": self.config.step_budget},
            )
            return self._terminal()
        return False

    # -- escalation -------------------------------------------------------

    def _escalate(self, trigger: TicketTrigger, summary: str, context: dict[str, Any]) -> None:
        assert self.state is not None
        ticket = EscalationTicket(
            ticket_id=next_ticket_id(self.state.tickets),
            run_id=self.run_id,
            trigger=trigger,
            summary=summary,
            context=context,
        )
        self._emit(
            Granularity.LIFECYCLE,
            ORCHESTRATOR,
            hitl_topic(self.run_id),
            {"type": "ticket-opened", "ticket": to_jsonable(ticket)},
        )
        resolution, effects = self._source.next_resolution(
            self.state, ticket, lambda wire: stage_resolution(self.state, wire)
        )
        self._emit(
            Granularity.LIFECYCLE,
            resolution.reviewer or HUMAN,
            hitl_topic(self.run_id),
            {
                "type": "resolution-applied",
                "ticket_id": ticket.ticket_id,
                "resolution": to_jsonable(resolution),
                "effects": effects,
            },
        )

    def _deliberate(self, task: agents.DeliberationTask, retry_after_resolution: bool) -> DeliberationOutcome | None:
        """Run a deliberation; on exhaustion escalate and optionally retry.

        Returns the accepted outcome, or None when an escalation replaced
        the work (execution-phase fixes) or the run went terminal.
        """
        while True:
            if self._checkpoint():
                return None
            outcome = self._engine.run(task)
            if outcome.accepted:
                return outcome
            self._escalate(
                TicketTrigger.DELIBERATION_EXHAUSTED,
                f"deliberation {task.task_id} exhausted "
                f"{self.config.iteration_threshold} iterations",
                {"task_id": task.task_id, "iterations_used": outcome.iterations_used},
            )
            if self._terminal() or not retry_after_resolution:
                return None

    # -- tool runs --------------------------------------------------------

    def _run_tool(self, kind: str) -> bool:
        """Invoke one tool, parse its report, record both.  False on crash."""
        assert self.state is not None
        sources = self._sources()
        try:
            if kind == "lint":
                text = self._tools.run_lint(sources)
                result = parse_lint_report(text)
                parsed: dict[str, Any] = {
                    "tool_id": result.tool_id,
                    "walltime_ms": result.walltime_ms,
                    "findings": [to_jsonable(f) for f in result.findings],
                }
                tool_id = result.tool_id
            elif kind == "formal":
                unchecked = [
                    p for p in self.state.properties if p.status is PropertyStatus.UNCHECKED
                ]
                text = self._tools.run_formal(unchecked, sources)
                fresult = parse_formal_report(text)
                parsed = {
                    "tool_id": fresult.tool_id,
                    "walltime_ms": fresult.walltime_ms,
                    "verdicts": [
                        {
                            "property_id": v.property_id,
                            "status": v.status.value,
                            "cex": to_jsonable(v.cex) if v.cex else None,
                            "detail": v.detail,
                        }
                        for v in fresult.verdicts
                    ],
                }
                tool_id = fresult.tool_id
            else:
                active = list(self.state.properties)
                text = self._tools.run_coverage(active, sources)
                cresult = parse_coverage_report(text)
                parsed = {
                    "tool_id": cresult.tool_id,
                    "walltime_ms": cresult.walltime_ms,
                    "snapshot": to_jsonable(cresult.snapshot),
                }
                tool_id = cresult.tool_id
        except ScheduleExhausted:
            # the scenario script itself ran out, not a simulated tool crash
            raise
        except ToolInvocationError as exc:
            self._emit(
                Granularity.ERROR,
                exc.tool_id,
                tool_topic(self.run_id),
                {"type": "tool-failed", "kind": kind, "detail": exc.detail},
            )
            self._escalate(
                TicketTrigger.TOOL_FAILURE,
                f"{kind} tool failed: {exc.detail}",
                {"kind": kind, "tool_id": exc.tool_id},
            )
            return False

        self._emit(
            Granularity.TOOL,
            tool_id,
            tool_topic(self.run_id),
            {"type": "tool-report", "kind": kind, "report_text": text, "parsed": parsed},
        )
        return True

    # -- phases ------------------------------------------------------------

    def start(self) -> None:
        self._lifecycle(
            {
                "type": "run-created",
                "run_id": self.run_id,
                "config": to_jsonable(self.config),
                "spec": to_jsonable(self._initial_spec),
                "definition_hash": self._definition.definition_hash(),
            }
        )
        self._lifecycle({"type": "phase-entered", "phase": Phase.PLANNING.value})

    def run(self) -> RunState:
        try:
            self.start()
            if self._planning() and self._development():
                self._execution()
        except Exception:
            # never leave a run dangling: record the failure before re-raising
            if self.state is not None and not self._terminal():
                self._abort("internal-error")
            raise
        assert self.state is not None
        return self.state

    def _planning(self) -> bool:
        assert self.state is not None
        outcome = self._deliberate(
            agents.microarchitecture_task(self.state.spec, self._critics), retry_after_resolution=True
        )
        if outcome is None:
            return False
        self._lifecycle(
            {
                "type": "artifact-accepted",
                "kind": "microarchitecture",
                "data": to_jsonable(outcome.artifact),
                "raw_text": outcome.raw_text,
            }
        )

        outcome = self._deliberate(
            agents.vplan_task(self.state.spec, self.state.microarchitecture_raw, self._critics),
            retry_after_resolution=True,
        )
        if outcome is None:
            return False
        self._lifecycle(
            {"type": "artifact-accepted", "kind": "vplan", "data": to_jsonable(outcome.artifact)}
        )
        return True

    def _development(self) -> bool:
        assert self.state is not None
        self._lifecycle({"type": "phase-entered", "phase": Phase.DEVELOPMENT.value})
        micro = self.state.microarchitecture
        vplan = self.state.vplan
        self._lifecycle(
            {
                "type": "tasks-dispatched",
                "blocks": [{"module": c.name, "duty": c.role} for c in micro.datapath_components],
                "entries": [e.entry_id for e in vplan.entries],
            }
        )

        for component in micro.datapath_components:
            outcome = self._deliberate(
                agents.rtl_task(
                    self.state.spec,
                    self.state.microarchitecture_raw,
                    component.name,
                    component.role,
                    self._critics,
                ),
                retry_after_resolution=True,
            )
            if outcome is None:
                return False
            module_name, source = outcome.artifact
            self._lifecycle(
                {
                    "type": "artifact-accepted",
                    "kind": "rtl",
                    "data": to_jsonable(
                        RtlArtifact(module_name=module_name, source_text=source, revision=1)
                    ),
                }
            )

        for entry in vplan.entries:
            outcome = self._deliberate(
                agents.properties_task(self.state.spec, entry, self._concat_rtl(), self._critics),
                retry_after_resolution=True,
            )
            if outcome is None:
                return False
            existing = {p.property_id for p in self.state.properties}
            clashes = [p["property_id"] for p in outcome.artifact if p["property_id"] in existing]
            if clashes:
                raise ScenarioDefect(
                    f"entry {entry.entry_id} produced property ids already in use: {clashes}"
                )
            self._lifecycle(
                {
                    "type": "artifact-accepted",
                    "kind": "properties",
                    "entry_id": entry.entry_id,
                    "provenance": "agent-generated",
                    "properties": outcome.artifact,
                }
            )
        return True

    # -- execution loop -----------------------------------------------------

    def _lint_key(self) -> tuple:
        assert self.state is not None
        return tuple((a.module_name, a.revision) for a in self.state.artifacts)

    def _coverage_key(self) -> tuple:
        assert self.state is not None
        return (
            tuple((a.module_name, a.revision) for a in self.state.artifacts),
            tuple((p.property_id, canonical_hash(p.body_text)) for p in self.state.properties),
        )

    def _execution(self) -> None:
        assert self.state is not None
        self._lifecycle({"type": "phase-entered", "phase": Phase.EXECUTION.value})

        while True:
            if self._checkpoint():
                return
            state = self.state
            assert state is not None

            # 1. lint freshness: rerun whenever any artifact changed
            if self._last_lint_key != self._lint_key():
                key = self._lint_key()
                if self._run_tool("lint"):
                    self._last_lint_key = key
                    self._review()
                continue

            # 2. blocking lint findings: put the designer on them
            blocking = state.blocking_lint()
            if blocking:
                module = blocking[0].module_name
                if not self._fix_lint(module, blocking):
                    if self._terminal():
                        return
                continue

            # 3. counterexamples: fix one at a time, in property order
            open_cex = [p for p in state.properties if p.status is PropertyStatus.CEX]
            if open_cex:
                self._fix_cex(open_cex[0])
                continue

            # 4. tool errors: retry those properties on the next formal run
            errored = [p.property_id for p in state.properties if p.status is PropertyStatus.TOOL_ERROR]
            if errored:
                self._lifecycle({"type": "properties-reset", "property_ids": errored})
                continue

            # 5. unchecked properties: model-check them
            if any(p.status is PropertyStatus.UNCHECKED for p in state.properties):
                self._run_tool("formal")
                continue

            # 6. coverage freshness
            if self._last_coverage_key != self._coverage_key():
                key = self._coverage_key()
                if self._run_tool("coverage"):
                    self._last_coverage_key = key
                    self._settle_closure_progress()
                continue

            # 7. the gate
            gate = check_gate(self.state)
            self._lifecycle({"type": "gate-checked", "passed": gate.passed, "reasons": list(gate.reasons)})
            if gate.passed:
                report = build_signoff_report(self.state, len(self.log) + 1)
                self._lifecycle({"type": "signed-off", "report": report})
                return

            only_coverage = all(r.startswith("coverage-below-target") for r in gate.reasons)
            if only_coverage:
                self._closure_round()
                continue

            # nothing the loop can act on (should be unreachable for valid
            # scenarios): hand it to a human rather than spin
            self._escalate(
                TicketTrigger.ZERO_PROGRESS_COVERAGE,
                "gate blocked with no automatic remedy: " + "; ".join(gate.reasons),
                {"reasons": list(gate.reasons)},
            )

    def _review(self) -> None:
        assert self.state is not None
        state = self.state
        findings_text = _findings_text(state.last_lint or ())
        outcome = self._deliberate(
            agents.review_task(
                state.design_id,
                state.spec.requirements_text(),
                self._concat_rtl(),
                findings_text,
                state.lint_run_count,
            ),
            retry_after_resolution=False,
        )
        if outcome is None:
            return
        evidence = outcome.artifact
        placeholders = any(a.has_placeholders() for a in self.state.artifacts)
        self._lifecycle(
            {
                "type": "design-review",
                "review_no": state.lint_run_count,
                "functional_pass": evidence.functional_pass,
                "synthesizable": evidence.synthesizable,
                "placeholders_present": placeholders,
                "notes": evidence.notes,
            }
        )

    def _fix_lint(self, module: str, blocking: tuple[LintFinding, ...]) -> bool:
        assert self.state is not None
        occurrence = self._fix_lint_counts.get(module, 0) + 1
        self._fix_lint_counts[module] = occurrence
        artifact = self.state.artifact(module)
        if artifact is None:
            raise ScenarioDefect(f"lint names module {module!r} that was never generated")
        outcome = self._deliberate(
            agents.fix_lint_task(
                self.state.design_id,
                module,
                _findings_text(blocking),
                artifact.source_text,
                occurrence,
                self._critics,
            ),
            retry_after_resolution=False,
        )
        if outcome is None:
            return False
        module_name, source = outcome.artifact
        current = self.state.artifact(module_name)
        assert current is not None
        self._lifecycle(
            {
                "type": "artifact-accepted",
                "kind": "rtl",
                "data": to_jsonable(
                    RtlArtifact(
                        module_name=module_name,
                        source_text=source,
                        revision=current.revision + 1,
                    )
                ),
            }
        )
        return True

    def _fix_cex(self, prop: SvaProperty) -> None:
        assert self.state is not None
        state = self.state
        occurrence = self._fix_cex_counts.get(prop.property_id, 0) + 1
        self._fix_cex_counts[prop.property_id] = occurrence
        cex = next(
            (c for c in state.counterexamples if c.property_id == prop.property_id), None
        )
        if cex is None:
            raise ScenarioDefect(f"property {prop.property_id} has cex status but no counterexample")
        entry_text = prop.vplan_entry_id
        if state.vplan is not None:
            try:
                e = state.vplan.entry(prop.vplan_entry_id)
                entry_text = f"{e.entry_id} [{e.property_type.value}] {e.intent}"
            except KeyError:
                pass
        outcome = self._deliberate(
            agents.fix_cex_task(
                state.design_id, prop, entry_text, cex, self._concat_rtl(), occurrence, self._critics
            ),
            retry_after_resolution=False,
        )
        if outcome is None:
            return
        fix = outcome.artifact
        if fix.kind == "property-fix":
            if self.state.property_by_id(fix.property_id) is None:
                raise ScenarioDefect(f"fix targets unknown property {fix.property_id!r}")
            self._lifecycle(
                {
                    "type": "property-updated",
                    "property_id": fix.property_id,
                    "body_text": fix.body_text,
                    "provenance": "agent-generated",
                }
            )
        else:
            current = self.state.artifact(fix.module_name)
            if current is None:
                raise ScenarioDefect(f"rtl fix targets unknown module {fix.module_name!r}")
            self._lifecycle(
                {
                    "type": "artifact-accepted",
                    "kind": "rtl",
                    "data": to_jsonable(
                        RtlArtifact(
                            module_name=fix.module_name,
                            source_text=fix.source_text,
                            revision=current.revision + 1,
                        )
                    ),
                }
            )

    def _closure_round(self) -> None:
        assert self.state is not None
        state = self.state
        assert state.coverage is not None
        round_no = state.closure_round_count + 1
        outcome = self._deliberate(
            agents.closure_task(
                state.design_id,
                state.coverage.consolidated_pct,
                state.coverage_target(),
                state.coverage.gap_locations(),
                "\n".join(f"{p.property_id}: {p.body_text}" for p in state.properties),
                round_no,
                self._critics,
            ),
            retry_after_resolution=False,
        )
        if outcome is None:
            return
        added = outcome.artifact
        if added:
            existing = {p.property_id for p in self.state.properties}
            clashes = [p["property_id"] for p in added if p["property_id"] in existing]
            if clashes:
                raise ScenarioDefect(f"closure round {round_no} reuses property ids {clashes}")
            self._lifecycle(
                {
                    "type": "artifact-accepted",
                    "kind": "properties",
                    "entry_id": f"closure#{round_no}",
                    "provenance": "agent-generated",
                    "properties": added,
                }
            )
            # progress is judged once the new properties are proven and
            # coverage has been re-measured
            self._closure_baseline = state.coverage.consolidated_pct
            self._pending_round = round_no
            return

        fruitless = state.fruitless_closure_rounds + 1
        self._lifecycle(
            {"type": "coverage-round", "round": round_no, "added": 0, "fruitless_rounds": fruitless}
        )
        self._maybe_zero_progress()

    def _settle_closure_progress(self) -> None:
        """After a coverage rerun, judge a pending closure round, if any."""
        assert self.state is not None
        if self._closure_baseline is None:
            return
        new = self.state.coverage.consolidated_pct if self.state.coverage else 0.0
        improved = new > self._closure_baseline
        fruitless = 0 if improved else self.state.fruitless_closure_rounds + 1
        self._lifecycle(
            {
                "type": "coverage-round",
                "round": self._pending_round,
                "added": -1,
                "fruitless_rounds": fruitless,
            }
        )
        self._closure_baseline = None
        self._maybe_zero_progress()

    def _maybe_zero_progress(self) -> None:
        assert self.state is not None
        state = self.state
        if state.fruitless_closure_rounds >= self.config.iteration_threshold:
            cov = state.coverage
            self._escalate(
                TicketTrigger.ZERO_PROGRESS_COVERAGE,
                f"{state.fruitless_closure_rounds} closure rounds without coverage progress",
                {
                    "rounds": state.fruitless_closure_rounds,
                    "consolidated_pct": cov.consolidated_pct if cov else None,
                    "target_pct": state.coverage_target(),
                    "uncovered": list(cov.gap_locations()) if cov else [],
                },
            )


def _findings_text(findings: Iterable[LintFinding]) -> str:
    lines = [
        f"{f.severity.value.upper()} {f.rule_code} {f.module_name}:{f.line} {f.message}"
        for f in findings
    ]
    return "\n".join(lines) or "(no findings)"


# ---------------------------------------------------------------------------
# High-level entry points
# ---------------------------------------------------------------------------

def default_run_id(design_id: str, temperature: float, seed: int) -> str:
    return f"{design_id}-{temperature_bucket(temperature).value}-s{seed}"


def execute_scenario_run(
    scenario: Scenario,
    temperature: float,
    data_dir: Path | None = None,
    run_id: str | None = None,
    iteration_threshold: int = 5,
    seed: int = 0,
    resolution_source: ResolutionSource | None = None,
    abort_flag: Any = None,
    state_listener: Callable[[RunState], None] | None = None,
    log: EventLog | None = None,
) -> tuple[RunState, EventLog]:
    """Run one scenario at one temperature with the scripted backend."""
    spec = validate_specification(scenario.spec_path().read_text(encoding="utf-8"))
    if spec.design_id != scenario.design_id:
        raise ScenarioDefect(
            f"scenario names design {scenario.design_id!r} but its spec file "
            f"defines {spec.design_id!r}"
        )
    bucket = temperature_bucket(temperature).value
    config = RunConfig(
        design_id=scenario.design_id,
        backend_id="scripted-mock",
        temperature=temperature,
        random_seed=seed,
        iteration_threshold=iteration_threshold,
        coverage_target_pct=spec.coverage_target_pct,
        scenario_path=str(scenario.path),
    )
    rid = run_id or default_run_id(scenario.design_id, temperature, seed)
    if log is None:
        if data_dir is not None:
            run_dir = data_dir / "runs" / rid
            run_dir.mkdir(parents=True, exist_ok=True)
            log_path = run_dir / "events.jsonl"
            if log_path.exists():
                log_path.unlink()
            log = EventLog(log_path)
        else:
            log = EventLog()
    backend = ScriptedMockBackend.from_entries([dict(r) for r in scenario.responses])
    toolchain = scenario.make_toolchain(bucket)
    source = resolution_source or ScriptedResolutionSource(list(scenario.resolutions), bucket)
    executor = RunExecutor(
        run_id=rid,
        config=config,
        spec=spec,
        backend=backend,
        toolchain=toolchain,
        resolution_source=source,
        log=log,
        abort_flag=abort_flag,
        state_listener=state_listener,
    )
    state = executor.run()
    if state.status is RunStatus.SIGNED_OFF and data_dir is not None:
        run_dir = data_dir / "runs" / rid
        (run_dir / "signoff.json").write_text(
            json.dumps(state.report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return state, log


def validate_scenario(path: str | Path) -> Scenario:
    """Parse a scenario and dry-run all three buckets in memory.

    A scenario is complete only if every bucket reaches sign-off or a
    deliberate abort without a script miss, schedule exhaustion, or defect.
    """
    scenario = load_scenario(path)
    missing: list[str] = []
    from .llm import ScriptMiss
    from .tooling import ScheduleExhausted

    for temperature in (0.2, 0.5, 0.8):
        bucket = temperature_bucket(temperature).value
        try:
            state, _log = execute_scenario_run(scenario, temperature)
        except ScriptMiss as exc:
            missing.append(f"bucket {bucket}: missing scripted response {exc.key}")
            continue
        except ScheduleExhausted as exc:
            missing.append(f"bucket {bucket}: {exc}")
            continue
        except (ScenarioDefect, DomainError) as exc:
            missing.append(f"bucket {bucket}: {exc}")
            continue
        if state.status is not RunStatus.SIGNED_OFF and state.status is not RunStatus.ABORTED:
            missing.append(f"bucket {bucket}: run ended {state.status.value}")
        elif state.status is RunStatus.ABORTED and not _abort_was_deliberate(state):
            missing.append(f"bucket {bucket}: aborted by fallback, not by script")
    if missing:
        raise ScenarioIncomplete(str(path), missing)
    return scenario


def _abort_was_deliberate(state: RunState) -> bool:
    for t in state.tickets:
        if t.resolution and t.resolution.kind is ResolutionKind.ABORT:
            return t.resolution.reviewer != "auto"
    return False


# ---------------------------------------------------------------------------
# Replay and audit
# ---------------------------------------------------------------------------

def replay_events(events: Sequence[BusEvent], verify_hashes: bool = True) -> RunState:
    if not events:
        raise ReplayError("empty event log")
    state = replay_fold(events, None, apply_event, verify_hashes=verify_hashes)
    assert state is not None
    return state


def replay_run(log_path: str | Path, verify_hashes: bool = True) -> tuple[RunState, list[BusEvent]]:
    events = read_log(log_path)
    return replay_events(events, verify_hashes=verify_hashes), events


def verify_signoff(events: Sequence[BusEvent]) -> dict[str, Any]:
    """Audit a log's sign-off: the gate must hold at the moment of signing.

    Replays the fold and, at the signed-off event, re-evaluates the gate
    against the preceding state and recomputes the report.  Raises
    :class:`SignOffUnsound` on any divergence; returns the verified report.
    """
    state: RunState | None = None
    for event in events:
        if event.payload.get("type") == "signed-off":
            if state is None:
                raise SignOffUnsound("signed-off before run-created")
            gate = check_gate(state)
            if not gate.passed:
                raise SignOffUnsound(
                    "gate does not hold at sign-off: " + "; ".join(gate.reasons)
                )
            expected = build_signoff_report(state, event.seq)
            if to_jsonable(expected) != event.payload["report"]:
                raise SignOffUnsound("recorded report differs from recomputed report")
            return event.payload["report"]
        state = apply_event(state, event)
    raise SignOffUnsound("log contains no signed-off event")


# ---------------------------------------------------------------------------
# Log views
# ---------------------------------------------------------------------------

def transcript_view(events: Sequence[BusEvent]) -> list[dict[str, Any]]:
    """Chat-granularity events as a readable conversation."""
    out = []
    for e in events:
        if e.granularity is not Granularity.CHAT:
            continue
        p = e.payload
        row = {
            "seq": e.seq,
            "sender": e.sender,
            "type": p.get("type"),
            "task_id": p.get("task_id"),
            "iteration": p.get("iteration"),
        }
        if p.get("type") == "proposal":
            row["text"] = p.get("text", "")
        else:
            row["verdict"] = p.get("verdict")
            row["issues"] = p.get("issues", [])
        out.append(row)
    return out
