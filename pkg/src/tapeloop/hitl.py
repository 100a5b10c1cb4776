"""Human-in-the-loop escalation tickets and their resolutions.

A run escalates by opening a ticket; a human (or a scripted stand-in)
answers with exactly one resolution.  Resolutions are validated before they
are accepted and applied by the workflow as ordinary events, so replay sees
human intervention the same way it sees everything else.  Each ticket takes
at most one resolution; a second submission is a conflict, not an overwrite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .domain import DomainError, Violation

logger = logging.getLogger(__name__)


class TicketTrigger(str, Enum):
    DELIBERATION_EXHAUSTED = "deliberation-exhausted"
    ZERO_PROGRESS_COVERAGE = "zero-progress-coverage"
    TOOL_FAILURE = "tool-failure"
    STEP_BUDGET = "step-budget"


class TicketStatus(str, Enum):
    OPEN = "open"
    RESOLVED = "resolved"


class ResolutionKind(str, Enum):
    PATCH_RTL = "patch-rtl"
    REPLACE_PROPERTIES = "replace-properties"
    REMOVE_PROPERTIES = "remove-properties"
    ADD_PROPERTIES = "add-properties"
    WAIVE_UNREACHABLE = "waive-unreachable"
    EDIT_SPEC = "edit-spec"
    ABORT = "abort"


#: Which effort ledger a resolution's minutes land in.  Aborts cost review
#: time but repair nothing, so they are attributed to neither ledger.
MINUTES_LEDGER: dict[ResolutionKind, str | None] = {
    ResolutionKind.PATCH_RTL: "rtl",
    ResolutionKind.EDIT_SPEC: "rtl",
    ResolutionKind.REPLACE_PROPERTIES: "formal",
    ResolutionKind.REMOVE_PROPERTIES: "formal",
    ResolutionKind.ADD_PROPERTIES: "formal",
    ResolutionKind.WAIVE_UNREACHABLE: "formal",
    ResolutionKind.ABORT: None,
}


@dataclass(frozen=True)
class Resolution:
    kind: ResolutionKind
    reviewer: str
    effort_minutes: int
    note: str = ""
    module_name: str = ""
    diff: str = ""
    properties: tuple[dict[str, str], ...] = ()
    property_ids: tuple[str, ...] = ()
    waived_locations: tuple[str, ...] = ()
    spec_text: str = ""


@dataclass(frozen=True)
class EscalationTicket:
    ticket_id: str
    run_id: str
    trigger: TicketTrigger
    summary: str
    context: dict[str, Any] = field(default_factory=dict)
    status: TicketStatus = TicketStatus.OPEN
    resolution: Resolution | None = None

    def resolved_with(self, resolution: Resolution) -> "EscalationTicket":
        if self.status is not TicketStatus.OPEN:
            raise ConflictingState(self.ticket_id, "ticket already resolved")
        return EscalationTicket(
            ticket_id=self.ticket_id,
            run_id=self.run_id,
            trigger=self.trigger,
            summary=self.summary,
            context=self.context,
            status=TicketStatus.RESOLVED,
            resolution=resolution,
        )


class ConflictingState(DomainError):
    """The submission raced a state change and lost (e.g. ticket closed)."""

    def __init__(self, subject: str, reason: str):
        self.subject, self.reason = subject, reason
        super().__init__(f"{subject}: {reason}")


class ResolutionInvalid(DomainError):
    def __init__(self, violations: Iterable[Violation]):
        self.violations = tuple(violations)
        summary = "; ".join(f"{v.kind}({v.subject}): {v.detail}" for v in self.violations)
        super().__init__(f"resolution invalid: {summary}")


def next_ticket_id(existing: Sequence[EscalationTicket]) -> str:
    return f"T{len(existing) + 1}"


def list_pending(tickets: Iterable[EscalationTicket]) -> tuple[EscalationTicket, ...]:
    return tuple(t for t in tickets if t.status is TicketStatus.OPEN)


def parse_resolution(data: Mapping[str, Any]) -> Resolution:
    """Validate a wire-shape resolution; collects every violation found."""
    violations: list[Violation] = []
    kind_text = data.get("kind")
    kind: ResolutionKind | None = None
    try:
        kind = ResolutionKind(kind_text)
    except ValueError:
        violations.append(Violation("bad-kind", str(kind_text), "unknown resolution kind"))

    reviewer = data.get("reviewer", "")
    if not reviewer or not isinstance(reviewer, str):
        violations.append(Violation("missing-field", "reviewer", "non-empty string required"))

    minutes = data.get("effort_minutes", 0)
    if not isinstance(minutes, int) or isinstance(minutes, bool) or minutes < 0:
        violations.append(Violation("bad-field", "effort_minutes", "integer >= 0 required"))
        minutes = 0

    properties: tuple[dict[str, str], ...] = ()
    property_ids: tuple[str, ...] = ()
    waived: tuple[str, ...] = ()

    if kind is ResolutionKind.PATCH_RTL:
        if not data.get("module_name"):
            violations.append(Violation("missing-field", "module_name", "patch-rtl names a module"))
        if not data.get("diff"):
            violations.append(Violation("missing-field", "diff", "patch-rtl carries a unified diff"))
    elif kind in (ResolutionKind.REPLACE_PROPERTIES, ResolutionKind.ADD_PROPERTIES):
        raw = data.get("properties")
        if not isinstance(raw, list) or not raw:
            violations.append(Violation("missing-field", "properties", "non-empty list required"))
        else:
            collected: list[dict[str, str]] = []
            for i, item in enumerate(raw):
                if (
                    not isinstance(item, dict)
                    or not item.get("property_id")
                    or not item.get("body_text")
                ):
                    violations.append(
                        Violation("bad-field", f"properties[{i}]", "needs property_id and body_text")
                    )
                    continue
                collected.append(
                    {"property_id": item["property_id"], "body_text": item["body_text"]}
                )
            properties = tuple(collected)
    elif kind is ResolutionKind.REMOVE_PROPERTIES:
        raw = data.get("property_ids")
        if not isinstance(raw, list) or not raw or not all(isinstance(x, str) and x for x in raw):
            violations.append(Violation("missing-field", "property_ids", "non-empty id list required"))
        else:
            property_ids = tuple(raw)
    elif kind is ResolutionKind.WAIVE_UNREACHABLE:
        raw = data.get("waived_locations")
        if not isinstance(raw, list) or not raw or not all(isinstance(x, str) and x for x in raw):
            violations.append(
                Violation("missing-field", "waived_locations", "non-empty location list required")
            )
        else:
            waived = tuple(raw)
    elif kind is ResolutionKind.EDIT_SPEC:
        if not data.get("spec_text"):
            violations.append(Violation("missing-field", "spec_text", "edit-spec carries new text"))

    if violations:
        raise ResolutionInvalid(violations)
    assert kind is not None

    return Resolution(
        kind=kind,
        reviewer=reviewer,
        effort_minutes=minutes,
        note=str(data.get("note", "")),
        module_name=str(data.get("module_name", "")),
        diff=str(data.get("diff", "")),
        properties=properties,
        property_ids=property_ids,
        waived_locations=waived,
        spec_text=str(data.get("spec_text", "")),
    )


def resolution_from_dict(data: Mapping[str, Any]) -> Resolution:
    """Rebuild a resolution recorded in the event log (already validated)."""
    return Resolution(
        kind=ResolutionKind(data["kind"]),
        reviewer=data["reviewer"],
        effort_minutes=data["effort_minutes"],
        note=data.get("note", ""),
        module_name=data.get("module_name", ""),
        diff=data.get("diff", ""),
        properties=tuple(dict(p) for p in data.get("properties", [])),
        property_ids=tuple(data.get("property_ids", [])),
        waived_locations=tuple(data.get("waived_locations", [])),
        spec_text=data.get("spec_text", ""),
    )


def ticket_from_dict(data: Mapping[str, Any]) -> EscalationTicket:
    res = data.get("resolution")
    return EscalationTicket(
        ticket_id=data["ticket_id"],
        run_id=data["run_id"],
        trigger=TicketTrigger(data["trigger"]),
        summary=data["summary"],
        context=dict(data.get("context", {})),
        status=TicketStatus(data["status"]),
        resolution=resolution_from_dict(res) if res else None,
    )


# ---------------------------------------------------------------------------
# Unified diff application
# ---------------------------------------------------------------------------

class PatchFailed(DomainError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"patch failed: {reason}")


def apply_unified_diff(original: str, diff: str) -> str:
    """Apply a unified diff to ``original`` and return the patched text.

    Strict: hunk offsets and context lines must match the original exactly,
    otherwise :class:`PatchFailed` names the first divergence.  Handles the
    ``\\ No newline at end of file`` marker.
    """
    src = original.split("\n")
    out: list[str] = []
    cursor = 0  # index into src of the next unconsumed line
    saw_hunk = False
    lines = diff.split("\n")
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith(("---", "+++")) or (not saw_hunk and not line.startswith("@@")):
            i += 1
            continue
        if line.startswith("@@"):
            saw_hunk = True
            try:
                header = line.split("@@")[1].strip()
                old_part = header.split()[0]
                assert old_part.startswith("-")
                old_start_text = old_part[1:].split(",")[0]
                old_start = int(old_start_text)
            except (IndexError, ValueError, AssertionError) as exc:
                raise PatchFailed(f"bad hunk header {line!r}") from exc
            # hunks with zero old lines address the line *before* insertion
            target = old_start - 1 if old_start > 0 else 0
            if target < cursor:
                raise PatchFailed(f"hunk {line!r} overlaps a previous hunk")
            if target > len(src):
                raise PatchFailed(f"hunk {line!r} starts beyond end of input")
            out.extend(src[cursor:target])
            cursor = target
            i += 1
            while i < len(lines):
                body = lines[i]
                if body.startswith("@@"):
                    break
                if body.startswith("\\"):
                    i += 1
                    continue
                if body.startswith(" "):
                    expected = body[1:]
                    if cursor >= len(src) or src[cursor] != expected:
                        got = src[cursor] if cursor < len(src) else "<eof>"
                        raise PatchFailed(
                            f"context mismatch at line {cursor + 1}: expected {expected!r}, found {got!r}"
                        )
                    out.append(expected)
                    cursor += 1
                elif body.startswith("-"):
                    expected = body[1:]
                    if cursor >= len(src) or src[cursor] != expected:
                        got = src[cursor] if cursor < len(src) else "<eof>"
                        raise PatchFailed(
                            f"delete mismatch at line {cursor + 1}: expected {expected!r}, found {got!r}"
                        )
                    cursor += 1
                elif body.startswith("+"):
                    out.append(body[1:])
                elif body == "":
                    # tolerate a trailing blank line in the diff text
                    i += 1
                    continue
                else:
                    raise PatchFailed(f"unrecognized hunk line {body!r}")
                i += 1
            continue
        i += 1
    if not saw_hunk:
        raise PatchFailed("diff contains no hunks")
    out.extend(src[cursor:])
    return "\n".join(out)


def make_unified_diff(original: str, updated: str, path: str) -> str:
    """Render the canonical diff for a patch resolution (used by tooling/tests)."""
    import difflib

    return "\n".join(
        difflib.unified_diff(
            original.split("\n"),
            updated.split("\n"),
            fromfile=f"a/{path}",
            tofile=f"b/{path}",
            lineterm="",
        )
    )
