"""Agent roles, response parsing, and the bounded deliberation loop.

Agents talk in fenced blocks.  A response is whatever the backend returned;
the only part the engine trusts is the first fenced block, whose tag names
the payload format.  Anything that fails to parse is not an error path out
of the loop: it burns one deliberation iteration with a synthetic
``syntax-error`` critique, exactly like a rejection.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .bus import Granularity, GroupChatManager
from .domain import (
    DomainError,
    Microarchitecture,
    VerificationPlan,
    microarchitecture_from_dict,
    vplan_from_dict,
)
from .llm import Backend, CompletionRequest, render_prompt

logger = logging.getLogger(__name__)

ARCHITECT = "architect"
VERIFICATION_PLANNER = "verification-planner"
RTL_DESIGNER = "rtl-designer"
PROPERTY_AUTHOR = "property-author"
FORMAL_AGENT = "formal-agent"
CRITIC = "critic"
DESIGN_REVIEWER = "design-reviewer"
LRM_EXPERT = "lrm-expert"

#: Non-agent senders that may appear on the chat topic.
ORCHESTRATOR = "orchestrator"
HUMAN = "human"


@dataclass(frozen=True)
class AgentRole:
    role_id: str
    display_name: str
    duty: str
    enabled: bool = True


def build_default_roles(include_lrm_expert: bool = False) -> dict[str, AgentRole]:
    """The standard team.  The language-reference expert is an extra critic
    for deliberations and stays disabled unless explicitly requested."""
    roles = [
        AgentRole(ARCHITECT, "Architect", "plan the microarchitecture"),
        AgentRole(VERIFICATION_PLANNER, "Verification planner", "derive the verification plan"),
        AgentRole(RTL_DESIGNER, "RTL designer", "write and repair synthesizable RTL"),
        AgentRole(PROPERTY_AUTHOR, "Property author", "write SVA properties from plan entries"),
        AgentRole(FORMAL_AGENT, "Formal agent", "triage model-checking results and fix properties"),
        AgentRole(CRITIC, "Critic", "review proposals before they are accepted"),
        AgentRole(DESIGN_REVIEWER, "Design reviewer", "judge functional fidelity and synthesizability"),
        AgentRole(LRM_EXPERT, "Language reference expert", "extra critic for language legality",
                  enabled=include_lrm_expert),
    ]
    return {r.role_id: r for r in roles}


def critic_roles(roles: dict[str, AgentRole]) -> tuple[str, ...]:
    out = [CRITIC]
    if roles.get(LRM_EXPERT) and roles[LRM_EXPERT].enabled:
        out.append(LRM_EXPERT)
    return tuple(out)


# ---------------------------------------------------------------------------
# Fenced-block parsing
# ---------------------------------------------------------------------------

class UnparseableResponse(DomainError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"unparseable response: {reason}")


_FENCE = "```"


def extract_fenced_block(text: str) -> tuple[str, dict[str, str], str]:
    """Return (tag, attrs, content) of the first tagged fenced block."""
    lines = text.split("\n")
    start = None
    for idx, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith(_FENCE) and stripped != _FENCE:
            start = idx
            break
    if start is None:
        raise UnparseableResponse("no tagged fenced block in response")
    header = lines[start].strip()[len(_FENCE):].strip()
    tokens = header.split()
    tag, attr_tokens = tokens[0], tokens[1:]
    attrs: dict[str, str] = {}
    for token in attr_tokens:
        key, sep, value = token.partition("=")
        if not sep:
            raise UnparseableResponse(f"malformed attribute {token!r} in fence header")
        attrs[key] = value
    for end in range(start + 1, len(lines)):
        if lines[end].strip() == _FENCE:
            return tag, attrs, "\n".join(lines[start + 1 : end])
    raise UnparseableResponse("fenced block never closed")


def _fenced_json(text: str, expected_tag: str) -> Any:
    tag, _attrs, content = extract_fenced_block(text)
    if tag != expected_tag:
        raise UnparseableResponse(f"expected a {expected_tag!r} block, got {tag!r}")
    try:
        return json.loads(content)
    except json.JSONDecodeError as exc:
        raise UnparseableResponse(f"{expected_tag} block is not valid JSON: {exc}") from exc


def parse_microarchitecture(text: str) -> Microarchitecture:
    data = _fenced_json(text, "microarchitecture")
    try:
        return microarchitecture_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UnparseableResponse(f"bad microarchitecture payload: {exc}") from exc


def parse_vplan(text: str) -> VerificationPlan:
    data = _fenced_json(text, "vplan")
    try:
        return vplan_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UnparseableResponse(f"bad vplan payload: {exc}") from exc


def parse_rtl_block(text: str, required_module: str | None = None) -> tuple[str, str]:
    tag, attrs, content = extract_fenced_block(text)
    if tag != "rtl":
        raise UnparseableResponse(f"expected an 'rtl' block, got {tag!r}")
    module = attrs.get("module", "")
    if not module:
        raise UnparseableResponse("rtl block missing module=<name>")
    if required_module is not None and module != required_module:
        raise UnparseableResponse(f"rtl block names module {module!r}, task wants {required_module!r}")
    if not content.strip():
        raise UnparseableResponse("rtl block is empty")
    return module, content


def parse_property_list(text: str) -> list[dict[str, str]]:
    data = _fenced_json(text, "properties")
    if not isinstance(data, list):
        raise UnparseableResponse("properties block must be a JSON list")
    seen: set[str] = set()
    out: list[dict[str, str]] = []
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            raise UnparseableResponse(f"properties[{i}] is not an object")
        pid = item.get("property_id")
        body = item.get("body_text")
        if not pid or not isinstance(pid, str):
            raise UnparseableResponse(f"properties[{i}] missing property_id")
        if not body or not isinstance(body, str):
            raise UnparseableResponse(f"properties[{i}] missing body_text")
        if pid in seen:
            raise UnparseableResponse(f"duplicate property_id {pid!r} in one response")
        seen.add(pid)
        out.append({"property_id": pid, "body_text": body})
    return out


@dataclass(frozen=True)
class CritiqueIssue:
    kind: str
    detail: str
    location: str = ""


@dataclass(frozen=True)
class Critique:
    verdict: str
    issues: tuple[CritiqueIssue, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def as_text(self) -> str:
        if not self.issues:
            return self.verdict
        return "\n".join(
            f"- [{i.kind}] {i.detail}" + (f" (at {i.location})" if i.location else "")
            for i in self.issues
        )


def parse_critique(text: str) -> Critique:
    data = _fenced_json(text, "critique")
    if not isinstance(data, dict):
        raise UnparseableResponse("critique block must be a JSON object")
    verdict = data.get("verdict")
    if verdict not in ("accept", "revise"):
        raise UnparseableResponse(f"critique verdict must be accept or revise, got {verdict!r}")
    issues = []
    for i, item in enumerate(data.get("issues", [])):
        if not isinstance(item, dict) or "kind" not in item or "detail" not in item:
            raise UnparseableResponse(f"critique issues[{i}] needs kind and detail")
        issues.append(CritiqueIssue(item["kind"], item["detail"], item.get("location", "")))
    return Critique(verdict=verdict, issues=tuple(issues))


@dataclass(frozen=True)
class FixProposal:
    """Outcome of a counterexample fix: either a property rewrite or new RTL."""

    kind: str  # "property-fix" | "rtl"
    property_id: str = ""
    body_text: str = ""
    module_name: str = ""
    source_text: str = ""


def parse_fix(text: str) -> FixProposal:
    tag, attrs, content = extract_fenced_block(text)
    if tag == "property-fix":
        try:
            data = json.loads(content)
        except json.JSONDecodeError as exc:
            raise UnparseableResponse(f"property-fix block is not valid JSON: {exc}") from exc
        if not isinstance(data, dict) or not data.get("property_id") or not data.get("body_text"):
            raise UnparseableResponse("property-fix needs property_id and body_text")
        return FixProposal(kind="property-fix", property_id=data["property_id"], body_text=data["body_text"])
    if tag == "rtl":
        module = attrs.get("module", "")
        if not module or not content.strip():
            raise UnparseableResponse("rtl fix needs module=<name> and a body")
        return FixProposal(kind="rtl", module_name=module, source_text=content)
    raise UnparseableResponse(f"fix response must be property-fix or rtl, got {tag!r}")


@dataclass(frozen=True)
class ReviewEvidence:
    functional_pass: bool
    synthesizable: bool
    notes: str = ""


def parse_review(text: str) -> ReviewEvidence:
    data = _fenced_json(text, "review")
    if not isinstance(data, dict):
        raise UnparseableResponse("review block must be a JSON object")
    for key in ("functional_pass", "synthesizable"):
        if not isinstance(data.get(key), bool):
            raise UnparseableResponse(f"review {key} must be a boolean")
    return ReviewEvidence(
        functional_pass=data["functional_pass"],
        synthesizable=data["synthesizable"],
        notes=str(data.get("notes", "")),
    )


# ---------------------------------------------------------------------------
# Deliberation
# ---------------------------------------------------------------------------

SYNTHETIC_SYNTAX_ERROR = "syntax-error"
SYNTHETIC_NO_PROGRESS = "no-progress"


@dataclass
class DeliberationTask:
    """One propose/critique/revise loop.

    ``build_prompt(iteration, prior_text, critique_text)`` renders the
    proposer's prompt; ``parse`` turns a raw response into the artifact or
    raises :class:`UnparseableResponse`.
    """

    task_id: str
    phase: str
    design_id: str
    proposer: str
    critics: tuple[str, ...]
    build_prompt: Callable[[int, str, str], str]
    parse: Callable[[str], Any]


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    accepted: bool
    issue_kinds: tuple[str, ...]


@dataclass(frozen=True)
class DeliberationOutcome:
    task_id: str
    accepted: bool
    iterations_used: int
    artifact: Any
    raw_text: str
    records: tuple[IterationRecord, ...]


EmitFn = Callable[[Granularity, str, str, dict[str, Any]], Any]


class DeliberationEngine:
    """Runs bounded deliberations over a group chat.

    Every iteration, successful or not, costs one unit against the
    threshold: a rejection, an unparseable response, and a revision
    identical to the previous attempt all count the same.  Acceptance at
    iteration k reports ``iterations_used == k``; a task that exhausts the
    threshold reports ``iterations_used == threshold`` and is not accepted.
    """

    def __init__(
        self,
        backend: Backend,
        chat: GroupChatManager,
        emit: EmitFn,
        temperature: float,
        iteration_threshold: int,
    ):
        if iteration_threshold < 1:
            raise ValueError("iteration_threshold must be >= 1")
        self._backend = backend
        self._chat = chat
        self._emit = emit
        self._temperature = temperature
        self._threshold = iteration_threshold

    def _say(self, sender: str, payload: dict[str, Any]) -> None:
        self._chat.grant_floor(sender)
        self._chat.route_message(sender, payload)
        self._emit(Granularity.CHAT, sender, self._chat.topic, payload)

    def _complete(self, role_id: str, task: DeliberationTask, iteration: int, prompt: str) -> str:
        request = CompletionRequest(
            role_id=role_id,
            design_id=task.design_id,
            phase=task.phase,
            task_id=task.task_id,
            iteration=iteration,
            temperature=self._temperature,
            prompt=prompt,
        )
        return self._backend.complete(request).text

    def run(self, task: DeliberationTask) -> DeliberationOutcome:
        self._emit(
            Granularity.LIFECYCLE,
            ORCHESTRATOR,
            self._chat.topic,
            {
                "type": "deliberation-started",
                "task_id": task.task_id,
                "proposer": task.proposer,
                "critics": list(task.critics),
                "iteration_threshold": self._threshold,
            },
        )
        records: list[IterationRecord] = []
        prior_text = ""
        critique_text = ""
        last_parsed: Any = None

        for iteration in range(1, self._threshold + 1):
            prompt = task.build_prompt(iteration, prior_text, critique_text)
            response = self._complete(task.proposer, task, iteration, prompt)
            self._say(
                task.proposer,
                {
                    "type": "proposal",
                    "task_id": task.task_id,
                    "iteration": iteration,
                    "role_id": task.proposer,
                    "text": response,
                },
            )

            synthetic: CritiqueIssue | None = None
            parsed: Any = None
            try:
                parsed = task.parse(response)
            except UnparseableResponse as exc:
                synthetic = CritiqueIssue(SYNTHETIC_SYNTAX_ERROR, str(exc))
            if synthetic is None and iteration > 1 and response == prior_text:
                synthetic = CritiqueIssue(
                    SYNTHETIC_NO_PROGRESS, "revision is byte-identical to the previous attempt"
                )

            if synthetic is not None:
                crit = Critique(verdict="revise", issues=(synthetic,))
                self._say(
                    ORCHESTRATOR,
                    {
                        "type": "critique",
                        "task_id": task.task_id,
                        "iteration": iteration,
                        "role_id": ORCHESTRATOR,
                        "verdict": crit.verdict,
                        "issues": [
                            {"kind": i.kind, "detail": i.detail, "location": i.location}
                            for i in crit.issues
                        ],
                    },
                )
                records.append(IterationRecord(iteration, False, (synthetic.kind,)))
                prior_text = response
                critique_text = crit.as_text()
                continue

            last_parsed = parsed
            all_accepted = True
            issue_kinds: list[str] = []
            collected: list[str] = []
            for critic in task.critics:
                critic_prompt = render_prompt(
                    "critique",
                    {"design_id": task.design_id, "task_id": task.task_id, "proposal": response},
                )
                critic_text = self._complete(critic, task, iteration, critic_prompt)
                try:
                    crit = parse_critique(critic_text)
                except UnparseableResponse as exc:
                    crit = Critique("revise", (CritiqueIssue(SYNTHETIC_SYNTAX_ERROR, str(exc)),))
                self._say(
                    critic,
                    {
                        "type": "critique",
                        "task_id": task.task_id,
                        "iteration": iteration,
                        "role_id": critic,
                        "verdict": crit.verdict,
                        "issues": [
                            {"kind": i.kind, "detail": i.detail, "location": i.location}
                            for i in crit.issues
                        ],
                    },
                )
                if not crit.accepted:
                    all_accepted = False
                    issue_kinds.extend(i.kind for i in crit.issues)
                    collected.append(crit.as_text())

            if all_accepted:
                records.append(IterationRecord(iteration, True, ()))
                self._emit(
                    Granularity.LIFECYCLE,
                    ORCHESTRATOR,
                    self._chat.topic,
                    {
                        "type": "deliberation-finished",
                        "task_id": task.task_id,
                        "accepted": True,
                        "iterations_used": iteration,
                    },
                )
                return DeliberationOutcome(
                    task_id=task.task_id,
                    accepted=True,
                    iterations_used=iteration,
                    artifact=parsed,
                    raw_text=response,
                    records=tuple(records),
                )

            records.append(IterationRecord(iteration, False, tuple(issue_kinds)))
            prior_text = response
            critique_text = "\n".join(collected)

        self._emit(
            Granularity.LIFECYCLE,
            ORCHESTRATOR,
            self._chat.topic,
            {
                "type": "deliberation-finished",
                "task_id": task.task_id,
                "accepted": False,
                "iterations_used": self._threshold,
            },
        )
        return DeliberationOutcome(
            task_id=task.task_id,
            accepted=False,
            iterations_used=self._threshold,
            artifact=last_parsed,
            raw_text=prior_text,
            records=tuple(records),
        )


# ---------------------------------------------------------------------------
# Task builders
# ---------------------------------------------------------------------------

def _reflective(first: Callable[[], str], task: "DeliberationTask") -> Callable[[int, str, str], str]:
    def build(iteration: int, prior_text: str, critique_text: str) -> str:
        if iteration == 1:
            return first()
        return render_prompt(
            "reflect",
            {
                "design_id": task.design_id,
                "task_id": task.task_id,
                "iteration": iteration,
                "proposal": prior_text,
                "critique": critique_text,
            },
        )

    return build


def _ports_text(spec: Any) -> str:
    return "\n".join(f"{p.name} {p.direction.value} {p.width}" for p in spec.interfaces)


def microarchitecture_task(spec: Any, critics: tuple[str, ...]) -> DeliberationTask:
    task = DeliberationTask(
        task_id="microarchitecture",
        phase="planning",
        design_id=spec.design_id,
        proposer=ARCHITECT,
        critics=critics,
        build_prompt=lambda *_: "",
        parse=parse_microarchitecture,
    )
    task.build_prompt = _reflective(
        lambda: render_prompt(
            "microarchitecture",
            {
                "design_id": spec.design_id,
                "requirements": spec.requirements_text(),
                "interfaces": _ports_text(spec),
                "performance_targets": "\n".join(
                    f"{t.name} {t.value} {t.unit}" for t in spec.performance_targets
                ),
                "fsm_details": "\n".join(f"{f.state}: {f.transitions}" for f in spec.fsm_details),
            },
        ),
        task,
    )
    return task


def vplan_task(spec: Any, microarch_text: str, critics: tuple[str, ...]) -> DeliberationTask:
    task = DeliberationTask(
        task_id="verification-plan",
        phase="planning",
        design_id=spec.design_id,
        proposer=VERIFICATION_PLANNER,
        critics=critics,
        build_prompt=lambda *_: "",
        parse=parse_vplan,
    )
    task.build_prompt = _reflective(
        lambda: render_prompt(
            "verification_plan",
            {
                "design_id": spec.design_id,
                "requirements": spec.requirements_text(),
                "microarchitecture": microarch_text,
            },
        ),
        task,
    )
    return task


def rtl_task(
    spec: Any,
    microarch_text: str,
    module_name: str,
    block_duty: str,
    critics: tuple[str, ...],
) -> DeliberationTask:
    task = DeliberationTask(
        task_id=f"rtl:{module_name}",
        phase="development",
        design_id=spec.design_id,
        proposer=RTL_DESIGNER,
        critics=critics,
        build_prompt=lambda *_: "",
        parse=lambda text: parse_rtl_block(text, required_module=module_name),
    )

    def build(iteration: int, prior: str, critique: str) -> str:
        return render_prompt(
            "rtl_block",
            {
                "design_id": spec.design_id,
                "module_name": module_name,
                "block_duty": block_duty,
                "microarchitecture": microarch_text,
                "interfaces": _ports_text(spec),
                "iteration": iteration,
                "critique": critique,
            },
        )

    task.build_prompt = build
    return task


def properties_task(
    spec: Any, entry: Any, rtl_source: str, critics: tuple[str, ...]
) -> DeliberationTask:
    entry_text = f"{entry.entry_id} [{entry.property_type.value}] {entry.intent}"
    task = DeliberationTask(
        task_id=f"properties:{entry.entry_id}",
        phase="development",
        design_id=spec.design_id,
        proposer=PROPERTY_AUTHOR,
        critics=critics,
        build_prompt=lambda *_: "",
        parse=parse_property_list,
    )

    def build(iteration: int, prior: str, critique: str) -> str:
        return render_prompt(
            "properties",
            {
                "design_id": spec.design_id,
                "vplan_entry": entry_text,
                "rtl_source": rtl_source,
                "iteration": iteration,
                "critique": critique,
            },
        )

    task.build_prompt = build
    return task


def fix_lint_task(
    design_id: str,
    module_name: str,
    findings_text: str,
    rtl_source: str,
    occurrence: int,
    critics: tuple[str, ...],
) -> DeliberationTask:
    task = DeliberationTask(
        task_id=f"fix-lint:{module_name}#{occurrence}",
        phase="execution",
        design_id=design_id,
        proposer=RTL_DESIGNER,
        critics=critics,
        build_prompt=lambda *_: "",
        parse=lambda text: parse_rtl_block(text, required_module=module_name),
    )

    def build(iteration: int, prior: str, critique: str) -> str:
        return render_prompt(
            "fix_lint",
            {
                "design_id": design_id,
                "module_name": module_name,
                "findings": findings_text,
                "rtl_source": rtl_source,
                "iteration": iteration,
                "critique": critique,
            },
        )

    task.build_prompt = build
    return task


def fix_cex_task(
    design_id: str,
    prop: Any,
    vplan_entry_text: str,
    cex: Any,
    rtl_source: str,
    occurrence: int,
    critics: tuple[str, ...],
) -> DeliberationTask:
    task = DeliberationTask(
        task_id=f"fix-cex:{prop.property_id}#{occurrence}",
        phase="execution",
        design_id=design_id,
        proposer=FORMAL_AGENT,
        critics=critics,
        build_prompt=lambda *_: "",
        parse=parse_fix,
    )

    def build(iteration: int, prior: str, critique: str) -> str:
        return render_prompt(
            "fix_cex",
            {
                "design_id": design_id,
                "property_id": prop.property_id,
                "vplan_entry": vplan_entry_text,
                "property_body": prop.body_text,
                "depth": cex.depth,
                "trace_summary": cex.trace_summary,
                "failing_signals": ", ".join(cex.failing_signals) or "(none)",
                "rtl_source": rtl_source,
                "iteration": iteration,
                "critique": critique,
            },
        )

    task.build_prompt = build
    return task


def closure_task(
    design_id: str,
    consolidated_pct: float,
    target_pct: float,
    uncovered: tuple[str, ...],
    properties_text: str,
    round_no: int,
    critics: tuple[str, ...],
) -> DeliberationTask:
    task = DeliberationTask(
        task_id=f"closure#{round_no}",
        phase="execution",
        design_id=design_id,
        proposer=PROPERTY_AUTHOR,
        critics=critics,
        build_prompt=lambda *_: "",
        parse=parse_property_list,
    )

    def build(iteration: int, prior: str, critique: str) -> str:
        return render_prompt(
            "coverage_closure",
            {
                "design_id": design_id,
                "consolidated_pct": consolidated_pct,
                "target_pct": target_pct,
                "uncovered": "\n".join(uncovered) or "(none reported)",
                "properties": properties_text,
                "iteration": iteration,
                "critique": critique,
            },
        )

    task.build_prompt = build
    return task


def review_task(
    design_id: str,
    requirements_text: str,
    rtl_source: str,
    findings_text: str,
    review_no: int,
) -> DeliberationTask:
    """Single-shot review: no critics, so a parseable response is accepted."""
    task = DeliberationTask(
        task_id=f"review#{review_no}",
        phase="execution",
        design_id=design_id,
        proposer=DESIGN_REVIEWER,
        critics=(),
        build_prompt=lambda *_: "",
        parse=parse_review,
    )

    def build(iteration: int, prior: str, critique: str) -> str:
        return render_prompt(
            "design_review",
            {
                "design_id": design_id,
                "requirements": requirements_text,
                "rtl_source": rtl_source,
                "findings": findings_text,
            },
        )

    task.build_prompt = build
    return task
