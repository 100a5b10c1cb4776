"""Shared domain types, validation, and canonical hashing.

Every other module builds on the values defined here.  Domain values are
frozen dataclasses: once constructed they are immutable and safe to share
between concurrently executing runs.  Anything that crosses the event log
has a ``to_jsonable``/``*_from_dict`` round trip so a run can be replayed
from its log alone.

Canonical form (used for hashing and replay equality): map keys sorted
lexicographically, reals encoded with 17 significant digits, no wall-clock
fields anywhere.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, is_dataclass
from enum import Enum
from typing import Any, Iterable, Mapping


# ---------------------------------------------------------------------------
# Canonical serialization and hashing
# ---------------------------------------------------------------------------

def to_jsonable(value: Any) -> Any:
    """Convert a domain value into plain JSON-able data (dicts/lists/scalars)."""
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Mapping):
        return {
            (k.value if isinstance(k, Enum) else str(k)): to_jsonable(v)
            for k, v in value.items()
        }
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    raise TypeError(f"not canonically serializable: {type(value).__name__}")


def canonical_json(value: Any) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit reals."""
    return _canon(to_jsonable(value))


def _canon(value: Any) -> str:
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError("non-finite reals have no canonical form")
        if value == int(value) and abs(value) < 1e16:
            # keep x.0 distinct from the integer x, but stable
            return format(value, ".1f") if abs(value) < 1e15 else format(value, ".17g")
        return format(value, ".17g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, list):
        return "[" + ",".join(_canon(v) for v in value) + "]"
    if isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: kv[0])
        return "{" + ",".join(json.dumps(str(k)) + ":" + _canon(v) for k, v in items) + "}"
    raise TypeError(f"not canonically serializable: {type(value).__name__}")


def canonical_hash(value: Any) -> str:
    """Fixed-length hex digest of a domain value's canonical form.

    Equal values hash equal; wall-clock never enters the digest because
    domain values carry no timestamps (sequence numbers are logical time).
    """
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------

class PortDirection(str, Enum):
    IN = "in"
    OUT = "out"
    INOUT = "inout"


class ResetStrategy(str, Enum):
    SYNC_ACTIVE_HIGH = "sync-active-high"
    SYNC_ACTIVE_LOW = "sync-active-low"
    ASYNC_ACTIVE_HIGH = "async-active-high"
    ASYNC_ACTIVE_LOW = "async-active-low"


class PropertyType(str, Enum):
    SAFETY = "safety"
    LIVENESS = "liveness"
    INTERFACE_PROTOCOL = "interface-protocol"
    DATA_INTEGRITY = "data-integrity"
    RESET_BEHAVIOR = "reset-behavior"


class PropertyStatus(str, Enum):
    UNCHECKED = "unchecked"
    PROVEN = "proven"
    CEX = "cex"
    TOOL_ERROR = "tool-error"
    WAIVED = "waived"


#: Allowed SvaProperty status transitions.  Anything else is a defect.
PROPERTY_STATUS_TRANSITIONS: dict[PropertyStatus, frozenset[PropertyStatus]] = {
    PropertyStatus.UNCHECKED: frozenset(
        {PropertyStatus.PROVEN, PropertyStatus.CEX, PropertyStatus.TOOL_ERROR}
    ),
    PropertyStatus.CEX: frozenset({PropertyStatus.UNCHECKED, PropertyStatus.WAIVED}),
    PropertyStatus.TOOL_ERROR: frozenset({PropertyStatus.UNCHECKED}),
    PropertyStatus.PROVEN: frozenset(),
    PropertyStatus.WAIVED: frozenset(),
}


class ArtifactProvenance(str, Enum):
    AGENT_GENERATED = "agent-generated"
    HUMAN_PATCHED = "human-patched"


class PropertyProvenance(str, Enum):
    AGENT_GENERATED = "agent-generated"
    HUMAN_ADDED = "human-added"
    HUMAN_EDITED = "human-edited"


class LintSeverity(str, Enum):
    FATAL = "fatal"
    ERROR = "error"
    WARNING = "warning"


class LintCategory(str, Enum):
    SYNTAX = "syntax"
    PLACEHOLDER = "placeholder"
    WIDTH_MISMATCH = "width-mismatch"
    UNSYNTHESIZABLE = "unsynthesizable-construct"
    STYLE = "style"
    OTHER = "other"


class CoverageKind(str, Enum):
    CODE = "code"
    ASSERTION = "assertion"
    FUNCTIONAL = "functional"


class AccuracyClass(str, Enum):
    CORRECT = "correct"
    NON_SYNTHESIZABLE = "non-synthesizable"
    INCORRECT = "incorrect"
    INCOMPLETE = "incomplete"


#: Marker token scanned for in generated RTL to detect stubbed-out logic.
PLACEHOLDER_MARKER = "PLACEHOLDER"


# ---------------------------------------------------------------------------
# Validation plumbing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    """One validation failure; ``kind`` is a stable machine-readable code."""

    kind: str
    subject: str
    detail: str = ""


class DomainError(Exception):
    """Base class for all tapeloop domain errors."""


class SpecValidationError(DomainError):
    """Raised with the *complete* list of violations, never just the first."""

    def __init__(self, violations: Iterable[Violation]):
        self.violations = tuple(violations)
        summary = "; ".join(f"{v.kind}({v.subject})" for v in self.violations)
        super().__init__(f"specification invalid: {summary}")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def _pct(value: float, what: str) -> None:
    _require(0.0 <= value <= 100.0, f"{what} must be within [0,100], got {value}")


# ---------------------------------------------------------------------------
# Design specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PortDef:
    name: str
    direction: PortDirection
    width: int

    def __post_init__(self) -> None:
        _require(bool(self.name), "port name must be non-empty")
        _require(self.width >= 1, f"port {self.name} width must be >= 1")


@dataclass(frozen=True)
class PerformanceTarget:
    name: str
    value: float
    unit: str


@dataclass(frozen=True)
class FsmDetail:
    state: str
    transitions: str


@dataclass(frozen=True)
class DesignSpecification:
    """Structured input: requirements, interfaces, targets, FSM details."""

    design_id: str
    requirements: tuple[str, ...]
    interfaces: tuple[PortDef, ...]
    performance_targets: tuple[PerformanceTarget, ...]
    fsm_details: tuple[FsmDetail, ...]
    coverage_target_pct: float = 95.0

    def __post_init__(self) -> None:
        _require(bool(self.design_id), "design_id must be non-empty")
        names = [p.name for p in self.interfaces]
        _require(len(names) == len(set(names)), "port names must be unique")
        _pct(self.coverage_target_pct, "coverage_target_pct")

    def requirements_text(self) -> str:
        return "\n\n".join(self.requirements)


@dataclass(frozen=True)
class DatapathComponent:
    name: str
    role: str


@dataclass(frozen=True)
class ControlFsm:
    name: str
    outline: str


@dataclass(frozen=True)
class TimingConstraint:
    name: str
    value: str


@dataclass(frozen=True)
class Microarchitecture:
    """Planning-phase output consumed by the design stream dispatcher."""

    datapath_components: tuple[DatapathComponent, ...]
    control_fsms: tuple[ControlFsm, ...]
    reset_strategy: ResetStrategy
    timing_constraints: tuple[TimingConstraint, ...]

    def __post_init__(self) -> None:
        _require(len(self.datapath_components) >= 1, "need at least one datapath component")


@dataclass(frozen=True)
class VPlanEntry:
    entry_id: str
    property_type: PropertyType
    intent: str
    target_signals: tuple[str, ...]

    def __post_init__(self) -> None:
        _require(bool(self.intent), f"vplan entry {self.entry_id} intent must be non-empty")


@dataclass(frozen=True)
class VerificationPlan:
    """Property intents plus coverage goals; the contract both streams answer to."""

    entries: tuple[VPlanEntry, ...]
    coverage_goals: dict[CoverageKind, float]

    def __post_init__(self) -> None:
        ids = [e.entry_id for e in self.entries]
        _require(len(ids) == len(set(ids)), "vplan entry ids must be unique")
        for kind, pct in self.coverage_goals.items():
            _pct(pct, f"coverage goal {kind.value}")

    def entry(self, entry_id: str) -> VPlanEntry:
        for e in self.entries:
            if e.entry_id == entry_id:
                return e
        raise KeyError(entry_id)


# ---------------------------------------------------------------------------
# Build artifacts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RtlArtifact:
    module_name: str
    source_text: str
    revision: int = 1
    provenance: ArtifactProvenance = ArtifactProvenance.AGENT_GENERATED
    source_language_tag: str = "systemverilog"

    def __post_init__(self) -> None:
        _require(bool(self.source_text), f"artifact {self.module_name} source must be non-empty")
        _require(self.revision >= 1, "revision starts at 1")

    def has_placeholders(self) -> bool:
        return PLACEHOLDER_MARKER in self.source_text


@dataclass(frozen=True)
class SvaProperty:
    property_id: str
    vplan_entry_id: str
    body_text: str
    status: PropertyStatus = PropertyStatus.UNCHECKED
    provenance: PropertyProvenance = PropertyProvenance.AGENT_GENERATED

    def with_status(self, new: PropertyStatus) -> "SvaProperty":
        if new not in PROPERTY_STATUS_TRANSITIONS[self.status]:
            raise IllegalStatusTransition(self.property_id, self.status, new)
        return SvaProperty(self.property_id, self.vplan_entry_id, self.body_text, new, self.provenance)


class IllegalStatusTransition(DomainError):
    def __init__(self, property_id: str, old: PropertyStatus, new: PropertyStatus):
        self.property_id, self.old, self.new = property_id, old, new
        super().__init__(f"property {property_id}: illegal transition {old.value} -> {new.value}")


@dataclass(frozen=True)
class LintFinding:
    severity: LintSeverity
    rule_code: str
    message: str
    module_name: str
    line: int
    category: LintCategory = LintCategory.OTHER

    def __post_init__(self) -> None:
        _require(self.line >= 1, "lint finding line must be >= 1")

    @property
    def blocks_sign_off(self) -> bool:
        return self.severity in (LintSeverity.FATAL, LintSeverity.ERROR)


@dataclass(frozen=True)
class CexRecord:
    property_id: str
    trace_summary: str
    depth: int
    failing_signals: tuple[str, ...]

    def __post_init__(self) -> None:
        _require(self.depth >= 0, "cex depth must be >= 0")


@dataclass(frozen=True)
class CoverageSnapshot:
    """Consolidated code/assertion/functional coverage of one measurement.

    ``consolidated_pct`` is the minimum of the three kinds (conservative
    gate).  ``uncovered`` lists the report's uncovered location descriptors;
    ``unreachable_waived`` the subset a human has waived.  Waiving freezes
    the reported numbers; only the sign-off gate treats waived locations as
    covered (the limit of excluding them from the denominator).
    """

    code_pct: float
    assertion_pct: float
    functional_pct: float
    uncovered: tuple[str, ...] = ()
    unreachable_waived: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _pct(self.code_pct, "code_pct")
        _pct(self.assertion_pct, "assertion_pct")
        _pct(self.functional_pct, "functional_pct")

    @property
    def consolidated_pct(self) -> float:
        return min(self.code_pct, self.assertion_pct, self.functional_pct)

    def gap_locations(self) -> tuple[str, ...]:
        waived = set(self.unreachable_waived)
        return tuple(loc for loc in self.uncovered if loc not in waived)

    def effective_consolidated_pct(self) -> float:
        """Gate-side view: 100 when every uncovered location is waived."""
        if not self.gap_locations():
            return 100.0
        return self.consolidated_pct


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    design_id: str
    backend_id: str
    temperature: float
    random_seed: int = 0
    iteration_threshold: int = 5
    coverage_target_pct: float = 95.0
    step_budget: int = 10_000
    scenario_path: str | None = None

    def __post_init__(self) -> None:
        violations = config_violations(self)
        if violations:
            raise SpecValidationError(violations)


def config_violations(cfg: "RunConfig") -> list[Violation]:
    """Range checks for a run configuration, reported all at once."""
    out: list[Violation] = []
    if not cfg.design_id:
        out.append(Violation("missing-section", "design_id", "design_id must be non-empty"))
    if not (0.0 <= cfg.temperature <= 2.0):
        out.append(Violation("target-out-of-range", "temperature",
                             f"temperature must be within [0,2], got {cfg.temperature}"))
    if cfg.iteration_threshold < 1:
        out.append(Violation("target-out-of-range", "iteration_threshold",
                             "iteration_threshold must be >= 1"))
    if not (0.0 <= cfg.coverage_target_pct <= 100.0):
        out.append(Violation("target-out-of-range", "coverage_target_pct",
                             f"coverage_target_pct must be within [0,100], got {cfg.coverage_target_pct}"))
    if cfg.step_budget < 1:
        out.append(Violation("target-out-of-range", "step_budget", "step_budget must be >= 1"))
    return out


# ---------------------------------------------------------------------------
# Specification document parsing
# ---------------------------------------------------------------------------

SPEC_SECTIONS = ("requirements", "interfaces", "performance", "fsm")


def validate_specification(document: str) -> DesignSpecification:
    """Parse and validate a specification document.

    Returns a fully valid :class:`DesignSpecification` or raises
    :class:`SpecValidationError` carrying the complete list of violations
    (parsing never stops at the first problem).

    Document grammar (bit-exact definition in ``docs/spec-format.md``):
    a ``key: value`` header followed by the four fenced sections
    ``[requirements]``, ``[interfaces]``, ``[performance]``, ``[fsm]``.
    """
    header, sections, violations = _split_spec_document(document)

    design_id = header.get("design_id", "")
    if not design_id:
        violations.append(Violation("missing-section", "design_id", "header key design_id missing"))

    coverage_target = 95.0
    if "coverage_target_pct" in header:
        try:
            coverage_target = float(header["coverage_target_pct"])
        except ValueError:
            violations.append(Violation("target-out-of-range", "coverage_target_pct",
                                         f"not a number: {header['coverage_target_pct']!r}"))
        else:
            if not (0.0 <= coverage_target <= 100.0):
                violations.append(Violation("target-out-of-range", "coverage_target_pct",
                                             f"must be within [0,100], got {coverage_target}"))

    for name in SPEC_SECTIONS:
        if name not in sections:
            violations.append(Violation("missing-section", name, f"section [{name}] missing"))

    requirements = _parse_blocks(sections.get("requirements", []))
    interfaces = _parse_interfaces(sections.get("interfaces", []), violations)
    if "interfaces" in sections and not interfaces and not any(
        v.subject == "interfaces" for v in violations
    ):
        violations.append(Violation("missing-section", "interfaces", "no ports defined"))
    performance = _parse_performance(sections.get("performance", []), violations)
    fsm = _parse_fsm(sections.get("fsm", []), violations)

    if violations:
        raise SpecValidationError(violations)

    return DesignSpecification(
        design_id=design_id,
        requirements=requirements,
        interfaces=interfaces,
        performance_targets=performance,
        fsm_details=fsm,
        coverage_target_pct=coverage_target,
    )


def _split_spec_document(
    document: str,
) -> tuple[dict[str, str], dict[str, list[str]], list[Violation]]:
    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    violations: list[Violation] = []
    current: str | None = None
    for raw in document.splitlines():
        line = raw.rstrip("\n")
        stripped = line.strip()
        if stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if name not in SPEC_SECTIONS:
                violations.append(Violation("missing-section", name, f"unknown section [{name}]"))
                current = None
                continue
            current = name
            sections.setdefault(name, [])
            continue
        if current is None:
            if not stripped:
                continue
            if ":" in stripped:
                key, _, value = stripped.partition(":")
                header[key.strip()] = value.strip()
            else:
                violations.append(Violation("malformed-line", stripped, "header line lacks ':'"))
        else:
            sections[current].append(line)
    return header, sections, violations


def _parse_blocks(lines: list[str]) -> tuple[str, ...]:
    blocks: list[str] = []
    buf: list[str] = []
    for line in lines:
        if line.strip():
            buf.append(line.strip())
        elif buf:
            blocks.append(" ".join(buf))
            buf = []
    if buf:
        blocks.append(" ".join(buf))
    return tuple(blocks)


def _parse_interfaces(lines: list[str], violations: list[Violation]) -> tuple[PortDef, ...]:
    ports: list[PortDef] = []
    seen: set[str] = set()
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != 3:
            violations.append(Violation("malformed-line", stripped,
                                         "interface line must be 'name dir width'"))
            continue
        name, direction, width_text = parts
        ok = True
        if name in seen:
            violations.append(Violation("duplicate-port", name, "port name repeated"))
            ok = False
        seen.add(name)
        try:
            dir_value = PortDirection(direction)
        except ValueError:
            violations.append(Violation("malformed-line", name,
                                         f"direction must be in/out/inout, got {direction!r}"))
            ok = False
            dir_value = PortDirection.IN
        try:
            width = int(width_text)
        except ValueError:
            violations.append(Violation("invalid-width", name, f"width not an integer: {width_text!r}"))
            continue
        if width < 1:
            violations.append(Violation("invalid-width", name, f"width must be >= 1, got {width}"))
            continue
        if ok:
            ports.append(PortDef(name=name, direction=dir_value, width=width))
    return tuple(ports)


def _parse_performance(lines: list[str], violations: list[Violation]) -> tuple[PerformanceTarget, ...]:
    targets: list[PerformanceTarget] = []
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split(None, 2)
        if len(parts) < 3:
            violations.append(Violation("malformed-line", stripped,
                                         "performance line must be 'name value unit'"))
            continue
        name, value_text, unit = parts
        try:
            value = float(value_text)
        except ValueError:
            violations.append(Violation("malformed-line", name, f"value not a number: {value_text!r}"))
            continue
        targets.append(PerformanceTarget(name=name, value=value, unit=unit))
    return tuple(targets)


def _parse_fsm(lines: list[str], violations: list[Violation]) -> tuple[FsmDetail, ...]:
    details: list[FsmDetail] = []
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        if ":" not in stripped:
            violations.append(Violation("malformed-line", stripped, "fsm line must be 'STATE: transitions'"))
            continue
        state, _, rest = stripped.partition(":")
        details.append(FsmDetail(state=state.strip(), transitions=rest.strip()))
    return tuple(details)


# ---------------------------------------------------------------------------
# Deserialization (replay side of the event log)
# ---------------------------------------------------------------------------

def spec_from_dict(d: Mapping[str, Any]) -> DesignSpecification:
    return DesignSpecification(
        design_id=d["design_id"],
        requirements=tuple(d["requirements"]),
        interfaces=tuple(
            PortDef(p["name"], PortDirection(p["direction"]), p["width"]) for p in d["interfaces"]
        ),
        performance_targets=tuple(
            PerformanceTarget(t["name"], t["value"], t["unit"]) for t in d["performance_targets"]
        ),
        fsm_details=tuple(FsmDetail(f["state"], f["transitions"]) for f in d["fsm_details"]),
        coverage_target_pct=d["coverage_target_pct"],
    )


def microarchitecture_from_dict(d: Mapping[str, Any]) -> Microarchitecture:
    return Microarchitecture(
        datapath_components=tuple(
            DatapathComponent(c["name"], c["role"]) for c in d["datapath_components"]
        ),
        control_fsms=tuple(ControlFsm(c["name"], c["outline"]) for c in d["control_fsms"]),
        reset_strategy=ResetStrategy(d["reset_strategy"]),
        timing_constraints=tuple(
            TimingConstraint(t["name"], t["value"]) for t in d["timing_constraints"]
        ),
    )


def vplan_from_dict(d: Mapping[str, Any]) -> VerificationPlan:
    return VerificationPlan(
        entries=tuple(
            VPlanEntry(
                entry_id=e["entry_id"],
                property_type=PropertyType(e["property_type"]),
                intent=e["intent"],
                target_signals=tuple(e["target_signals"]),
            )
            for e in d["entries"]
        ),
        coverage_goals={CoverageKind(k): v for k, v in d["coverage_goals"].items()},
    )


def artifact_from_dict(d: Mapping[str, Any]) -> RtlArtifact:
    return RtlArtifact(
        module_name=d["module_name"],
        source_text=d["source_text"],
        revision=d["revision"],
        provenance=ArtifactProvenance(d["provenance"]),
        source_language_tag=d.get("source_language_tag", "systemverilog"),
    )


def property_from_dict(d: Mapping[str, Any]) -> SvaProperty:
    return SvaProperty(
        property_id=d["property_id"],
        vplan_entry_id=d["vplan_entry_id"],
        body_text=d["body_text"],
        status=PropertyStatus(d["status"]),
        provenance=PropertyProvenance(d["provenance"]),
    )


def lint_finding_from_dict(d: Mapping[str, Any]) -> LintFinding:
    return LintFinding(
        severity=LintSeverity(d["severity"]),
        rule_code=d["rule_code"],
        message=d["message"],
        module_name=d["module_name"],
        line=d["line"],
        category=LintCategory(d["category"]),
    )


def cex_from_dict(d: Mapping[str, Any]) -> CexRecord:
    return CexRecord(
        property_id=d["property_id"],
        trace_summary=d["trace_summary"],
        depth=d["depth"],
        failing_signals=tuple(d["failing_signals"]),
    )


def coverage_from_dict(d: Mapping[str, Any]) -> CoverageSnapshot:
    return CoverageSnapshot(
        code_pct=d["code_pct"],
        assertion_pct=d["assertion_pct"],
        functional_pct=d["functional_pct"],
        uncovered=tuple(d["uncovered"]),
        unreachable_waived=tuple(d["unreachable_waived"]),
    )


def config_from_dict(d: Mapping[str, Any]) -> RunConfig:
    return RunConfig(
        design_id=d["design_id"],
        backend_id=d["backend_id"],
        temperature=d["temperature"],
        random_seed=d["random_seed"],
        iteration_threshold=d["iteration_threshold"],
        coverage_target_pct=d["coverage_target_pct"],
        step_budget=d["step_budget"],
        scenario_path=d.get("scenario_path"),
    )
