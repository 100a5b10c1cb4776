"""EDA tool adapters, report dialects, and the scripted fake toolchain.

Every tool run, real or fake, produces a plain-text report in one of three
line-oriented dialects (lint, formal, coverage).  The engine only consumes
reports through the parsers in this module, and the fake toolchain produces
its reports through the same renderers, so a scripted run exercises exactly
the code path a real subprocess adapter would.  Renderers and parsers are
exact inverses: ``parse(render(r)) == r``.

Percentages are rendered with ``repr`` so parsed values compare equal to the
originals bit for bit.
"""

from __future__ import annotations

import json
import logging
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .domain import (
    CexRecord,
    CoverageSnapshot,
    DomainError,
    LintCategory,
    LintFinding,
    LintSeverity,
    PropertyStatus,
    SvaProperty,
    Violation,
)

logger = logging.getLogger(__name__)


class ReportParseError(DomainError):
    def __init__(self, line_no: int, reason: str):
        self.line_no, self.reason = line_no, reason
        super().__init__(f"report line {line_no}: {reason}")


class ToolInvocationError(DomainError):
    """The tool itself failed (nonzero exit, missing report, scripted crash)."""

    def __init__(self, tool_id: str, detail: str):
        self.tool_id, self.detail = tool_id, detail
        super().__init__(f"tool {tool_id} failed: {detail}")


class ScheduleExhausted(ToolInvocationError):
    def __init__(self, kind: str, invocation: int):
        self.kind, self.invocation = kind, invocation
        super(ToolInvocationError, self).__init__(
            f"fake toolchain has no {kind} entry for invocation {invocation}"
        )
        self.tool_id = f"fake-{kind}"
        self.detail = f"schedule exhausted at invocation {invocation}"


# ---------------------------------------------------------------------------
# Lint dialect
# ---------------------------------------------------------------------------

#: Rule-code prefix to category.  Codes with no known prefix map to OTHER so
#: a tool upgrade that invents new rules can never crash the engine.
RULE_PREFIX_CATEGORIES: dict[str, LintCategory] = {
    "SYN": LintCategory.SYNTAX,
    "PLH": LintCategory.PLACEHOLDER,
    "WID": LintCategory.WIDTH_MISMATCH,
    "UNS": LintCategory.UNSYNTHESIZABLE,
    "STY": LintCategory.STYLE,
}


def categorize_lint(rule_code: str) -> LintCategory:
    return RULE_PREFIX_CATEGORIES.get(rule_code[:3].upper(), LintCategory.OTHER)


@dataclass(frozen=True)
class LintResult:
    tool_id: str
    walltime_ms: int
    findings: tuple[LintFinding, ...]

    def count(self, *severities: LintSeverity) -> int:
        wanted = set(severities) or set(LintSeverity)
        return sum(1 for f in self.findings if f.severity in wanted)

    @property
    def blocking_count(self) -> int:
        return sum(1 for f in self.findings if f.blocks_sign_off)


def render_lint_report(result: LintResult) -> str:
    lines = [f"LINT-REPORT {result.tool_id}", f"WALLTIME {result.walltime_ms}"]
    for f in result.findings:
        lines.append(
            f"{f.severity.value.upper()} {f.rule_code} {f.module_name}:{f.line} {f.message}"
        )
    lines.append("END-REPORT")
    return "\n".join(lines) + "\n"


def parse_lint_report(text: str) -> LintResult:
    tool_id, walltime, body = _split_report(text, "LINT-REPORT")
    findings: list[LintFinding] = []
    for line_no, line in body:
        parts = line.split(None, 3)
        if len(parts) < 4:
            raise ReportParseError(line_no, f"lint line needs 4 fields: {line!r}")
        sev_text, rule_code, location, message = parts
        try:
            severity = LintSeverity(sev_text.lower())
        except ValueError as exc:
            raise ReportParseError(line_no, f"unknown severity {sev_text!r}") from exc
        module_name, sep, line_text = location.rpartition(":")
        if not sep or not module_name:
            raise ReportParseError(line_no, f"location must be module:line, got {location!r}")
        try:
            src_line = int(line_text)
        except ValueError as exc:
            raise ReportParseError(line_no, f"line number not an integer: {line_text!r}") from exc
        findings.append(
            LintFinding(
                severity=severity,
                rule_code=rule_code,
                message=message,
                module_name=module_name,
                line=src_line,
                category=categorize_lint(rule_code),
            )
        )
    return LintResult(tool_id=tool_id, walltime_ms=walltime, findings=tuple(findings))


# ---------------------------------------------------------------------------
# Formal dialect
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PropertyVerdict:
    property_id: str
    status: PropertyStatus
    cex: CexRecord | None = None
    detail: str = ""

    def __post_init__(self) -> None:
        if self.status not in (
            PropertyStatus.PROVEN,
            PropertyStatus.CEX,
            PropertyStatus.TOOL_ERROR,
        ):
            raise ValueError(f"a formal run cannot report status {self.status.value}")
        if (self.status is PropertyStatus.CEX) != (self.cex is not None):
            raise ValueError("CEX verdicts carry a counterexample, others must not")


@dataclass(frozen=True)
class FormalResult:
    tool_id: str
    walltime_ms: int
    verdicts: tuple[PropertyVerdict, ...]

    def counterexamples(self) -> tuple[CexRecord, ...]:
        return tuple(v.cex for v in self.verdicts if v.cex is not None)


def render_formal_report(result: FormalResult) -> str:
    lines = [f"FORMAL-REPORT {result.tool_id}", f"WALLTIME {result.walltime_ms}"]
    for v in result.verdicts:
        if v.status is PropertyStatus.PROVEN:
            lines.append(f"PROP {v.property_id} PROVEN")
        elif v.status is PropertyStatus.CEX:
            assert v.cex is not None
            signals = ",".join(v.cex.failing_signals)
            lines.append(
                f"PROP {v.property_id} CEX depth={v.cex.depth} "
                f"signals={signals} trace={json.dumps(v.cex.trace_summary, ensure_ascii=False)}"
            )
        else:
            lines.append(f"PROP {v.property_id} TOOL-ERROR {v.detail}".rstrip())
    lines.append("END-REPORT")
    return "\n".join(lines) + "\n"


def parse_formal_report(text: str) -> FormalResult:
    tool_id, walltime, body = _split_report(text, "FORMAL-REPORT")
    verdicts: list[PropertyVerdict] = []
    for line_no, line in body:
        parts = line.split(None, 2)
        if len(parts) < 3 or parts[0] != "PROP":
            raise ReportParseError(line_no, f"formal line must be 'PROP <id> <verdict>': {line!r}")
        _, property_id, rest = parts
        if rest == "PROVEN":
            verdicts.append(PropertyVerdict(property_id, PropertyStatus.PROVEN))
        elif rest.startswith("CEX "):
            verdicts.append(
                PropertyVerdict(
                    property_id,
                    PropertyStatus.CEX,
                    cex=_parse_cex_fields(property_id, rest[4:], line_no),
                )
            )
        elif rest == "TOOL-ERROR" or rest.startswith("TOOL-ERROR "):
            detail = rest[len("TOOL-ERROR"):].strip()
            verdicts.append(PropertyVerdict(property_id, PropertyStatus.TOOL_ERROR, detail=detail))
        else:
            raise ReportParseError(line_no, f"unknown verdict in {line!r}")
    return FormalResult(tool_id=tool_id, walltime_ms=walltime, verdicts=tuple(verdicts))


def _parse_cex_fields(property_id: str, rest: str, line_no: int) -> CexRecord:
    if "trace=" not in rest:
        raise ReportParseError(line_no, "CEX verdict missing trace=")
    head, _, trace_raw = rest.partition("trace=")
    fields: dict[str, str] = {}
    for token in head.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ReportParseError(line_no, f"bad CEX field {token!r}")
        fields[key] = value
    try:
        depth = int(fields["depth"])
    except (KeyError, ValueError) as exc:
        raise ReportParseError(line_no, f"bad or missing CEX depth: {exc}") from exc
    signals = tuple(s for s in fields.get("signals", "").split(",") if s)
    try:
        trace = json.loads(trace_raw)
    except json.JSONDecodeError as exc:
        raise ReportParseError(line_no, f"CEX trace is not a JSON string: {exc}") from exc
    if not isinstance(trace, str):
        raise ReportParseError(line_no, "CEX trace must be a JSON string")
    return CexRecord(property_id=property_id, trace_summary=trace, depth=depth, failing_signals=signals)


# ---------------------------------------------------------------------------
# Coverage dialect
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageResult:
    tool_id: str
    walltime_ms: int
    snapshot: CoverageSnapshot

    def __post_init__(self) -> None:
        # raw tool output never carries waivers; those belong to run state
        if self.snapshot.unreachable_waived:
            raise ValueError("tool-side coverage cannot include waivers")


def render_coverage_report(result: CoverageResult) -> str:
    s = result.snapshot
    lines = [
        f"COVERAGE-REPORT {result.tool_id}",
        f"WALLTIME {result.walltime_ms}",
        f"CODE {s.code_pct!r}",
        f"ASSERTION {s.assertion_pct!r}",
        f"FUNCTIONAL {s.functional_pct!r}",
    ]
    for location in s.uncovered:
        lines.append(f"UNCOVERED {location}")
    lines.append("END-REPORT")
    return "\n".join(lines) + "\n"


def parse_coverage_report(text: str) -> CoverageResult:
    tool_id, walltime, body = _split_report(text, "COVERAGE-REPORT")
    pcts: dict[str, float] = {}
    uncovered: list[str] = []
    for line_no, line in body:
        keyword, _, rest = line.partition(" ")
        if keyword in ("CODE", "ASSERTION", "FUNCTIONAL"):
            if keyword in pcts:
                raise ReportParseError(line_no, f"duplicate {keyword} line")
            try:
                value = float(rest.strip())
            except ValueError as exc:
                raise ReportParseError(line_no, f"{keyword} value not a number: {rest!r}") from exc
            if not (0.0 <= value <= 100.0):
                raise ReportParseError(line_no, f"{keyword} out of range: {value}")
            pcts[keyword] = value
        elif keyword == "UNCOVERED":
            if not rest.strip():
                raise ReportParseError(line_no, "UNCOVERED line without a location")
            uncovered.append(rest.strip())
        else:
            raise ReportParseError(line_no, f"unknown coverage line {line!r}")
    missing = {"CODE", "ASSERTION", "FUNCTIONAL"} - set(pcts)
    if missing:
        raise ReportParseError(0, f"coverage report missing {sorted(missing)}")
    return CoverageResult(
        tool_id=tool_id,
        walltime_ms=walltime,
        snapshot=CoverageSnapshot(
            code_pct=pcts["CODE"],
            assertion_pct=pcts["ASSERTION"],
            functional_pct=pcts["FUNCTIONAL"],
            uncovered=tuple(uncovered),
        ),
    )


def _split_report(text: str, expected_header: str) -> tuple[str, int, list[tuple[int, str]]]:
    lines = text.splitlines()
    meaningful = [(i + 1, ln.rstrip()) for i, ln in enumerate(lines) if ln.strip()]
    if not meaningful:
        raise ReportParseError(0, "empty report")
    first_no, first = meaningful[0]
    header, _, tool_id = first.partition(" ")
    if header != expected_header or not tool_id.strip():
        raise ReportParseError(first_no, f"expected '{expected_header} <tool_id>', got {first!r}")
    if len(meaningful) < 2:
        raise ReportParseError(first_no, "report truncated before WALLTIME")
    wt_no, wt_line = meaningful[1]
    wt_key, _, wt_value = wt_line.partition(" ")
    if wt_key != "WALLTIME":
        raise ReportParseError(wt_no, f"expected WALLTIME line, got {wt_line!r}")
    try:
        walltime = int(wt_value)
    except ValueError as exc:
        raise ReportParseError(wt_no, f"WALLTIME not an integer: {wt_value!r}") from exc
    if walltime < 0:
        raise ReportParseError(wt_no, "WALLTIME must be >= 0")
    last_no, last = meaningful[-1]
    if last != "END-REPORT":
        raise ReportParseError(last_no, "report not terminated by END-REPORT")
    return tool_id.strip(), walltime, meaningful[2:-1]


# ---------------------------------------------------------------------------
# Counterexample triage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CexAnalysis:
    property_id: str
    depth: int
    failing_signals: tuple[str, ...]
    hint: str


def analyze_cex(cex: CexRecord) -> CexAnalysis:
    """Summarize a counterexample for the fixing agent's prompt."""
    if cex.failing_signals:
        focus = ", ".join(cex.failing_signals)
        hint = (
            f"property {cex.property_id} fails at depth {cex.depth}; "
            f"inspect the drivers of {focus} against the property's antecedent"
        )
    else:
        hint = (
            f"property {cex.property_id} fails at depth {cex.depth}; "
            "the trace names no signals, so re-derive the property from its plan entry"
        )
    return CexAnalysis(
        property_id=cex.property_id,
        depth=cex.depth,
        failing_signals=cex.failing_signals,
        hint=hint,
    )


# ---------------------------------------------------------------------------
# Subprocess adapters
# ---------------------------------------------------------------------------

TOOL_KINDS = ("lint", "formal", "coverage")


@dataclass(frozen=True)
class ToolAdapter:
    """How to invoke one external tool.

    ``command`` is an argv list, executed without a shell.  Placeholders
    ``{input}``, ``{report}``, and ``{workdir}`` are substituted per run.
    """

    tool_id: str
    kind: str
    command: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.kind not in TOOL_KINDS:
            raise ValueError(f"adapter kind must be one of {TOOL_KINDS}, got {self.kind!r}")
        if not self.command:
            raise ValueError(f"adapter {self.tool_id} has an empty command")
        joined = " ".join(self.command)
        if "{report}" not in joined:
            raise ValueError(f"adapter {self.tool_id} command never writes {{report}}")


class AdapterConfigError(DomainError):
    def __init__(self, violations: Iterable[Violation]):
        self.violations = tuple(violations)
        summary = "; ".join(f"{v.kind}({v.subject}): {v.detail}" for v in self.violations)
        super().__init__(f"adapter config invalid: {summary}")


def load_adapters(path: str | Path) -> dict[str, ToolAdapter]:
    """Read an adapter config file; returns {kind: adapter}, one per kind."""
    violations: list[Violation] = []
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise AdapterConfigError([Violation("unreadable", str(path), str(exc))]) from exc
    adapters: dict[str, ToolAdapter] = {}
    entries = data.get("adapters")
    if not isinstance(entries, list):
        raise AdapterConfigError([Violation("missing-section", "adapters", "top-level 'adapters' list required")])
    for i, entry in enumerate(entries):
        subject = f"adapters[{i}]"
        if not isinstance(entry, dict):
            violations.append(Violation("malformed-entry", subject, "not an object"))
            continue
        try:
            adapter = ToolAdapter(
                tool_id=entry["tool_id"],
                kind=entry["kind"],
                command=tuple(entry["command"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            violations.append(Violation("malformed-entry", subject, str(exc)))
            continue
        if adapter.kind in adapters:
            violations.append(Violation("duplicate-kind", adapter.kind, "two adapters for one kind"))
            continue
        adapters[adapter.kind] = adapter
    if violations:
        raise AdapterConfigError(violations)
    return adapters


class SubprocessToolchain:
    """Drives real tools: write inputs, run the adapter argv, read the report.

    Interchangeable with :class:`FakeToolchain` because the engine consumes
    both through the same parsed-report boundary.
    """

    def __init__(self, adapters: Mapping[str, ToolAdapter], workdir: str | Path):
        self._adapters = dict(adapters)
        self._workdir = Path(workdir)

    def _invoke(self, kind: str, input_files: Mapping[str, str]) -> str:
        if kind not in self._adapters:
            raise ToolInvocationError(f"<{kind}>", f"no adapter configured for kind {kind!r}")
        adapter = self._adapters[kind]
        workdir = self._workdir / kind
        workdir.mkdir(parents=True, exist_ok=True)
        input_path = workdir / "input.f"
        manifest: list[str] = []
        for rel, content in input_files.items():
            target = workdir / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(content, encoding="utf-8")
            manifest.append(str(target))
        input_path.write_text("\n".join(manifest) + "\n", encoding="utf-8")
        report_path = workdir / "report.txt"
        argv = [
            arg.replace("{input}", str(input_path))
            .replace("{report}", str(report_path))
            .replace("{workdir}", str(workdir))
            for arg in adapter.command
        ]
        proc = subprocess.run(argv, capture_output=True, text=True)
        if proc.returncode != 0:
            raise ToolInvocationError(adapter.tool_id, f"exit {proc.returncode}: {proc.stderr.strip()[:500]}")
        if not report_path.exists():
            raise ToolInvocationError(adapter.tool_id, "tool exited 0 but wrote no report")
        return report_path.read_text(encoding="utf-8")

    def run_lint(self, artifacts: Mapping[str, str]) -> str:
        return self._invoke("lint", {f"{name}.sv": text for name, text in artifacts.items()})

    def run_formal(self, properties: Sequence[SvaProperty], artifacts: Mapping[str, str]) -> str:
        files = {f"{name}.sv": text for name, text in artifacts.items()}
        files["properties.sva"] = "\n\n".join(
            f"// {p.property_id} ({p.vplan_entry_id})\n{p.body_text}" for p in properties
        )
        return self._invoke("formal", files)

    def run_coverage(self, properties: Sequence[SvaProperty], artifacts: Mapping[str, str]) -> str:
        files = {f"{name}.sv": text for name, text in artifacts.items()}
        files["properties.sva"] = "\n\n".join(p.body_text for p in properties)
        return self._invoke("coverage", files)


# ---------------------------------------------------------------------------
# Fake toolchain
# ---------------------------------------------------------------------------

class FakeToolchain:
    """Deterministic toolchain driven by a scenario's fault schedule.

    Each kind has an ordered list of scripted invocations.  The fake does
    not shortcut the text layer: it renders a real report with the dialect
    renderers above and hands back text, which the engine then parses with
    the same parsers used for subprocess tools.
    """

    def __init__(self, schedule: Mapping[str, list[dict[str, Any]]]):
        self._schedule = {k: list(schedule.get(k, [])) for k in TOOL_KINDS}
        self._calls = {k: 0 for k in TOOL_KINDS}

    def calls(self, kind: str) -> int:
        return self._calls[kind]

    def _next(self, kind: str) -> dict[str, Any]:
        idx = self._calls[kind]
        entries = self._schedule[kind]
        if idx >= len(entries):
            raise ScheduleExhausted(kind, idx + 1)
        self._calls[kind] += 1
        entry = entries[idx]
        if "crash" in entry:
            raise ToolInvocationError(entry.get("tool_id", f"fake-{kind}"), str(entry["crash"]))
        return entry

    def run_lint(self, artifacts: Mapping[str, str]) -> str:
        entry = self._next("lint")
        findings = tuple(
            LintFinding(
                severity=LintSeverity(f["severity"]),
                rule_code=f["rule_code"],
                message=f["message"],
                module_name=f["module"],
                line=int(f["line"]),
                category=categorize_lint(f["rule_code"]),
            )
            for f in entry.get("findings", [])
        )
        result = LintResult(
            tool_id=entry.get("tool_id", "fake-lint"),
            walltime_ms=int(entry.get("walltime_ms", 0)),
            findings=findings,
        )
        return render_lint_report(result)

    def run_formal(self, properties: Sequence[SvaProperty], artifacts: Mapping[str, str]) -> str:
        entry = self._next("formal")
        cex_at = {int(c["at"]): c for c in entry.get("cexs", [])}
        err_at = {int(e["at"]): e for e in entry.get("errors", [])}
        verdicts: list[PropertyVerdict] = []
        for i, prop in enumerate(properties):
            if i in cex_at:
                c = cex_at[i]
                verdicts.append(
                    PropertyVerdict(
                        prop.property_id,
                        PropertyStatus.CEX,
                        cex=CexRecord(
                            property_id=prop.property_id,
                            trace_summary=c["trace"],
                            depth=int(c["depth"]),
                            failing_signals=tuple(c.get("signals", [])),
                        ),
                    )
                )
            elif i in err_at:
                verdicts.append(
                    PropertyVerdict(
                        prop.property_id,
                        PropertyStatus.TOOL_ERROR,
                        detail=str(err_at[i].get("detail", "")),
                    )
                )
            else:
                verdicts.append(PropertyVerdict(prop.property_id, PropertyStatus.PROVEN))
        result = FormalResult(
            tool_id=entry.get("tool_id", "fake-formal"),
            walltime_ms=int(entry.get("walltime_ms", 0)),
            verdicts=tuple(verdicts),
        )
        return render_formal_report(result)

    def run_coverage(self, properties: Sequence[SvaProperty], artifacts: Mapping[str, str]) -> str:
        entry = self._next("coverage")
        result = CoverageResult(
            tool_id=entry.get("tool_id", "fake-coverage"),
            walltime_ms=int(entry.get("walltime_ms", 0)),
            snapshot=CoverageSnapshot(
                code_pct=float(entry["code_pct"]),
                assertion_pct=float(entry["assertion_pct"]),
                functional_pct=float(entry["functional_pct"]),
                uncovered=tuple(entry.get("uncovered", [])),
            ),
        )
        return render_coverage_report(result)


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

class SchemaViolation(DomainError):
    """A scenario file is structurally bad; carries every problem found."""

    def __init__(self, path: str, violations: Iterable[Violation]):
        self.path = path
        self.violations = tuple(violations)
        summary = "; ".join(f"{v.kind}({v.subject}): {v.detail}" for v in self.violations)
        super().__init__(f"scenario {path} invalid: {summary}")


class ScenarioIncomplete(DomainError):
    """A scenario parses but cannot drive a run to completion."""

    def __init__(self, path: str, missing: Iterable[str]):
        self.path = path
        self.missing = tuple(missing)
        super().__init__(f"scenario {path} incomplete: " + "; ".join(self.missing))


RESOLUTION_KINDS = (
    "patch-rtl",
    "replace-properties",
    "remove-properties",
    "add-properties",
    "waive-unreachable",
    "edit-spec",
    "abort",
)

TICKET_TRIGGERS = (
    "deliberation-exhausted",
    "zero-progress-coverage",
    "tool-failure",
    "step-budget",
)


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario: scripted responses, tool schedule, human resolutions.

    ``expected`` is the frozen benchmark row the scenario was built to
    reproduce; tests compare computed metrics against it.
    """

    path: str
    design_id: str
    spec_file: str
    responses: tuple[dict[str, Any], ...]
    toolchain: dict[str, list[dict[str, Any]]]
    resolutions: tuple[dict[str, Any], ...]
    expected: dict[str, Any]
    description: str = ""

    def spec_path(self) -> Path:
        base = Path(self.path).parent
        return (base / self.spec_file).resolve()

    def make_toolchain(self, bucket: str) -> FakeToolchain:
        return FakeToolchain(resolve_bucket_schedule(self.toolchain, bucket))


def resolve_bucket_schedule(
    schedule: Mapping[str, list[dict[str, Any]]], bucket: str
) -> dict[str, list[dict[str, Any]]]:
    """Expand a schedule's per-bucket entries for one temperature bucket.

    An entry may be either a plain invocation (used by every bucket) or
    ``{"per_bucket": {...}}``; the latter resolves to that bucket's variant
    and is skipped entirely in buckets it does not mention, so buckets may
    see different invocation *counts*, not just different contents.
    """
    out: dict[str, list[dict[str, Any]]] = {}
    for kind, entries in schedule.items():
        resolved = []
        for entry in entries:
            if "per_bucket" in entry:
                variants = entry["per_bucket"]
                if bucket not in variants:
                    continue
                resolved.append(variants[bucket])
            else:
                resolved.append(entry)
        out[kind] = resolved
    return out


def _check_tool_entry(
    kind: str, subject: str, entry: dict[str, Any], violations: list[Violation]
) -> None:
    if "crash" in entry:
        return
    if kind == "coverage":
        for pct_key in ("code_pct", "assertion_pct", "functional_pct"):
            value = entry.get(pct_key)
            if not isinstance(value, (int, float)):
                violations.append(Violation("missing-key", subject, f"{pct_key} must be a number"))
            elif not (0.0 <= float(value) <= 100.0):
                violations.append(
                    Violation("target-out-of-range", subject, f"{pct_key}={value} outside [0,100]")
                )
    if kind == "lint":
        for j, f in enumerate(entry.get("findings", [])):
            fsubject = f"{subject}.findings[{j}]"
            if not isinstance(f, dict):
                violations.append(Violation("malformed-entry", fsubject, "not an object"))
                continue
            sev = f.get("severity")
            if sev not in [s.value for s in LintSeverity]:
                violations.append(Violation("malformed-entry", fsubject, f"bad severity {sev!r}"))
            if not isinstance(f.get("line"), int) or f.get("line", 0) < 1:
                violations.append(Violation("malformed-entry", fsubject, "line must be int >= 1"))


def load_scenario(path: str | Path) -> Scenario:
    """Parse and schema-check a scenario file.

    Collects every violation before raising :class:`SchemaViolation`.
    Completeness against an actual run (can every bucket reach sign-off or
    a deliberate abort?) is a separate dry-run check in the workflow layer.
    """
    path = Path(path)
    violations: list[Violation] = []
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaViolation(str(path), [Violation("unreadable", str(path), str(exc))]) from exc
    if not isinstance(data, dict):
        raise SchemaViolation(str(path), [Violation("malformed", "scenario", "top level must be an object")])

    design_id = data.get("design_id", "")
    if not design_id or not isinstance(design_id, str):
        violations.append(Violation("missing-key", "design_id", "non-empty string required"))
    spec_file = data.get("spec_file", "")
    if not spec_file or not isinstance(spec_file, str):
        violations.append(Violation("missing-key", "spec_file", "non-empty string required"))

    responses = data.get("responses", [])
    if not isinstance(responses, list) or not responses:
        violations.append(Violation("missing-key", "responses", "non-empty list required"))
        responses = []
    for i, r in enumerate(responses):
        subject = f"responses[{i}]"
        if not isinstance(r, dict):
            violations.append(Violation("malformed-entry", subject, "not an object"))
            continue
        for key in ("role_id", "design_id", "phase", "task_id", "iteration", "text"):
            if key not in r:
                violations.append(Violation("missing-key", subject, f"missing {key}"))
        bucket = r.get("bucket", "*")
        if bucket not in ("low", "mid", "high", "*"):
            violations.append(Violation("malformed-entry", subject, f"bad bucket {bucket!r}"))

    toolchain = data.get("toolchain", {})
    if not isinstance(toolchain, dict):
        violations.append(Violation("malformed-entry", "toolchain", "must be an object"))
        toolchain = {}
    for kind, entries in toolchain.items():
        if kind not in TOOL_KINDS:
            violations.append(Violation("malformed-entry", f"toolchain.{kind}", "unknown tool kind"))
            continue
        if not isinstance(entries, list):
            violations.append(Violation("malformed-entry", f"toolchain.{kind}", "must be a list"))
            continue
        for i, entry in enumerate(entries):
            subject = f"toolchain.{kind}[{i}]"
            if not isinstance(entry, dict):
                violations.append(Violation("malformed-entry", subject, "not an object"))
                continue
            variants: list[tuple[str, dict[str, Any]]] = [(subject, entry)]
            if "per_bucket" in entry:
                per_bucket = entry["per_bucket"]
                if not isinstance(per_bucket, dict) or not per_bucket:
                    violations.append(Violation("malformed-entry", subject, "per_bucket must be a non-empty object"))
                    continue
                variants = []
                for bucket, variant in per_bucket.items():
                    vsubject = f"{subject}.per_bucket.{bucket}"
                    if bucket not in ("low", "mid", "high"):
                        violations.append(Violation("malformed-entry", vsubject, f"bad bucket {bucket!r}"))
                        continue
                    if not isinstance(variant, dict):
                        violations.append(Violation("malformed-entry", vsubject, "not an object"))
                        continue
                    variants.append((vsubject, variant))
            for vsubject, variant in variants:
                _check_tool_entry(kind, vsubject, variant, violations)

    resolutions = data.get("resolutions", [])
    if not isinstance(resolutions, list):
        violations.append(Violation("malformed-entry", "resolutions", "must be a list"))
        resolutions = []
    for i, entry in enumerate(resolutions):
        subject = f"resolutions[{i}]"
        if not isinstance(entry, dict):
            violations.append(Violation("malformed-entry", subject, "not an object"))
            continue
        trigger = entry.get("trigger")
        if trigger not in TICKET_TRIGGERS:
            violations.append(Violation("malformed-entry", subject, f"bad trigger {trigger!r}"))
        body = entry.get("resolution")
        bodies = [body] if isinstance(body, dict) else []
        per_bucket = entry.get("per_bucket", {})
        if isinstance(per_bucket, dict):
            bodies.extend(v for v in per_bucket.values() if isinstance(v, dict))
        if not bodies:
            violations.append(Violation("missing-key", subject, "resolution object required"))
        for body_obj in bodies:
            kind = body_obj.get("kind")
            if kind not in RESOLUTION_KINDS:
                violations.append(Violation("malformed-entry", subject, f"bad resolution kind {kind!r}"))
            minutes = body_obj.get("effort_minutes", 0)
            if not isinstance(minutes, int) or minutes < 0:
                violations.append(Violation("malformed-entry", subject, "effort_minutes must be int >= 0"))

    expected = data.get("expected", {})
    if not isinstance(expected, dict):
        violations.append(Violation("malformed-entry", "expected", "must be an object"))
        expected = {}

    if violations:
        raise SchemaViolation(str(path), violations)

    return Scenario(
        path=str(path),
        design_id=design_id,
        spec_file=spec_file,
        responses=tuple(responses),
        toolchain={k: list(v) for k, v in toolchain.items()},
        resolutions=tuple(resolutions),
        expected=expected,
        description=data.get("description", ""),
    )
