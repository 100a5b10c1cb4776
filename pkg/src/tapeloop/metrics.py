"""Evaluation bookkeeping derived from run event logs.

Everything here is a pure read-side fold: a terminated run's log is the
single source of truth, and the same log always yields the same numbers.
The "mas" columns capture the first piece of evidence of each kind that
the agents produced on their own; the "hitl" columns capture the final
state after any human interventions.  Aggregates are plain unweighted
arithmetic means.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .bus import BusEvent, read_log
from .domain import (
    AccuracyClass,
    DomainError,
    LintSeverity,
    canonical_json,
    coverage_from_dict,
    to_jsonable,
)
from .workflow import RunState, replay_events


class IncompleteLog(DomainError):
    """The log lacks evidence required for a full metrics row."""

    def __init__(self, missing: Sequence[str]) -> None:
        self.missing = tuple(missing)
        super().__init__("incomplete log, missing: " + ", ".join(self.missing))


class EmptyTable(DomainError):
    pass


class DesignSetMismatch(DomainError):
    def __init__(self, left: Iterable[str], right: Iterable[str]) -> None:
        self.left = tuple(sorted(left))
        self.right = tuple(sorted(right))
        super().__init__(f"design sets differ: {self.left} vs {self.right}")


def classify_logical_accuracy(
    functional_pass: bool,
    synthesizable: bool,
    placeholders_present: bool,
) -> AccuracyClass:
    """Bucket one design revision by review evidence.

    Total function with fixed precedence: stubbed-out logic trumps a
    failing functional check, which trumps synthesizability complaints.
    """
    if placeholders_present:
        return AccuracyClass.INCOMPLETE
    if not functional_pass:
        return AccuracyClass.INCORRECT
    if not synthesizable:
        return AccuracyClass.NON_SYNTHESIZABLE
    return AccuracyClass.CORRECT


def _classify_review_event(payload: Mapping[str, Any]) -> AccuracyClass:
    return classify_logical_accuracy(
        bool(payload["functional_pass"]),
        bool(payload["synthesizable"]),
        bool(payload["placeholders_present"]),
    )


@dataclass(frozen=True)
class RunMetrics:
    """One benchmark-table row for a finished run."""

    design_id: str
    temperature: float
    lint_errors_mas: int
    lint_fatal_mas: bool
    lint_errors_hitl: int
    lint_fatal_hitl: bool
    accuracy_mas: AccuracyClass
    accuracy_hitl: AccuracyClass
    properties_mas: int
    properties_hitl: int
    coverage_mas_pct: float
    coverage_hitl_pct: float
    cex_mas: int
    cex_hitl: int
    hitl_rtl_minutes: int
    hitl_formal_minutes: int
    rtl_iterations: int

    def __post_init__(self) -> None:
        for name in (
            "lint_errors_mas",
            "lint_errors_hitl",
            "properties_mas",
            "properties_hitl",
            "cex_mas",
            "cex_hitl",
            "hitl_rtl_minutes",
            "hitl_formal_minutes",
            "rtl_iterations",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("coverage_mas_pct", "coverage_hitl_pct"):
            pct = getattr(self, name)
            if not 0.0 <= pct <= 100.0:
                raise ValueError(f"{name} must be within [0, 100]")


NUMERIC_COLUMNS = (
    "lint_errors_mas",
    "lint_errors_hitl",
    "properties_mas",
    "properties_hitl",
    "coverage_mas_pct",
    "coverage_hitl_pct",
    "cex_mas",
    "cex_hitl",
    "hitl_rtl_minutes",
    "hitl_formal_minutes",
    "rtl_iterations",
)


@dataclass(frozen=True)
class BenchmarkTable:
    rows: tuple[RunMetrics, ...]
    aggregates: Mapping[str, float]


@dataclass(frozen=True)
class ZeroShotComparison:
    deltas: Mapping[str, float]  # design_id -> mas coverage minus zero-shot
    mean_mas_pct: float
    mean_zero_shot_pct: float
    mean_delta_pct: float


def _blocking_stats(findings: Iterable[Mapping[str, Any]]) -> tuple[int, bool]:
    count = 0
    fatal = False
    for f in findings:
        sev = LintSeverity(f["severity"])
        if sev in (LintSeverity.FATAL, LintSeverity.ERROR):
            count += 1
        if sev is LintSeverity.FATAL:
            fatal = True
    return count, fatal


def compute_run_metrics(events: Sequence[BusEvent]) -> RunMetrics:
    """Fold a terminated run's log into its benchmark-table row.

    First-evidence events feed the mas columns; the replayed final state
    feeds the hitl columns, so human edits show up only on that side.
    Raises IncompleteLog when the run never produced a full evidence set
    (e.g. it aborted before execution).
    """
    if not events:
        raise IncompleteLog(["run-created"])

    state = replay_events(events)
    missing: list[str] = []
    if state.public_state() not in ("signed-off", "aborted"):
        missing.append("terminal-status")

    first_lint: tuple[int, bool] | None = None
    first_review: AccuracyClass | None = None
    last_review: AccuracyClass | None = None
    first_formal: tuple[int, int] | None = None  # (verdicts, cexs)
    first_coverage: float | None = None
    rtl_iterations = 0

    for ev in events:
        etype = ev.payload.get("type")
        if etype == "tool-report":
            kind = ev.payload["kind"]
            parsed = ev.payload["parsed"]
            if kind == "lint" and first_lint is None:
                first_lint = _blocking_stats(parsed["findings"])
            elif kind == "formal" and first_formal is None:
                verdicts = parsed["verdicts"]
                cexs = sum(1 for v in verdicts if v["status"] == "cex")
                first_formal = (len(verdicts), cexs)
            elif kind == "coverage" and first_coverage is None:
                snap = coverage_from_dict(parsed["snapshot"])
                first_coverage = snap.consolidated_pct
        elif etype == "design-review":
            cls = _classify_review_event(ev.payload)
            if first_review is None:
                first_review = cls
            last_review = cls
        elif etype == "deliberation-finished":
            task_id = ev.payload.get("task_id", "")
            if task_id.startswith("rtl:"):
                rtl_iterations = max(rtl_iterations, int(ev.payload["iterations_used"]))

    if first_lint is None:
        missing.append("lint-report")
    if first_review is None or last_review is None:
        missing.append("design-review")
    if first_formal is None:
        missing.append("formal-report")
    if first_coverage is None or state.coverage is None:
        missing.append("coverage-report")
    if state.last_lint is None:
        missing.append("final-lint")
    if missing:
        raise IncompleteLog(missing)

    assert first_lint and first_review and last_review and first_formal
    assert first_coverage is not None and state.coverage is not None
    assert state.last_lint is not None

    hitl_count = sum(1 for f in state.last_lint if f.blocks_sign_off)
    hitl_fatal = any(f.severity is LintSeverity.FATAL for f in state.last_lint)

    return RunMetrics(
        design_id=state.design_id,
        temperature=state.config.temperature,
        lint_errors_mas=first_lint[0],
        lint_fatal_mas=first_lint[1],
        lint_errors_hitl=hitl_count,
        lint_fatal_hitl=hitl_fatal,
        accuracy_mas=first_review,
        accuracy_hitl=last_review,
        properties_mas=first_formal[0],
        properties_hitl=len(state.properties),
        coverage_mas_pct=first_coverage,
        coverage_hitl_pct=state.coverage.consolidated_pct,
        cex_mas=first_formal[1],
        cex_hitl=len(state.counterexamples),
        hitl_rtl_minutes=state.human_minutes_rtl,
        hitl_formal_minutes=state.human_minutes_formal,
        rtl_iterations=rtl_iterations,
    )


def metrics_for_log_file(path: Path | str) -> RunMetrics:
    return compute_run_metrics(tuple(read_log(Path(path))))


def aggregate_table(rows: Sequence[RunMetrics]) -> BenchmarkTable:
    """Arithmetic means over every numeric column; no weighting."""
    if not rows:
        raise EmptyTable("no rows to aggregate")
    aggregates = {
        col: sum(float(getattr(r, col)) for r in rows) / len(rows)
        for col in NUMERIC_COLUMNS
    }
    return BenchmarkTable(rows=tuple(rows), aggregates=aggregates)


def load_zero_shot(path: Path | str) -> dict[str, float]:
    """Read externally measured zero-shot coverage rows ({design: pct})."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    rows = data["rows"] if isinstance(data, Mapping) and "rows" in data else data
    out: dict[str, float] = {}
    for design_id, pct in dict(rows).items():
        pct = float(pct)
        if not 0.0 <= pct <= 100.0:
            raise ValueError(f"zero-shot pct out of range for {design_id}: {pct}")
        out[str(design_id)] = pct
    return out


def compare_zero_shot(
    mas_rows: Sequence[RunMetrics],
    zero_shot_rows: Mapping[str, float],
) -> ZeroShotComparison:
    """Per-design initial-coverage deltas against a zero-shot baseline."""
    mas = {r.design_id: r.coverage_mas_pct for r in mas_rows}
    if set(mas) != set(zero_shot_rows):
        raise DesignSetMismatch(mas, zero_shot_rows)
    deltas = {d: mas[d] - zero_shot_rows[d] for d in sorted(mas)}
    mean_mas = sum(mas.values()) / len(mas)
    mean_zero = sum(zero_shot_rows.values()) / len(zero_shot_rows)
    return ZeroShotComparison(
        deltas=deltas,
        mean_mas_pct=mean_mas,
        mean_zero_shot_pct=mean_zero,
        mean_delta_pct=mean_mas - mean_zero,
    )


# -- rendering -------------------------------------------------------------

_ACCURACY_GLYPH = {
    AccuracyClass.CORRECT: "ok",
    AccuracyClass.NON_SYNTHESIZABLE: "nosynth",
    AccuracyClass.INCORRECT: "wrong",
    AccuracyClass.INCOMPLETE: "stub",
}


def _lint_cell(count: int, fatal: bool) -> str:
    if count == 0:
        return "0"
    return f"{count}{'F' if fatal else 'E'}"


def render_table_text(table: BenchmarkTable) -> str:
    """Aligned plain-text table, one row per run plus a mean row."""
    header = [
        "design",
        "temp",
        "lint m/h",
        "accuracy m/h",
        "props m/h",
        "cov% m/h",
        "cex m/h",
        "min r/f",
        "iters",
    ]
    body: list[list[str]] = []
    for r in table.rows:
        body.append(
            [
                r.design_id,
                f"{r.temperature:.1f}",
                f"{_lint_cell(r.lint_errors_mas, r.lint_fatal_mas)}/"
                f"{_lint_cell(r.lint_errors_hitl, r.lint_fatal_hitl)}",
                f"{_ACCURACY_GLYPH[r.accuracy_mas]}/{_ACCURACY_GLYPH[r.accuracy_hitl]}",
                f"{r.properties_mas}/{r.properties_hitl}",
                f"{r.coverage_mas_pct:.2f}/{r.coverage_hitl_pct:.2f}",
                f"{r.cex_mas}/{r.cex_hitl}",
                f"{r.hitl_rtl_minutes}/{r.hitl_formal_minutes}",
                str(r.rtl_iterations),
            ]
        )
    agg = table.aggregates
    body.append(
        [
            "mean",
            "",
            f"{agg['lint_errors_mas']:.2f}/{agg['lint_errors_hitl']:.2f}",
            "",
            f"{agg['properties_mas']:.2f}/{agg['properties_hitl']:.2f}",
            f"{agg['coverage_mas_pct']:.3f}/{agg['coverage_hitl_pct']:.3f}",
            f"{agg['cex_mas']:.2f}/{agg['cex_hitl']:.2f}",
            f"{agg['hitl_rtl_minutes']:.1f}/{agg['hitl_formal_minutes']:.1f}",
            f"{agg['rtl_iterations']:.1f}",
        ]
    )
    widths = [
        max(len(header[i]), max(len(row[i]) for row in body)) for i in range(len(header))
    ]

    def fmt(cells: list[str]) -> str:
        return "  ".join(c.ljust(widths[i]) for i, c in enumerate(cells)).rstrip()

    rule = "  ".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule] + [fmt(row) for row in body])


def render_table_json(table: BenchmarkTable) -> str:
    """Machine-readable twin of the text table (canonical key order)."""
    return canonical_json(
        {
            "rows": [to_jsonable(r) for r in table.rows],
            "aggregates": dict(table.aggregates),
        }
    )
