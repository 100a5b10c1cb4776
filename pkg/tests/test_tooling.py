"""Report dialects, the fake toolchain, adapters, scenario files."""

from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tapeloop.domain import (
    CexRecord,
    CoverageSnapshot,
    LintCategory,
    LintFinding,
    LintSeverity,
    PropertyStatus,
    SvaProperty,
)
from tapeloop.tooling import (
    AdapterConfigError,
    CoverageResult,
    FakeToolchain,
    FormalResult,
    LintResult,
    PropertyVerdict,
    ReportParseError,
    ScheduleExhausted,
    SchemaViolation,
    SubprocessToolchain,
    ToolAdapter,
    ToolInvocationError,
    analyze_cex,
    categorize_lint,
    load_adapters,
    load_scenario,
    parse_coverage_report,
    parse_formal_report,
    parse_lint_report,
    render_coverage_report,
    render_formal_report,
    render_lint_report,
    resolve_bucket_schedule,
)


def test_categorize_lint_known_prefixes_and_unknown_codes():
    assert categorize_lint("SYN042") is LintCategory.SYNTAX
    assert categorize_lint("plh001") is LintCategory.PLACEHOLDER
    assert categorize_lint("WIDTH-X") is LintCategory.WIDTH_MISMATCH
    # anything unrecognized lands in OTHER instead of crashing
    assert categorize_lint("ZZZ999") is LintCategory.OTHER
    assert categorize_lint("") is LintCategory.OTHER
    assert categorize_lint("x") is LintCategory.OTHER


@given(st.text(max_size=10))
def test_categorize_lint_total(code):
    assert categorize_lint(code) in LintCategory


# -- dialect round-trips --------------------------------------------------------

def lint_result():
    return LintResult(
        tool_id="lint-x",
        walltime_ms=12,
        findings=(
            LintFinding(LintSeverity.FATAL, "SYN001", "missing semicolon", "alu", 14,
                        category=LintCategory.SYNTAX),
            LintFinding(LintSeverity.WARNING, "STY090", "prefer always_ff", "alu", 3,
                        category=LintCategory.STYLE),
        ),
    )


def test_lint_report_round_trip():
    text = render_lint_report(lint_result())
    back = parse_lint_report(text)
    assert back == lint_result()
    assert back.blocking_count == 1
    assert back.count(LintSeverity.WARNING) == 1
    assert back.count() == 2


def test_lint_parse_errors():
    with pytest.raises(ReportParseError):
        parse_lint_report("LINT-REPORT x\nWALLTIME 1\nFATAL SYN1 nolinefield msg\nEND-REPORT\n")
    with pytest.raises(ReportParseError):
        parse_lint_report("LINT-REPORT x\nWALLTIME 1\nSEVERE SYN1 m:1 msg\nEND-REPORT\n")
    with pytest.raises(ReportParseError):
        parse_lint_report("LINT-REPORT x\nWALLTIME 1\nFATAL SYN1 m:one msg\nEND-REPORT\n")


def formal_result():
    return FormalResult(
        tool_id="mc-1",
        walltime_ms=900,
        verdicts=(
            PropertyVerdict("p1", PropertyStatus.PROVEN),
            PropertyVerdict(
                "p2",
                PropertyStatus.CEX,
                cex=CexRecord("p2", "wr burst then overflow at t=9", 9, ("full", "count")),
            ),
            PropertyVerdict("p3", PropertyStatus.TOOL_ERROR, detail="solver timeout"),
        ),
    )


def test_formal_report_round_trip():
    text = render_formal_report(formal_result())
    back = parse_formal_report(text)
    assert back == formal_result()
    assert [c.property_id for c in back.counterexamples()] == ["p2"]


def test_formal_cex_trace_survives_spaces_and_escapes():
    tricky = FormalResult(
        "mc", 1,
        (PropertyVerdict("p", PropertyStatus.CEX,
                         cex=CexRecord("p", 'trace with spaces and "quotes"', 2, ())),),
    )
    assert parse_formal_report(render_formal_report(tricky)) == tricky


def test_formal_parse_errors():
    with pytest.raises(ReportParseError):
        parse_formal_report("FORMAL-REPORT x\nWALLTIME 1\nPROP p1 MAYBE\nEND-REPORT\n")
    with pytest.raises(ReportParseError):
        parse_formal_report("FORMAL-REPORT x\nWALLTIME 1\nPROP p1 CEX depth=2\nEND-REPORT\n")
    with pytest.raises(ValueError):
        PropertyVerdict("p", PropertyStatus.PROVEN, cex=CexRecord("p", "t", 1, ()))
    with pytest.raises(ValueError):
        PropertyVerdict("p", PropertyStatus.UNCHECKED)


def coverage_result():
    return CoverageResult(
        tool_id="cov-9",
        walltime_ms=40,
        snapshot=CoverageSnapshot(98.15, 97.29, 97.84, uncovered=("fifo.sv:55", "fifo.sv:61")),
    )


def test_coverage_report_round_trip():
    text = render_coverage_report(coverage_result())
    assert parse_coverage_report(text) == coverage_result()


def test_coverage_fractions_survive_the_text_layer():
    # repr-format floats, so 73.08 comes back as 73.08, not 73.079999..
    snap = CoverageSnapshot(81.25, 73.08, 76.92)
    text = render_coverage_report(CoverageResult("c", 0, snap))
    assert parse_coverage_report(text).snapshot.consolidated_pct == 73.08


def test_coverage_parse_errors():
    base = "COVERAGE-REPORT c\nWALLTIME 0\nCODE 50.0\nASSERTION 50.0\n"
    with pytest.raises(ReportParseError):
        parse_coverage_report(base + "END-REPORT\n")  # FUNCTIONAL missing
    with pytest.raises(ReportParseError):
        parse_coverage_report(base + "FUNCTIONAL 101.0\nEND-REPORT\n")
    with pytest.raises(ReportParseError):
        parse_coverage_report(base + "FUNCTIONAL 50.0\nCODE 60.0\nEND-REPORT\n")
    with pytest.raises(ReportParseError):
        parse_coverage_report(base + "FUNCTIONAL 50.0\nUNCOVERED\nEND-REPORT\n")
    with pytest.raises(ValueError):
        # waivers belong to run state, never to raw tool output
        CoverageResult("c", 0, CoverageSnapshot(1, 1, 1, ("a",), ("a",)))


def test_report_framing_errors():
    with pytest.raises(ReportParseError):
        parse_lint_report("")
    with pytest.raises(ReportParseError):
        parse_lint_report("WRONG-HEADER x\nWALLTIME 0\nEND-REPORT\n")
    with pytest.raises(ReportParseError):
        parse_lint_report("LINT-REPORT x\nWALLTIME minus\nEND-REPORT\n")
    with pytest.raises(ReportParseError):
        parse_lint_report("LINT-REPORT x\nWALLTIME 0\n")  # no END-REPORT


def test_analyze_cex_mentions_signals():
    analysis = analyze_cex(CexRecord("p2", "overflow", 9, ("full", "count")))
    assert analysis.property_id == "p2"
    assert analysis.depth == 9
    assert "full" in analysis.hint


# -- fake toolchain ---------------------------------------------------------------

PROPS = tuple(SvaProperty(f"p{i}", "e1", f"assert property (x{i});") for i in range(4))


def test_fake_toolchain_renders_parseable_reports():
    fake = FakeToolchain(
        {
            "lint": [{"findings": [{"severity": "error", "rule_code": "WID01",
                                    "message": "truncated", "module": "m", "line": 2}]}],
            "formal": [{"cexs": [{"at": 1, "trace": "t", "depth": 3, "signals": ["a"]}]}],
            "coverage": [{"code_pct": 90.0, "assertion_pct": 80.0, "functional_pct": 85.0,
                          "uncovered": ["m.sv:9"]}],
        }
    )
    lint = parse_lint_report(fake.run_lint({"m": "module m; endmodule"}))
    assert lint.findings[0].category is LintCategory.WIDTH_MISMATCH
    formal = parse_formal_report(fake.run_formal(PROPS, {}))
    assert [v.status.value for v in formal.verdicts] == ["proven", "cex", "proven", "proven"]
    assert formal.verdicts[1].cex.failing_signals == ("a",)
    cov = parse_coverage_report(fake.run_coverage(PROPS, {}))
    assert cov.snapshot.uncovered == ("m.sv:9",)
    assert fake.calls("lint") == fake.calls("formal") == fake.calls("coverage") == 1


def test_fake_toolchain_schedule_exhaustion_and_crash():
    fake = FakeToolchain({"lint": [{"findings": []}, {"crash": "license server down"}]})
    fake.run_lint({})
    with pytest.raises(ToolInvocationError) as exc:
        fake.run_lint({})
    assert "license" in str(exc.value)
    with pytest.raises(ScheduleExhausted):
        fake.run_lint({})
    # exhaustion is a subtype so blanket tool-error handling would mask it;
    # callers must catch it first
    assert issubclass(ScheduleExhausted, ToolInvocationError)


def test_resolve_bucket_schedule_variant_replaces_entry():
    schedule = {
        "lint": [
            {"per_bucket": {"high": {"findings": [{"severity": "fatal", "rule_code": "SYN1",
                                                   "message": "m", "module": "m", "line": 1}]}}},
            {"findings": []},
        ]
    }
    high = resolve_bucket_schedule(schedule, "high")
    low = resolve_bucket_schedule(schedule, "low")
    assert len(high["lint"]) == 2 and len(low["lint"]) == 1
    # the variant body is used verbatim, not merged with outer keys
    assert high["lint"][0] == {"findings": [{"severity": "fatal", "rule_code": "SYN1",
                                             "message": "m", "module": "m", "line": 1}]}


# -- adapters & subprocess toolchain ----------------------------------------------

def test_adapter_command_must_mention_report():
    with pytest.raises(ValueError):
        ToolAdapter("t", "lint", ("true",))
    with pytest.raises(ValueError):
        ToolAdapter("t", "simulate", ("x", "{report}"))
    ToolAdapter("t", "lint", ("sh", "-c", "cp {input} {report}"))


def test_load_adapters_collects_violations(tmp_path):
    cfg = tmp_path / "adapters.json"
    cfg.write_text(json.dumps({"adapters": [
        {"tool_id": "a", "kind": "lint", "command": ["x", "{report}"]},
        {"tool_id": "b", "kind": "lint", "command": ["y", "{report}"]},
        {"tool_id": "c", "kind": "coverage", "command": ["z"]},
        "garbage",
    ]}), encoding="utf-8")
    with pytest.raises(AdapterConfigError) as exc:
        load_adapters(cfg)
    kinds = {v.kind for v in exc.value.violations}
    assert {"duplicate-kind", "malformed-entry"} <= kinds
    cfg.write_text("{}", encoding="utf-8")
    with pytest.raises(AdapterConfigError):
        load_adapters(cfg)


def test_subprocess_toolchain_runs_a_real_command(tmp_path):
    # stand-in lint "tool": ignores its input, emits a fixed report
    report = "LINT-REPORT shim\\nWALLTIME 1\\nEND-REPORT\\n"
    adapter = ToolAdapter(
        "shim", "lint", ("sh", "-c", f'printf "{report}" > {{report}}')
    )
    chain = SubprocessToolchain({"lint": adapter}, tmp_path)
    parsed = parse_lint_report(chain.run_lint({"m": "module m; endmodule"}))
    assert parsed.tool_id == "shim" and parsed.findings == ()
    # the sources were materialized for the tool to read
    assert (tmp_path / "lint" / "m.sv").read_text(encoding="utf-8").startswith("module m")


def test_subprocess_toolchain_failure_paths(tmp_path):
    failing = ToolAdapter("bad", "lint", ("sh", "-c", "echo doom >&2; exit 3 # {report}"))
    chain = SubprocessToolchain({"lint": failing}, tmp_path)
    with pytest.raises(ToolInvocationError) as exc:
        chain.run_lint({})
    assert "doom" in str(exc.value)
    silent = ToolAdapter("quiet", "lint", ("sh", "-c", "true # {report}"))
    chain = SubprocessToolchain({"lint": silent}, tmp_path)
    with pytest.raises(ToolInvocationError):
        chain.run_lint({})
    with pytest.raises(ToolInvocationError):
        SubprocessToolchain({}, tmp_path).run_lint({})


# -- scenario files ---------------------------------------------------------------

def minimal_scenario_doc():
    return {
        "design_id": "d",
        "spec_file": "d.spec",
        "responses": [{"role_id": "r", "design_id": "d", "phase": "planning",
                       "task_id": "t", "iteration": 1, "text": "x"}],
        "toolchain": {"lint": [], "formal": [], "coverage": []},
        "resolutions": [],
        "expected": {"status": "signed-off"},
    }


def write_scenario(tmp_path, doc):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc), encoding="utf-8")
    return p


def test_load_scenario_happy_path(tmp_path):
    doc = minimal_scenario_doc()
    p = write_scenario(tmp_path, doc)
    s = load_scenario(p)
    assert s.design_id == "d"
    assert s.spec_path() == (tmp_path / "d.spec").resolve()
    assert s.make_toolchain("low").calls("lint") == 0


def test_load_scenario_rejects_bad_shapes(tmp_path):
    doc = minimal_scenario_doc()
    doc["responses"] = [{"role_id": "r"}]  # missing most keys
    doc["toolchain"]["coverage"] = [{"code_pct": 150.0}]
    doc["resolutions"] = [
        {"trigger": "bad-trigger", "resolution": {"kind": "abort", "effort_minutes": 0}},
        {"trigger": "tool-failure", "resolution": {"kind": "not-a-kind", "effort_minutes": 0}},
        {"trigger": "tool-failure", "resolution": {"kind": "abort", "effort_minutes": -2}},
    ]
    with pytest.raises(SchemaViolation) as exc:
        load_scenario(write_scenario(tmp_path, doc))
    text = str(exc.value)
    assert "bad-trigger" in text and "not-a-kind" in text
    assert len(exc.value.violations) >= 5


def test_load_scenario_rejects_unknown_bucket(tmp_path):
    doc = minimal_scenario_doc()
    doc["responses"][0]["bucket"] = "warm"
    with pytest.raises(SchemaViolation):
        load_scenario(write_scenario(tmp_path, doc))


def test_shipped_scenarios_expected_rows_present(scenarios):
    for s in scenarios.values():
        assert s.expected["status"] == "signed-off"
        assert set(s.expected["metrics"]) == {"low", "mid", "high"}
