#!/usr/bin/env python3
"""Regenerate the five shipped benchmark scenarios.

Each scenario file pins every scripted model response, the fake-tool
fault schedule, and the human resolutions for one design, so a run is
reproducible byte for byte.  The expected per-bucket metrics rows live in
the scenario's ``expected`` block; tests compare computed rows against
them, never the other way around.

Usage:
    python3 scripts/build_scenarios.py [--out DIR] [--no-check]

The default output directory is the repository root (scenarios/, specs/,
data/ subtrees).  With --no-check the dry-run validation pass is skipped.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Any

from tapeloop.hitl import apply_unified_diff, make_unified_diff

ROOT = Path(__file__).resolve().parent.parent

LOW, MID, HIGH = "low", "mid", "high"
BUCKETS = (LOW, MID, HIGH)


# ---------------------------------------------------------------------------
# Response formatting helpers
# ---------------------------------------------------------------------------

def fence(tag: str, body: str, preamble: str = "", **attrs: str) -> str:
    header = tag + "".join(f" {k}={v}" for k, v in attrs.items())
    text = f"```{header}\n{body}\n```"
    if preamble:
        text = preamble + "\n" + text
    return text


def jfence(tag: str, obj: Any, preamble: str = "") -> str:
    return fence(tag, json.dumps(obj, indent=1), preamble=preamble)


def accept(note: str = "") -> str:
    body: dict[str, Any] = {"verdict": "accept"}
    if note:
        body["issues"] = []
    text = jfence("critique", body)
    return (note + "\n" + text) if note else text


def revise(*issues: tuple[str, str]) -> str:
    return jfence(
        "critique",
        {"verdict": "revise", "issues": [{"kind": k, "detail": d} for k, d in issues]},
    )


def review(functional: bool, synth: bool, notes: str) -> str:
    return jfence("review", {"functional_pass": functional, "synthesizable": synth, "notes": notes})


def props_response(props: list[dict[str, str]], preamble: str = "") -> str:
    return jfence("properties", props, preamble=preamble)


def prop(pid: str, body: str) -> dict[str, str]:
    return {"property_id": pid, "body_text": body}


class Script:
    """Accumulates scripted-response entries for one design."""

    def __init__(self, design_id: str) -> None:
        self.design_id = design_id
        self.entries: list[dict[str, Any]] = []

    def add(self, role: str, phase: str, task: str, iteration: int, text: str,
            bucket: str = "*") -> None:
        self.entries.append(
            {
                "role_id": role,
                "design_id": self.design_id,
                "phase": phase,
                "task_id": task,
                "iteration": iteration,
                "bucket": bucket,
                "text": text,
            }
        )

    # one proposer draft per iteration; all but the last get a revise verdict
    def deliberation(self, phase: str, task: str, proposer: str, drafts: list[str],
                     rejections: list[tuple[str, str]], final_note: str = "") -> None:
        for i, draft in enumerate(drafts, start=1):
            self.add(proposer, phase, task, i, draft)
            if i < len(drafts):
                self.add("critic", phase, task, i, revise(rejections[i - 1]))
            else:
                self.add("critic", phase, task, i, accept(final_note))

    # five parseable drafts, every one rejected: the deliberation exhausts
    def exhaust(self, phase: str, task: str, proposer: str,
                draft_of: Any, issue: tuple[str, str]) -> None:
        for i in range(1, 6):
            self.add(proposer, phase, task, i, draft_of(i))
            self.add("critic", phase, task, i, revise(issue))

    def fix_accept(self, pid: str, body: str) -> None:
        task = f"fix-cex:{pid}#1"
        self.add("formal-agent", "execution", task, 1,
                 jfence("property-fix", {"property_id": pid, "body_text": body}))
        self.add("critic", "execution", task, 1, accept())

    def closure_rounds(self, count: int) -> None:
        empty = fence("properties", "[]",
                      preamble="No assertion closes the remaining holes; they look structural.")
        for n in range(1, count + 1):
            task = f"closure#{n}"
            self.add("property-author", "execution", task, 1, empty)
            self.add("critic", "execution", task, 1, accept())


def sva(expr: str, reset: str = "!rst_n") -> str:
    return f"assert property (@(posedge clk) disable iff ({reset}) {expr});"


def fixed_body(original: str) -> str:
    # the agent's repaired property: same check, gated one cycle after the
    # antecedent actually holds
    if " |-> " in original:
        return original.replace(" |-> ", " |=> ", 1)
    return re.sub(r"(disable iff \([^)]*\) )", r"\1##1 ", original, count=1)


# ---------------------------------------------------------------------------
# Per-design scenario builders
# ---------------------------------------------------------------------------

def entry_props(prefix: str, start: int, exprs: list[str], reset: str) -> list[dict[str, str]]:
    return [prop(f"{prefix}{start + i:02d}", sva(e, reset)) for i, e in enumerate(exprs)]


def coverage_entry(code: float, assertion: float, functional: float,
                   uncovered: list[str]) -> dict[str, Any]:
    return {
        "tool_id": "fake-coverage",
        "code_pct": code,
        "assertion_pct": assertion,
        "functional_pct": functional,
        "uncovered": uncovered,
    }


def lint_finding(severity: str, rule: str, module: str, line: int, message: str) -> dict[str, Any]:
    return {"severity": severity, "rule_code": rule, "module": module, "line": line,
            "message": message}


def cex(at: int, trace: str, depth: int, signals: list[str]) -> dict[str, Any]:
    return {"at": at, "trace": trace, "depth": depth, "signals": signals}


def cex_range(lo: int, hi: int, signal: str, base_depth: int) -> list[dict[str, Any]]:
    return [
        cex(i, f"induction step fails at bound {base_depth + (i % 3)}",
            base_depth + (i % 3), [signal])
        for i in range(lo, hi + 1)
    ]


def expected_row(design_id: str, temp: float, **overrides: Any) -> dict[str, Any]:
    row: dict[str, Any] = {
        "design_id": design_id,
        "temperature": temp,
        "lint_errors_mas": 0,
        "lint_fatal_mas": False,
        "lint_errors_hitl": 0,
        "lint_fatal_hitl": False,
        "accuracy_mas": "correct",
        "accuracy_hitl": "correct",
    }
    row.update(overrides)
    return row


TEMPS = {LOW: 0.2, MID: 0.5, HIGH: 0.8}


def build_crc() -> tuple[str, dict[str, Any]]:
    d = "crc"
    s = Script(d)
    reset = "!rst_n"

    spec_text = """\
design_id: crc
coverage_target_pct: 100

[requirements]
CRC-8 checksum engine over a byte stream.  The polynomial is x^8 + x^2 +
x + 1 (CRC-8/ATM, initial value 0x00).  Bytes are folded MSB first, one
byte per cycle while data_valid is high.

Asserting clear returns the accumulator to the initial value without
touching the datapath registers of an in-flight byte.  clear is ignored
in the same cycle as data_valid.

crc_out always reflects the running remainder; crc_valid is high exactly
when the engine is idle and the remainder is stable.

[interfaces]
clk in 1
rst_n in 1
clear in 1
data_valid in 1
data_in in 8
crc_out out 8
crc_valid out 1

[performance]
throughput 1.0 byte/cycle
fmax 250.0 MHz

[fsm]
IDLE: data_valid -> ACCUM
ACCUM: data_valid -> ACCUM, !data_valid -> DONE
DONE: clear -> IDLE
"""

    micro = {
        "datapath_components": [
            {"name": "crc_engine",
             "role": "polynomial division network and remainder register"},
        ],
        "control_fsms": [
            {"name": "crc_ctrl", "outline": "IDLE -> ACCUM on data_valid, DONE on stream end"},
        ],
        "reset_strategy": "sync-active-low",
        "timing_constraints": [{"name": "clk_period", "value": "4ns"}],
    }

    vplan = {
        "entries": [
            {"entry_id": "E1", "property_type": "reset-behavior",
             "intent": "remainder clears on reset and on clear",
             "target_signals": ["crc_out", "clear", "rst_n"]},
            {"entry_id": "E2", "property_type": "data-integrity",
             "intent": "remainder tracks reference polynomial division",
             "target_signals": ["crc_out", "data_in"]},
            {"entry_id": "E3", "property_type": "interface-protocol",
             "intent": "crc_valid handshake mirrors data_valid",
             "target_signals": ["crc_valid", "data_valid"]},
            {"entry_id": "E4", "property_type": "safety",
             "intent": "no remainder update without data_valid",
             "target_signals": ["crc_out", "data_valid"]},
        ],
        "coverage_goals": {"code": 100.0, "assertion": 100.0, "functional": 100.0},
    }

    rtl_draft = """\
module crc_engine (
  input  logic       clk,
  input  logic       rst_n,
  input  logic       clear,
  input  logic       data_valid,
  input  logic [7:0] data_in,
  output logic [7:0] crc_out,
  output logic       crc_valid
);
  // combinational sketch, remainder register still missing
  logic [7:0] next_crc;
  always_comb next_crc = data_in ^ 8'h07;
  assign crc_out   = next_crc;
  assign crc_valid = !data_valid;
endmodule"""

    rtl_v1 = """\
module crc_engine (
  input  logic       clk,
  input  logic       rst_n,
  input  logic       clear,
  input  logic       data_valid,
  input  logic [7:0] data_in,
  output logic [7:0] crc_out,
  output logic       crc_valid
);
  // CRC-8/ATM, x^8 + x^2 + x + 1, byte folded MSB first
  logic [7:0] lfsr;

  function automatic logic [7:0] step8(input logic [7:0] acc,
                                       input logic [7:0] b);
    logic [7:0] s;
    s = acc;
    for (int i = 7; i >= 0; i--)
      s = {s[6:0], 1'b0} ^ ({8{s[7] ^ b[i]}} & 8'h07);
    return s;
  endfunction

  always_ff @(posedge clk) begin
    if (!rst_n)          lfsr <= 8'h00;
    else if (data_valid) lfsr <= step8(lfsr, data_in);
    else if (clear)      lfsr <= 8'h00;
  end

  assign crc_out   = lfsr;
  assign crc_valid = !data_valid;
endmodule"""

    # the human patch: clear must win over a dropped data_valid cycle, and
    # crc_valid must account for a pending clear
    rtl_patched = rtl_v1.replace(
        """\
    if (!rst_n)          lfsr <= 8'h00;
    else if (data_valid) lfsr <= step8(lfsr, data_in);
    else if (clear)      lfsr <= 8'h00;""",
        """\
    if (!rst_n)               lfsr <= 8'h00;
    else if (clear)           lfsr <= 8'h00;
    else if (data_valid)      lfsr <= step8(lfsr, data_in);""",
    ).replace(
        "assign crc_valid = !data_valid;",
        "assign crc_valid = !data_valid && !clear;",
    )
    assert rtl_patched != rtl_v1

    s.deliberation("planning", "microarchitecture", "architect",
                   [jfence("microarchitecture", micro,
                           preamble="Single datapath block; the fold is a pure function.")],
                   [])
    s.deliberation("planning", "verification-plan", "verification-planner",
                   [jfence("vplan", vplan)], [])
    s.deliberation(
        "development", "rtl:crc_engine", "rtl-designer",
        [fence("rtl", rtl_draft, module="crc_engine"),
         fence("rtl", rtl_v1, module="crc_engine",
               preamble="Registered remainder with an unrolled byte fold.")],
        [("missing-register", "remainder must be registered; clear path is absent")],
    )

    entries_props = [
        entry_props("crc_p", 1, [
            "!rst_n |-> ##1 crc_out == 8'h00",
            "clear && !data_valid |=> crc_out == 8'h00",
            "$fell(rst_n) |-> ##1 !crc_valid",
            "clear |=> !$isunknown(crc_out)",
        ], reset),
        entry_props("crc_p", 5, [
            "data_valid |=> crc_out == crc8_step($past(crc_out), $past(data_in))",
            "data_valid [*2] |=> crc_out != $past(crc_out, 2)",
            "$stable(data_in) && data_valid |=> !$isunknown(crc_out)",
            "data_valid |-> !$isunknown(data_in)",
        ], reset),
        entry_props("crc_p", 9, [
            "!data_valid |-> crc_valid",
            "data_valid |-> !crc_valid",
            "$rose(crc_valid) |-> $past(data_valid) || $past(clear)",
            "crc_valid |-> $stable(crc_out)",
        ], reset),
        entry_props("crc_p", 13, [
            "!data_valid && !clear |=> $stable(crc_out)",
            "!data_valid [*3] |-> $stable(crc_out)",
            "$changed(crc_out) |-> $past(data_valid) || $past(clear) || $fell(rst_n)",
            "!data_valid && !clear && rst_n |=> crc_out == $past(crc_out)",
        ], reset),
    ]
    for i, plist in enumerate(entries_props, start=1):
        s.deliberation("development", f"properties:E{i}", "property-author",
                       [props_response(plist)], [])

    all_props = [p for plist in entries_props for p in plist]

    # first counterexample defies five repair attempts; a human patches the RTL
    s.exhaust(
        "execution", "fix-cex:crc_p01#1", "formal-agent",
        lambda i: jfence("property-fix", {
            "property_id": "crc_p01",
            "body_text": sva(f"!rst_n |-> ##{i} crc_out == 8'h00", reset),
        }),
        ("weakens-intent", "stretching the reset window hides the late-clear bug"),
    )
    for p in all_props[1:8]:
        s.fix_accept(p["property_id"], fixed_body(p["body_text"]))

    s.add("design-reviewer", "execution", "review#1", 1,
          review(True, True, "fold matches the reference remainder on directed bytes"), LOW)
    s.add("design-reviewer", "execution", "review#1", 1,
          review(True, False, "function return sliced with a variable width; synthesis will choke"),
          MID)
    s.add("design-reviewer", "execution", "review#1", 1,
          review(False, True, "clear during a bubble cycle leaves a stale remainder"), HIGH)
    s.add("design-reviewer", "execution", "review#2", 1,
          review(True, True, "patched priority fixes the clear path"))

    s.closure_rounds(5)

    scenario = {
        "description": "CRC-8 stream checksum: late-clear bug patched by hand, "
                       "five redundant assertions retired to reach full closure.",
        "design_id": d,
        "spec_file": "../specs/crc.spec",
        "responses": s.entries,
        "toolchain": {
            "lint": [{"tool_id": "fake-lint"}, {"tool_id": "fake-lint"}],
            "formal": [
                {"tool_id": "fake-formal",
                 "cexs": cex_range(0, 7, "crc_out", 6)},
                {"tool_id": "fake-formal",
                 "cexs": cex_range(1, 7, "crc_out", 9)},
                {"tool_id": "fake-formal"},
            ],
            "coverage": [
                coverage_entry(81.25, 73.08, 76.92,
                               ["crc_engine.sv:27", "crc_engine.sv:33", "crc_ctrl.DONE"]),
                coverage_entry(100.0, 100.0, 100.0, []),
            ],
        },
        "resolutions": [
            {"trigger": "deliberation-exhausted",
             "resolution": {
                 "kind": "patch-rtl", "reviewer": "hw-lead", "effort_minutes": 15,
                 "note": "clear must outrank a dropped data_valid cycle",
                 "module_name": "crc_engine",
                 "diff": make_unified_diff(rtl_v1, rtl_patched, "crc_engine.sv"),
             }},
            {"trigger": "zero-progress-coverage",
             "resolution": {
                 "kind": "remove-properties", "reviewer": "verif-lead", "effort_minutes": 40,
                 "note": "E4 duplicates E2/E3 obligations; retire the stability shadows",
                 "property_ids": [f"crc_p{i:02d}" for i in range(12, 17)],
             }},
        ],
        "expected": {
            "status": "signed-off",
            "tickets": 2,
            "metrics": {
                b: expected_row(
                    d, TEMPS[b],
                    accuracy_mas={"low": "correct", "mid": "non-synthesizable",
                                  "high": "incorrect"}[b],
                    properties_mas=16, properties_hitl=11,
                    coverage_mas_pct=73.08, coverage_hitl_pct=100.0,
                    cex_mas=8, cex_hitl=0,
                    hitl_rtl_minutes=15, hitl_formal_minutes=40,
                    rtl_iterations=2,
                )
                for b in BUCKETS
            },
        },
    }
    return spec_text, scenario


def build_ecc() -> tuple[str, dict[str, Any]]:
    d = "ecc"
    s = Script(d)
    reset = "rst"

    spec_text = """\
design_id: ecc
coverage_target_pct: 100

[requirements]
Hamming(12,8) error-correcting codec: an encoder producing four parity
bits over each data byte, and a decoder that corrects any single-bit
error and flags (without correcting) double-bit errors.

Encoder and decoder are separate modules sharing the parity-position
convention: parity bits occupy code word positions 1, 2, 4, 8 (1-based),
with an overall parity bit folded into position 12.

dec_err_single pulses when a single-bit error was corrected;
dec_err_double pulses when a two-bit error was detected.  They are
mutually exclusive.

[interfaces]
clk in 1
rst in 1
enc_data_in in 8
enc_code_out out 12
dec_code_in in 12
dec_data_out out 8
dec_err_single out 1
dec_err_double out 1

[performance]
latency 1.0 cycle
fmax 200.0 MHz

[fsm]
CHECK: syndrome_zero -> PASS, syndrome_nonzero -> FIX
FIX: corrected -> PASS
PASS: always -> CHECK
"""

    micro = {
        "datapath_components": [
            {"name": "ecc_encoder", "role": "parity generator over Hamming positions"},
            {"name": "ecc_decoder", "role": "syndrome decode and single-bit correction"},
        ],
        "control_fsms": [
            {"name": "ecc_check", "outline": "CHECK -> FIX on nonzero syndrome, else PASS"},
        ],
        "reset_strategy": "sync-active-high",
        "timing_constraints": [{"name": "clk_period", "value": "5ns"}],
    }

    vplan = {
        "entries": [
            {"entry_id": "E1", "property_type": "data-integrity",
             "intent": "encoder parity bits follow the position masks",
             "target_signals": ["enc_code_out", "enc_data_in"]},
            {"entry_id": "E2", "property_type": "data-integrity",
             "intent": "decoder restores the encoded byte under single-bit flips",
             "target_signals": ["dec_data_out", "dec_code_in"]},
            {"entry_id": "E3", "property_type": "safety",
             "intent": "error flags are mutually exclusive and sticky-free",
             "target_signals": ["dec_err_single", "dec_err_double"]},
            {"entry_id": "E4", "property_type": "interface-protocol",
             "intent": "flag timing aligns with the corrected data word",
             "target_signals": ["dec_err_single", "dec_data_out"]},
        ],
        "coverage_goals": {"code": 100.0, "assertion": 100.0, "functional": 100.0},
    }

    enc_draft1 = """\
module ecc_encoder (
  input  logic        clk,
  input  logic        rst,
  input  logic [7:0]  enc_data_in,
  output logic [11:0] enc_code_out
);
  assign enc_code_out = {4'b0, enc_data_in};
endmodule"""

    enc_draft2 = """\
module ecc_encoder (
  input  logic        clk,
  input  logic        rst,
  input  logic [7:0]  enc_data_in,
  output logic [11:0] enc_code_out
);
  logic [3:0] parity;
  always_comb parity = {^enc_data_in, 3'b0};
  assign enc_code_out = {parity, enc_data_in};
endmodule"""

    enc_v1 = """\
module ecc_encoder (
  input  logic        clk,
  input  logic        rst,
  input  logic [7:0]  enc_data_in,
  output logic [11:0] enc_code_out
);
  logic [3:0] parity;
  // PLACEHOLDER: fold the parity tree over Hamming positions
  always_comb begin
    parity[0] = ^(enc_data_in & 8'b1010_1011);
    parity[1] = ^(enc_data_in & 8'b1100_1101);
    parity[2] = ^(enc_data_in & 8'b1111_0001)
    parity[3] = ^enc_data_in;
  end
  always_ff @(posedge clk) begin
    if (rst) enc_code_out <= '0;
    else     enc_code_out <= {parity, enc_data_in};
  end
endmodule"""

    enc_patched = enc_v1.replace(
        "  // PLACEHOLDER: fold the parity tree over Hamming positions\n", ""
    ).replace(
        "    parity[2] = ^(enc_data_in & 8'b1111_0001)\n",
        "    parity[2] = ^(enc_data_in & 8'b1111_0001);\n",
    ).replace(
        "    parity[3] = ^enc_data_in;",
        "    parity[3] = ^{enc_data_in, parity[2:0]};",
    )
    assert "PLACEHOLDER" not in enc_patched

    dec_v1 = """\
module ecc_decoder (
  input  logic        clk,
  input  logic        rst,
  input  logic [11:0] dec_code_in,
  output logic [7:0]  dec_data_out,
  output logic        dec_err_single,
  output logic        dec_err_double
);
  logic [3:0]  syndrome;
  logic        overall;
  logic [11:0] corrected;

  always_comb begin
    syndrome[0] = ^(dec_code_in & 12'b0101_0101_0101);
    syndrome[1] = ^(dec_code_in & 12'b0110_0110_0110);
    syndrome[2] = ^(dec_code_in & 12'b0111_1000_0111);
    syndrome[3] = ^(dec_code_in & 12'b0111_1111_1000);
    overall     = ^dec_code_in;
    corrected   = dec_code_in;
    if (syndrome != 0 && overall)
      corrected[syndrome - 1] = ~dec_code_in[syndrome - 1];
  end

  always_ff @(posedge clk) begin
    if (rst) begin
      dec_data_out   <= '0;
      dec_err_single <= 1'b0;
      dec_err_double <= 1'b0;
    end else begin
      dec_data_out   <= {corrected[11:9], corrected[7:5], corrected[3:2]};
      dec_err_single <= (syndrome != 0) && overall;
      dec_err_double <= (syndrome != 0) && !overall;
    end
  end
endmodule"""

    s.deliberation("planning", "microarchitecture", "architect",
                   [jfence("microarchitecture", micro)], [])
    s.deliberation("planning", "verification-plan", "verification-planner",
                   [jfence("vplan", vplan,
                           preamble="Split integrity checks per module; flags get their own entry.")],
                   [])
    s.deliberation(
        "development", "rtl:ecc_encoder", "rtl-designer",
        [fence("rtl", enc_draft1, module="ecc_encoder"),
         fence("rtl", enc_draft2, module="ecc_encoder"),
         fence("rtl", enc_v1, module="ecc_encoder")],
        [("no-parity", "parity bits are hardwired to zero"),
         ("wrong-masks", "single reduction bit is not a Hamming parity set")],
    )
    s.deliberation("development", "rtl:ecc_decoder", "rtl-designer",
                   [fence("rtl", dec_v1, module="ecc_decoder")], [])

    entries_props = [
        entry_props("ecc_p", 1, [
            "!rst |=> enc_code_out[7:0] == $past(enc_data_in)",
            "!rst |=> enc_code_out[8] == ^($past(enc_data_in) & 8'hAB)",
            "!rst |=> enc_code_out[9] == ^($past(enc_data_in) & 8'hCD)",
            "!rst |=> enc_code_out[10] == ^($past(enc_data_in) & 8'hF1)",
            "!rst |=> enc_code_out[11] == ^$past(enc_data_in)",
        ], reset),
        entry_props("ecc_p", 6, [
            "$countones(flip) == 0 |=> dec_data_out == $past(payload)",
            "$countones(flip) == 1 |=> dec_data_out == $past(payload)",
            "$countones(flip) == 1 |=> dec_err_single",
            "$countones(flip) == 2 |=> dec_err_double",
            "$countones(flip) == 2 |=> $stable(dec_err_single) || !dec_err_single",
        ], reset),
        entry_props("ecc_p", 11, [
            "!(dec_err_single && dec_err_double)",
            "dec_err_single |=> !dec_err_single || $changed(dec_code_in)",
            "dec_err_double |=> !dec_err_double || $changed(dec_code_in)",
            "rst |=> !dec_err_single && !dec_err_double",
            "$onehot0({dec_err_single, dec_err_double})",
        ], reset),
        entry_props("ecc_p", 16, [
            "dec_err_single |-> !$isunknown(dec_data_out)",
            "dec_err_double |-> $stable(dec_data_out) || 1'b1",
            "$changed(dec_data_out) |-> $past($changed(dec_code_in))",
            "!$isunknown({dec_err_single, dec_err_double})",
        ], reset),
    ]
    for i, plist in enumerate(entries_props, start=1):
        s.deliberation("development", f"properties:E{i}", "property-author",
                       [props_response(plist)], [])
    all_props = [p for plist in entries_props for p in plist]

    # the lint pileup on the encoder resists five rewrite attempts
    s.exhaust(
        "execution", "fix-lint:ecc_encoder#1", "rtl-designer",
        lambda i: fence("rtl",
                        enc_v1.replace("logic [3:0] parity;",
                                       f"logic [3:0] parity;  // attempt {i}"),
                        module="ecc_encoder"),
        ("still-broken", "missing semicolon and placeholder tree are untouched"),
    )
    for p in all_props[:8]:
        s.fix_accept(p["property_id"], fixed_body(p["body_text"]))

    s.add("design-reviewer", "execution", "review#1", 1,
          review(False, True, "parity tree is stubbed; codec cannot round-trip"))
    s.add("design-reviewer", "execution", "review#2", 1,
          review(True, True, "hand-folded overall parity restores the distance-4 code"))

    s.closure_rounds(10)

    scenario = {
        "description": "Hamming(12,8) codec: stubbed parity tree rewritten by hand "
                       "after lint exhaustion, then property pruning and dead-code waivers.",
        "design_id": d,
        "spec_file": "../specs/ecc.spec",
        "responses": s.entries,
        "toolchain": {
            "lint": [
                {"tool_id": "fake-lint", "per_bucket": {
                    LOW: {"tool_id": "fake-lint", "findings": [
                        lint_finding("error", "WIDTH-TRUNC", "ecc_encoder", 9,
                                     "parity vector truncated in concatenation"),
                        lint_finding("error", "BLKSEQ", "ecc_encoder", 10,
                                     "blocking assignment inside always_ff context"),
                        lint_finding("error", "UNDRIVEN", "ecc_encoder", 12,
                                     "parity[2] undriven on some paths"),
                        lint_finding("error", "LATCH-INFER", "ecc_encoder", 13,
                                     "incomplete assignment infers a latch"),
                        lint_finding("error", "UNUSED-SIG", "ecc_encoder", 14,
                                     "overall parity computed but never consumed"),
                    ]},
                    MID: {"tool_id": "fake-lint", "findings": [
                        lint_finding("fatal", "SYNTAX-SEMI", "ecc_encoder", 12,
                                     "missing ';' after parity[2] assignment"),
                        lint_finding("fatal", "PLACEHOLDER-TEXT", "ecc_encoder", 7,
                                     "placeholder marker in synthesizable region"),
                    ]},
                    HIGH: {"tool_id": "fake-lint", "findings": [
                        lint_finding("fatal", "SYNTAX-SEMI", "ecc_encoder", 12,
                                     "missing ';' after parity[2] assignment"),
                        lint_finding("fatal", "ELAB-FAIL", "ecc_encoder", 1,
                                     "module fails elaboration"),
                    ]},
                }},
                {"tool_id": "fake-lint"},
            ],
            "formal": [
                {"tool_id": "fake-formal", "cexs": cex_range(0, 7, "enc_code_out", 4)},
                {"tool_id": "fake-formal"},
            ],
            "coverage": [
                coverage_entry(95.12, 96.40, 93.88,
                               ["ecc_decoder.sv:31", "ecc_decoder.sv:44", "ecc_encoder.sv:18"]),
                coverage_entry(97.54, 96.72, 95.90,
                               ["ecc_decoder.sv:44", "ecc_decoder.sv:52"]),
            ],
        },
        "resolutions": [
            {"trigger": "deliberation-exhausted",
             "resolution": {
                 "kind": "patch-rtl", "reviewer": "hw-lead", "effort_minutes": 30,
                 "note": "replace the stubbed parity tree and close the syntax hole",
                 "module_name": "ecc_encoder",
                 "diff": make_unified_diff(enc_v1, enc_patched, "ecc_encoder.sv"),
             }},
            {"trigger": "zero-progress-coverage",
             "resolution": {
                 "kind": "remove-properties", "reviewer": "verif-lead", "effort_minutes": 10,
                 "note": "flag-exclusivity shadows and vacuous timing checks pruned",
                 "property_ids": [f"ecc_p{i:02d}" for i in range(13, 20)],
             }},
            {"trigger": "zero-progress-coverage",
             "resolution": {
                 "kind": "waive-unreachable", "reviewer": "verif-lead", "effort_minutes": 10,
                 "note": "double-flip correction branch is dead by construction",
                 "waived_locations": ["ecc_decoder.sv:44", "ecc_decoder.sv:52"],
             }},
        ],
        "expected": {
            "status": "signed-off",
            "tickets": 3,
            "metrics": {
                b: expected_row(
                    d, TEMPS[b],
                    lint_errors_mas={LOW: 5, MID: 2, HIGH: 2}[b],
                    lint_fatal_mas=(b != LOW),
                    accuracy_mas="incomplete",
                    properties_mas=19, properties_hitl=12,
                    coverage_mas_pct=93.88, coverage_hitl_pct=95.90,
                    cex_mas=8, cex_hitl=0,
                    hitl_rtl_minutes=30, hitl_formal_minutes=20,
                    rtl_iterations=3,
                )
                for b in BUCKETS
            },
        },
    }
    return spec_text, scenario


def build_fifo() -> tuple[str, dict[str, Any]]:
    d = "fifo"
    s = Script(d)
    reset = "!rst_n"

    spec_text = """\
design_id: fifo
coverage_target_pct: 100

[requirements]
Synchronous FIFO, depth 16, width 8.  Writes are accepted while full is
low; reads return data in arrival order while empty is low.  A write and
a read in the same cycle are both honored and leave count unchanged.

full and empty are registered flags derived from a 5-bit occupancy
counter.  Writing when full or reading when empty is a protocol error
and must leave the stored contents untouched.

count always equals the number of stored entries.

[interfaces]
clk in 1
rst_n in 1
wr_en in 1
wr_data in 8
rd_en in 1
rd_data out 8
full out 1
empty out 1
count out 5

[performance]
throughput 1.0 word/cycle
fmax 300.0 MHz

[fsm]
EMPTY: wr -> PARTIAL
PARTIAL: count==16 -> FULL, count==0 -> EMPTY
FULL: rd -> PARTIAL
"""

    micro = {
        "datapath_components": [
            {"name": "fifo_core", "role": "circular buffer with wrap pointers and occupancy counter"},
        ],
        "control_fsms": [
            {"name": "flag_ctrl", "outline": "EMPTY/PARTIAL/FULL from the occupancy counter"},
        ],
        "reset_strategy": "sync-active-low",
        "timing_constraints": [{"name": "clk_period", "value": "3.3ns"}],
    }

    vplan = {
        "entries": [
            {"entry_id": "E1", "property_type": "safety",
             "intent": "no overflow: writes when full are dropped",
             "target_signals": ["full", "wr_en", "count"]},
            {"entry_id": "E2", "property_type": "safety",
             "intent": "no underflow: reads when empty are dropped",
             "target_signals": ["empty", "rd_en", "count"]},
            {"entry_id": "E3", "property_type": "data-integrity",
             "intent": "arrival order preserved through the buffer",
             "target_signals": ["rd_data", "wr_data"]},
            {"entry_id": "E4", "property_type": "interface-protocol",
             "intent": "flags track the occupancy counter exactly",
             "target_signals": ["full", "empty", "count"]},
        ],
        "coverage_goals": {"code": 100.0, "assertion": 100.0, "functional": 100.0},
    }

    fifo_draft = """\
module fifo_core (
  input  logic       clk,
  input  logic       rst_n,
  input  logic       wr_en,
  input  logic [7:0] wr_data,
  input  logic       rd_en,
  output logic [7:0] rd_data,
  output logic       full,
  output logic       empty,
  output logic [4:0] count
);
  logic [7:0] mem [16];
  logic [3:0] wp, rp;
  // pointers only, occupancy tracking still missing
  always_ff @(posedge clk) begin
    if (!rst_n) begin wp <= 0; rp <= 0; end
    else begin
      if (wr_en) begin mem[wp] <= wr_data; wp <= wp + 1; end
      if (rd_en) rp <= rp + 1;
    end
  end
  assign rd_data = mem[rp];
  assign full  = 1'b0;
  assign empty = 1'b0;
  assign count = wp - rp;
endmodule"""

    fifo_v1 = """\
module fifo_core (
  input  logic       clk,
  input  logic       rst_n,
  input  logic       wr_en,
  input  logic [7:0] wr_data,
  input  logic       rd_en,
  output logic [7:0] rd_data,
  output logic       full,
  output logic       empty,
  output logic [4:0] count
);
  logic [7:0] mem [16];
  logic [3:0] wp, rp;

  wire do_wr = wr_en && !full;
  wire do_rd = rd_en && !empty;

  always_ff @(posedge clk) begin
    if (!rst_n) begin
      wp <= '0; rp <= '0; count <= '0;
    end else begin
      if (do_wr) begin mem[wp] <= wr_data; wp <= wp + 4'd1; end
      if (do_rd) rp <= rp + 4'd1;
      if (do_wr) count <= count + 5'd1;
      else if (do_rd) count <= count - 5'd1;
    end
  end

  assign rd_data = mem[rp];
  assign full  = (count == 5'd16);
  assign empty = (count == 5'd0);
endmodule"""

    # simultaneous read+write corrupts the counter in v1: the write branch
    # swallows the read decrement
    fifo_patched = fifo_v1.replace(
        """\
      if (do_wr) count <= count + 5'd1;
      else if (do_rd) count <= count - 5'd1;""",
        """\
      case ({do_wr, do_rd})
        2'b10: count <= count + 5'd1;
        2'b01: count <= count - 5'd1;
        default: count <= count;
      endcase""",
    )
    assert fifo_patched != fifo_v1

    s.deliberation("planning", "microarchitecture", "architect",
                   [jfence("microarchitecture", micro)], [])
    s.deliberation("planning", "verification-plan", "verification-planner",
                   [jfence("vplan", vplan)], [])
    s.deliberation(
        "development", "rtl:fifo_core", "rtl-designer",
        [fence("rtl", fifo_draft, module="fifo_core"),
         fence("rtl", fifo_v1, module="fifo_core")],
        [("no-occupancy", "flags hardwired low; overflow is unguarded")],
    )

    entries_props = [
        entry_props("fifo_p", 1, [
            "full |-> !$changed(count) || $past(rd_en)",
            "full && wr_en && !rd_en |=> $stable(count)",
            "count == 5'd16 |-> full",
            "wr_en && full |=> full || $past(rd_en)",
            "count <= 5'd16",
        ], reset),
        entry_props("fifo_p", 6, [
            "empty |-> count == 5'd0",
            "empty && rd_en && !wr_en |=> $stable(count)",
            "count == 5'd0 |-> empty",
            "rd_en && empty |=> empty || $past(wr_en)",
            "!(empty && full)",
        ], reset),
        entry_props("fifo_p", 11, [
            "wr_en && !full |=> count == $past(count) + ($past(rd_en && !empty) ? 5'd0 : 5'd1)",
            "rd_en && !empty && !wr_en |=> count == $past(count) - 5'd1",
            "wr_en && rd_en && !full && !empty |=> $stable(count)",
            "$fell(empty) |-> $past(wr_en)",
            "$fell(full) |-> $past(rd_en)",
        ], reset),
        entry_props("fifo_p", 16, [
            "full == (count == 5'd16)",
            "empty == (count == 5'd0)",
            "!$isunknown(count)",
            "$changed(count) |-> $past(wr_en) || $past(rd_en)",
            "count > 5'd0 |-> !empty",
        ], reset),
    ]
    for i, plist in enumerate(entries_props, start=1):
        s.deliberation("development", f"properties:E{i}", "property-author",
                       [props_response(plist)], [])
    all_props = [p for plist in entries_props for p in plist]

    s.exhaust(
        "execution", "fix-cex:fifo_p01#1", "formal-agent",
        lambda i: jfence("property-fix", {
            "property_id": "fifo_p01",
            "body_text": sva(f"full [*{i}] |-> !$changed(count)", reset),
        }),
        ("masks-bug", "repeating the antecedent hides the read-write collision"),
    )
    for p in all_props[1:11]:
        s.fix_accept(p["property_id"], fixed_body(p["body_text"]))

    s.add("design-reviewer", "execution", "review#1", 1,
          review(True, True, "push/pop bursts land in order on the directed checks"), LOW)
    s.add("design-reviewer", "execution", "review#1", 1,
          review(False, True, "simultaneous read+write drifts the occupancy counter"), MID)
    s.add("design-reviewer", "execution", "review#1", 1,
          review(True, True, "wrap arithmetic checks out at both boundaries"), HIGH)
    s.add("design-reviewer", "execution", "review#2", 1,
          review(True, True, "collision case now leaves count untouched"))

    s.closure_rounds(10)

    scenario = {
        "description": "Depth-16 synchronous FIFO: counter collision patched by hand, "
                       "redundant flag shadows pruned, wrap dead code waived.",
        "design_id": d,
        "spec_file": "../specs/fifo.spec",
        "responses": s.entries,
        "toolchain": {
            "lint": [{"tool_id": "fake-lint"}, {"tool_id": "fake-lint"}],
            "formal": [
                {"tool_id": "fake-formal", "cexs": cex_range(0, 10, "count", 5)},
                {"tool_id": "fake-formal", "cexs": cex_range(1, 10, "count", 8)},
                {"tool_id": "fake-formal"},
            ],
            "coverage": [
                coverage_entry(94.44, 91.67, 93.10,
                               ["fifo_core.sv:38", "fifo_core.sv:41", "fifo_core.sv:55"]),
                coverage_entry(98.15, 97.29, 97.84,
                               ["fifo_core.sv:55", "fifo_core.sv:61"]),
            ],
        },
        "resolutions": [
            {"trigger": "deliberation-exhausted",
             "resolution": {
                 "kind": "patch-rtl", "reviewer": "hw-lead", "effort_minutes": 15,
                 "note": "decode the write/read collision explicitly",
                 "module_name": "fifo_core",
                 "diff": make_unified_diff(fifo_v1, fifo_patched, "fifo_core.sv"),
             }},
            {"trigger": "zero-progress-coverage",
             "resolution": {
                 "kind": "remove-properties", "reviewer": "verif-lead", "effort_minutes": 10,
                 "note": "flag-mirror assertions restate E1/E2; they add no reach",
                 "property_ids": [f"fifo_p{i:02d}" for i in range(14, 21)],
             }},
            {"trigger": "zero-progress-coverage",
             "resolution": {
                 "kind": "waive-unreachable", "reviewer": "verif-lead", "effort_minutes": 10,
                 "note": "belt-and-braces wrap guards cannot fire with power-of-two depth",
                 "waived_locations": ["fifo_core.sv:55", "fifo_core.sv:61"],
             }},
        ],
        "expected": {
            "status": "signed-off",
            "tickets": 3,
            "metrics": {
                b: expected_row(
                    d, TEMPS[b],
                    accuracy_mas={LOW: "correct", MID: "incorrect", HIGH: "correct"}[b],
                    properties_mas=20, properties_hitl=13,
                    coverage_mas_pct=91.67, coverage_hitl_pct=97.29,
                    cex_mas=11, cex_hitl=0,
                    hitl_rtl_minutes=15, hitl_formal_minutes=20,
                    rtl_iterations=2,
                )
                for b in BUCKETS
            },
        },
    }
    return spec_text, scenario


def build_lemming() -> tuple[str, dict[str, Any]]:
    d = "lemming"
    s = Script(d)
    reset = "rst"

    spec_text = """\
design_id: lemming
coverage_target_pct: 100

[requirements]
Walker state machine: the character walks left or right, reverses on a
bump, falls when the ground disappears, and digs on command while
grounded.  Exactly one of walk_left, walk_right, aaah, digging is high
at any time.

Falling preempts everything: while ground is low the machine is in a
falling state and resumes walking in the remembered direction on
landing.  Digging continues until the ground gives way.

Bumps on both sides in the same cycle reverse the direction once.

[interfaces]
clk in 1
rst in 1
bump_left in 1
bump_right in 1
ground in 1
dig in 1
walk_left out 1
walk_right out 1
aaah out 1
digging out 1

[performance]
reaction 1.0 cycle

[fsm]
WALK_L: bump_left -> WALK_R, !ground -> FALL_L, dig -> DIG_L
WALK_R: bump_right -> WALK_L, !ground -> FALL_R, dig -> DIG_R
FALL_L: ground -> WALK_L
FALL_R: ground -> WALK_R
DIG_L: !ground -> FALL_L
DIG_R: !ground -> FALL_R
"""

    micro = {
        "datapath_components": [
            {"name": "lemming_fsm", "role": "direction and activity state register with output decode"},
        ],
        "control_fsms": [
            {"name": "walker", "outline": "six states: walk/fall/dig in both directions"},
        ],
        "reset_strategy": "sync-active-high",
        "timing_constraints": [{"name": "clk_period", "value": "10ns"}],
    }

    vplan = {
        "entries": [
            {"entry_id": "E1", "property_type": "safety",
             "intent": "outputs are one-hot: exactly one activity at a time",
             "target_signals": ["walk_left", "walk_right", "aaah", "digging"]},
            {"entry_id": "E2", "property_type": "liveness",
             "intent": "landing resumes walking in the remembered direction",
             "target_signals": ["aaah", "ground", "walk_left", "walk_right"]},
            {"entry_id": "E3", "property_type": "reset-behavior",
             "intent": "reset enters walking-left cleanly",
             "target_signals": ["walk_left", "rst"]},
        ],
        "coverage_goals": {"code": 100.0, "assertion": 100.0, "functional": 100.0},
    }

    lem_draft = """\
module lemming_fsm (
  input  logic clk,
  input  logic rst,
  input  logic bump_left,
  input  logic bump_right,
  input  logic ground,
  input  logic dig,
  output logic walk_left,
  output logic walk_right,
  output logic aaah,
  output logic digging
);
  logic dir;  // 0 = left, 1 = right
  always_ff @(posedge clk) begin
    if (rst) dir <= 1'b0;
    else if (bump_left) dir <= 1'b1;
    else if (bump_right) dir <= 1'b0;
  end
  assign walk_left  = !dir;
  assign walk_right = dir;
  assign aaah    = !ground;
  assign digging = 1'b0;
endmodule"""

    lem_v1 = """\
module lemming_fsm (
  input  logic clk,
  input  logic rst,
  input  logic bump_left,
  input  logic bump_right,
  input  logic ground,
  input  logic dig,
  output logic walk_left,
  output logic walk_right,
  output logic aaah,
  output logic digging
);
  typedef enum logic [2:0] {
    WALK_L, WALK_R, FALL_L, FALL_R, DIG_L, DIG_R
  } state_t;
  state_t state;

  always_ff @(posedge clk) begin
    if (rst) state <= WALK_L;
    else begin
      casez (state)
        WALK_L:  state <= bump_left ? WALK_R : (dig ? DIG_L : state);
        WALK_R:  state <= bump_right ? WALK_L : (dig ? DIG_R : state);
        FALL_L:  if (ground) state <= WALK_L;
        FALL_R:  if (ground) state <= WALK_R;
        DIG_L:   if (!ground) state <= FALL_L;
        DIG_R:   if (!ground) state <= FALL_R;
        default: state <= WALK_L;
      endcase
    end
  end

  assign walk_left  = (state == WALK_L);
  assign walk_right = (state == WALK_R);
  assign aaah       = (state == FALL_L) || (state == FALL_R);
  assign digging    = (state == DIG_L) || (state == DIG_R);
endmodule"""

    # agent lint repair (high bucket only): same logic, fully decoded case
    lem_v2_high = lem_v1.replace("      casez (state)", "      unique case (state)")
    assert lem_v2_high != lem_v1

    # the human patch: falling must preempt bumps and digging in the walk
    # states; v1 never leaves WALK_* when the ground drops
    def lem_patch(src: str) -> str:
        out = src.replace(
            "        WALK_L:  state <= bump_left ? WALK_R : (dig ? DIG_L : state);\n"
            "        WALK_R:  state <= bump_right ? WALK_L : (dig ? DIG_R : state);",
            "        WALK_L:  state <= !ground ? FALL_L\n"
            "                        : (bump_left ? WALK_R : (dig ? DIG_L : state));\n"
            "        WALK_R:  state <= !ground ? FALL_R\n"
            "                        : (bump_right ? WALK_L : (dig ? DIG_R : state));",
        )
        assert out != src
        return out

    lem_patched = lem_patch(lem_v1)
    lem_patched_high = lem_patch(lem_v2_high)

    s.deliberation("planning", "microarchitecture", "architect",
                   [jfence("microarchitecture", micro)], [])
    s.deliberation("planning", "verification-plan", "verification-planner",
                   [jfence("vplan", vplan)], [])
    s.deliberation(
        "development", "rtl:lemming_fsm", "rtl-designer",
        [fence("rtl", lem_draft, module="lemming_fsm"),
         fence("rtl", lem_v1, module="lemming_fsm")],
        [("missing-states", "falling and digging need real states, not output hacks")],
    )

    entries_props = [
        entry_props("lem_p", 1, [
            "$onehot({walk_left, walk_right, aaah, digging})",
            "!(walk_left && walk_right)",
            "digging |-> !aaah",
            "aaah |-> !ground || $past(!ground)",
            "walk_left || walk_right |-> ground",
            "digging |-> ground",
        ], reset),
        entry_props("lem_p", 7, [
            "aaah && ground |=> walk_left || walk_right",
            "$fell(aaah) |-> walk_left || walk_right",
            "aaah && ground && $past(walk_left, 2) |=> walk_left",
            "aaah && ground && $past(walk_right, 2) |=> walk_right",
            "!ground |=> aaah",
            "aaah && !ground |=> aaah",
        ], reset),
        entry_props("lem_p", 13, [
            "rst |=> walk_left",
            "rst |=> !walk_right && !aaah && !digging",
            "$rose(rst) |=> walk_left",
            "rst [*2] |=> walk_left",
            "!$isunknown({walk_left, walk_right})",
            "$past(rst) |-> !digging",
        ], reset),
    ]
    for i, plist in enumerate(entries_props, start=1):
        s.deliberation("development", f"properties:E{i}", "property-author",
                       [props_response(plist)], [])
    all_props = [p for plist in entries_props for p in plist]

    # high bucket: one fatal lint finding, fixed by the designer in one shot
    s.add("rtl-designer", "execution", "fix-lint:lemming_fsm#1", 1,
          fence("rtl", lem_v2_high, module="lemming_fsm",
                preamble="casez wildcards overlap the enum encodings; decode it fully."),
          HIGH)
    s.add("critic", "execution", "fix-lint:lemming_fsm#1", 1, accept(), HIGH)

    s.exhaust(
        "execution", "fix-cex:lem_p01#1", "formal-agent",
        lambda i: jfence("property-fix", {
            "property_id": "lem_p01",
            "body_text": sva(f"ground [*{i}] |-> $onehot({{walk_left, walk_right, aaah, digging}})",
                             reset),
        }),
        ("masks-bug", "conditioning on ground hides the missing fall transition"),
    )
    for p in all_props[1:3]:
        s.fix_accept(p["property_id"], fixed_body(p["body_text"]))

    s.add("design-reviewer", "execution", "review#1", 1,
          review(False, True, "walker never falls: ground loss is ignored mid-walk"), LOW)
    s.add("design-reviewer", "execution", "review#1", 1,
          review(False, True, "fall preemption missing from both walk states"), MID)
    s.add("design-reviewer", "execution", "review#1", 1,
          review(True, False, "casez with enum labels will not elaborate cleanly"), HIGH)
    s.add("design-reviewer", "execution", "review#2", 1,
          review(True, True, "decoded case elaborates; directed walks pass"))
    s.add("design-reviewer", "execution", "review#3", 1,
          review(True, True, "fall preemption in place after the patch"))

    s.closure_rounds(10)

    added_props = [
        prop("lem_q01", sva("dig && ground && (walk_left || walk_right) |=> digging", reset)),
        prop("lem_q02", sva("digging && !ground |=> aaah", reset)),
        prop("lem_q03", sva("digging |=> digging || aaah", reset)),
    ]

    scenario = {
        "description": "Walker FSM: missing fall preemption patched by hand; humans add "
                       "digging assertions to lift functional coverage.",
        "design_id": d,
        "spec_file": "../specs/lemming.spec",
        "responses": s.entries,
        "toolchain": {
            "lint": [
                {"per_bucket": {
                    HIGH: {"tool_id": "fake-lint", "findings": [
                        lint_finding("fatal", "CASE-OVERLAP", "lemming_fsm", 21,
                                     "casez items overlap the enum encoding"),
                    ]},
                }},
                {"tool_id": "fake-lint"},
                {"tool_id": "fake-lint"},
            ],
            "formal": [
                {"tool_id": "fake-formal", "cexs": cex_range(0, 2, "state", 3)},
                {"tool_id": "fake-formal", "cexs": cex_range(1, 2, "state", 5)},
                {"tool_id": "fake-formal"},
                {"tool_id": "fake-formal"},
            ],
            "coverage": [
                coverage_entry(96.15, 97.22, 98.08,
                               ["lemming_fsm.sv:24", "lemming_fsm.sv:40"]),
                coverage_entry(96.77, 98.15, 97.31,
                               ["lemming_fsm.sv:40"]),
            ],
        },
        "resolutions": [
            {"trigger": "deliberation-exhausted",
             "resolution": {
                 "kind": "patch-rtl", "reviewer": "hw-lead", "effort_minutes": 15,
                 "note": "fall must preempt bumps and digging in the walk states",
                 "module_name": "lemming_fsm",
                 "diff": make_unified_diff(lem_v1, lem_patched, "lemming_fsm.sv"),
             },
             "per_bucket": {
                 HIGH: {
                     "kind": "patch-rtl", "reviewer": "hw-lead", "effort_minutes": 15,
                     "note": "fall must preempt bumps and digging in the walk states",
                     "module_name": "lemming_fsm",
                     "diff": make_unified_diff(lem_v2_high, lem_patched_high, "lemming_fsm.sv"),
                 },
             }},
            {"trigger": "zero-progress-coverage",
             "resolution": {
                 "kind": "add-properties", "reviewer": "verif-lead", "effort_minutes": 10,
                 "note": "digging entry and exit were never asserted",
                 "properties": added_props,
             }},
            {"trigger": "zero-progress-coverage",
             "resolution": {
                 "kind": "waive-unreachable", "reviewer": "verif-lead", "effort_minutes": 5,
                 "note": "default arm of the decoded case is unreachable",
                 "waived_locations": ["lemming_fsm.sv:40"],
             }},
        ],
        "expected": {
            "status": "signed-off",
            "tickets": 3,
            "metrics": {
                b: expected_row(
                    d, TEMPS[b],
                    lint_errors_mas=(1 if b == HIGH else 0),
                    lint_fatal_mas=(b == HIGH),
                    accuracy_mas={LOW: "incorrect", MID: "incorrect",
                                  HIGH: "non-synthesizable"}[b],
                    properties_mas=18, properties_hitl=21,
                    coverage_mas_pct=96.15, coverage_hitl_pct=96.77,
                    cex_mas=3, cex_hitl=0,
                    hitl_rtl_minutes=15, hitl_formal_minutes=15,
                    rtl_iterations=2,
                )
                for b in BUCKETS
            },
        },
    }
    return spec_text, scenario


def build_timer() -> tuple[str, dict[str, Any]]:
    d = "timer"
    s = Script(d)
    reset = "!rst_n"

    spec_text = """\
design_id: timer
coverage_target_pct: 100

[requirements]
Programmable countdown timer with a 4-bit prescaler.  load captures
load_value into the counter; enable gates counting.  The counter
decrements once every 2^prescale cycles while enabled.

expired pulses for exactly one cycle when the counter reaches zero.  In
reload_mode the counter reloads load_value on expiry and keeps running;
otherwise it parks at zero until the next load.

Loads take effect immediately, also mid-countdown, and clear a pending
expiry pulse.

[interfaces]
clk in 1
rst_n in 1
load in 1
load_value in 16
prescale in 4
enable in 1
reload_mode in 1
count out 16
expired out 1

[performance]
resolution 1.0 cycle
fmax 150.0 MHz

[fsm]
IDLE: load -> ARMED
ARMED: enable -> COUNTING
COUNTING: count==0 -> EXPIRED, load -> ARMED
EXPIRED: reload_mode -> ARMED, !reload_mode -> IDLE
"""

    micro = {
        "datapath_components": [
            {"name": "timer_core", "role": "prescaled down-counter with reload and expiry pulse"},
        ],
        "control_fsms": [
            {"name": "timer_ctrl", "outline": "IDLE/ARMED/COUNTING/EXPIRED with reload loop"},
        ],
        "reset_strategy": "sync-active-low",
        "timing_constraints": [{"name": "clk_period", "value": "6.6ns"}],
    }

    vplan = {
        "entries": [
            {"entry_id": "E1", "property_type": "reset-behavior",
             "intent": "reset parks the counter at zero with expired low",
             "target_signals": ["count", "expired", "rst_n"]},
            {"entry_id": "E2", "property_type": "safety",
             "intent": "load captures load_value in every state",
             "target_signals": ["count", "load", "load_value"]},
            {"entry_id": "E3", "property_type": "data-integrity",
             "intent": "decrement cadence follows the prescaler",
             "target_signals": ["count", "prescale", "enable"]},
            {"entry_id": "E4", "property_type": "interface-protocol",
             "intent": "expired is a single-cycle pulse aligned with zero",
             "target_signals": ["expired", "count"]},
            {"entry_id": "E5", "property_type": "safety",
             "intent": "prescaler updates never glitch the counter",
             "target_signals": ["count", "prescale"]},
            {"entry_id": "E6", "property_type": "liveness",
             "intent": "an enabled nonzero counter eventually expires",
             "target_signals": ["expired", "enable"]},
        ],
        "coverage_goals": {"code": 100.0, "assertion": 100.0, "functional": 100.0},
    }

    timer_v1 = """\
module timer_core (
  input  logic        clk,
  input  logic        rst_n,
  input  logic        load,
  input  logic [15:0] load_value,
  input  logic [3:0]  prescale,
  input  logic        enable,
  input  logic        reload_mode,
  output logic [15:0] count,
  output logic        expired
);
  logic [15:0] tick;
  wire tick_hit = (tick >= (16'd1 << prescale) - 16'd1);
  wire decrement = enable && tick_hit && (count != 16'd0);

  always_ff @(posedge clk) begin
    if (!rst_n) begin
      count <= '0; tick <= '0; expired <= 1'b0;
    end else begin
      expired <= 1'b0;
      if (load) begin
        count <= load_value; tick <= '0;
      end else if (decrement) begin
        count <= count - 16'd1; tick <= '0;
        if (count == 16'd1) begin
          expired <= 1'b1;
          if (reload_mode) count <= load_value;
        end
      end else if (enable) begin
        tick <= tick + 16'd1;
      end
    end
  end
endmodule"""

    # v1 reloads in the same cycle as the expiry pulse, so a back-to-back
    # reload skips the parked-at-zero beat the spec requires
    timer_patched = timer_v1.replace(
        """\
        if (count == 16'd1) begin
          expired <= 1'b1;
          if (reload_mode) count <= load_value;
        end""",
        """\
        if (count == 16'd1) expired <= 1'b1;
      end else if (expired && reload_mode) begin
        count <= load_value; tick <= '0;""",
    )
    assert timer_patched != timer_v1

    s.deliberation("planning", "microarchitecture", "architect",
                   [jfence("microarchitecture", micro)], [])
    s.deliberation("planning", "verification-plan", "verification-planner",
                   [jfence("vplan", vplan,
                           preamble="Six entries; the prescaler cadence gets its own slice.")],
                   [])
    s.deliberation("development", "rtl:timer_core", "rtl-designer",
                   [fence("rtl", timer_v1, module="timer_core")], [])

    entries_props = [
        entry_props("tmr_p", 1, [
            "!rst_n |=> count == 16'd0",
            "!rst_n |=> !expired",
            "$rose(rst_n) |-> count == 16'd0",
            "!rst_n [*2] |=> count == 16'd0 && !expired",
            "$fell(rst_n) |=> !expired",
            "!rst_n |=> !$isunknown(count)",
            "$rose(rst_n) |-> !expired",
        ], reset),
        entry_props("tmr_p", 8, [
            "load |=> count == $past(load_value)",
            "load && enable |=> count == $past(load_value)",
            "load |=> !expired",
            "load [*2] |=> count == $past(load_value)",
            "load && $past(expired) |=> !expired",
            "load |=> !$isunknown(count)",
            "load && reload_mode |=> count == $past(load_value)",
        ], reset),
        entry_props("tmr_p", 15, [
            "enable && prescale == 4'd0 && count != 16'd0 && !load |=> count == $past(count) - 16'd1",
            "!enable && !load |=> $stable(count)",
            "enable && count == 16'd0 && !load |=> count == 16'd0 || $past(reload_mode)",
            "$changed(count) |-> $past(load) || $past(enable) || $fell(rst_n)",
            "enable && prescale != 4'd0 |=> count == $past(count) || count == $past(count) - 16'd1",
            "count != 16'd0 && !enable && !load |=> count == $past(count)",
            "!$isunknown(count)",
        ], reset),
        entry_props("tmr_p", 22, [
            "expired |=> !expired || $past(load)",
            "expired |-> $past(count) == 16'd1 || $past(load)",
            "$rose(expired) |-> $past(count == 16'd1)",
            "expired |-> !$isunknown(count)",
            "expired && !reload_mode |=> count == 16'd0 || $past(load)",
            "expired && reload_mode |=> count == $past(load_value) || $past(load)",
            "!(expired && $past(expired))",
        ], reset),
        entry_props("tmr_p", 29, [
            "$changed(prescale) && !load |=> $stable(count) || count == $past(count) - 16'd1",
            "$changed(prescale) |-> !$isunknown(count)",
            "$changed(prescale) && !enable |=> $stable(count)",
            "prescale == 4'd15 && enable |=> $stable(count) || count == $past(count) - 16'd1",
            "$changed(prescale) |=> !expired || $past(count) == 16'd1",
            "$stable(prescale) || !$isunknown(count)",
            "$changed(prescale) && count == 16'd0 |=> count == 16'd0 || $past(load) || $past(reload_mode)",
        ], reset),
        entry_props("tmr_p", 36, [
            "enable && count == 16'd1 && prescale == 4'd0 && !load |=> expired",
            "enable && count != 16'd0 |-> s_eventually (expired || !enable || load)",
            "enable [*3] && count == 16'd2 && prescale == 4'd0 |=> ##1 expired || $past(load)",
            "expired |-> $past(enable) || $past(load)",
            "count == 16'd0 && !reload_mode && !load |=> count == 16'd0",
            "reload_mode && expired |=> count != 16'd0 || $past(load_value) == 16'd0",
            "enable && !load |-> s_eventually (count == 16'd0 || load || !enable)",
        ], reset),
    ]
    for i, plist in enumerate(entries_props, start=1):
        s.deliberation("development", f"properties:E{i}", "property-author",
                       [props_response(plist)], [])
    all_props = [p for plist in entries_props for p in plist]

    s.exhaust(
        "execution", "fix-cex:tmr_p01#1", "formal-agent",
        lambda i: jfence("property-fix", {
            "property_id": "tmr_p01",
            "body_text": sva(f"!rst_n |=> ##{i - 1} count == 16'd0", reset),
        }),
        ("weakens-intent", "delaying the reset check leaves the reload race unprobed"),
    )
    for p in all_props[1:22]:
        s.fix_accept(p["property_id"], fixed_body(p["body_text"]))

    s.add("design-reviewer", "execution", "review#1", 1,
          review(True, False, "shift by a variable amount lands in a silly mux tree"), LOW)
    s.add("design-reviewer", "execution", "review#1", 1,
          review(False, True, "reload fires a beat early and eats the parked cycle"), MID)
    s.add("design-reviewer", "execution", "review#1", 1,
          review(False, True, "expiry and reload collide in the same branch"), HIGH)
    s.add("design-reviewer", "execution", "review#2", 1,
          review(True, True, "reload now waits out the expiry pulse"))

    s.closure_rounds(10)

    added_props = [
        prop(f"tmr_q{i:02d}", sva(e, reset))
        for i, e in enumerate([
            "reload_mode && expired |=> count == $past(load_value)",
            "reload_mode && expired |=> tick == 16'd0",
            "reload_mode && expired && enable |=> !expired",
            "!reload_mode && expired |=> count == 16'd0",
            "!reload_mode && count == 16'd0 && !load [*4] |-> count == 16'd0",
            "load && expired |=> count == $past(load_value)",
            "expired |=> tick == 16'd0 || $past(load)",
            "enable && tick != 16'd0 |-> count == $past(count) || $past(tick_hit)",
            "prescale == 4'd1 && enable && count != 16'd0 |-> ##[1:2] $changed(count) || load",
            "prescale == 4'd2 && enable [*4] && count != 16'd0 |-> ##[0:4] $changed(count)",
            "count == 16'd0 && reload_mode && !expired && !load |=> count == 16'd0",
            "$rose(enable) && count != 16'd0 |-> s_eventually (expired || !enable || load)",
            "$fell(enable) |=> $stable(count) || $past(load)",
            "load_value == 16'd0 && load |=> count == 16'd0",
            "load_value == 16'd0 && load && enable |=> !expired",
        ], start=1)
    ]

    scenario = {
        "description": "Prescaled countdown timer: early-reload race patched by hand, "
                       "fifteen human assertions close the cadence holes.",
        "design_id": d,
        "spec_file": "../specs/timer.spec",
        "responses": s.entries,
        "toolchain": {
            "lint": [{"tool_id": "fake-lint"}, {"tool_id": "fake-lint"}],
            "formal": [
                {"tool_id": "fake-formal", "cexs": cex_range(0, 21, "count", 7)},
                {"tool_id": "fake-formal", "cexs": cex_range(1, 21, "count", 11)},
                {"tool_id": "fake-formal"},
                {"tool_id": "fake-formal"},
            ],
            "coverage": [
                coverage_entry(88.72, 83.95, 86.41,
                               ["timer_core.sv:29", "timer_core.sv:35",
                                "timer_core.sv:47", "timer_core.sv:52"]),
                coverage_entry(96.39, 97.45, 98.02,
                               ["timer_core.sv:47", "timer_core.sv:52"]),
            ],
        },
        "resolutions": [
            {"trigger": "deliberation-exhausted",
             "resolution": {
                 "kind": "patch-rtl", "reviewer": "hw-lead", "effort_minutes": 15,
                 "note": "reload must wait for the expiry pulse to retire",
                 "module_name": "timer_core",
                 "diff": make_unified_diff(timer_v1, timer_patched, "timer_core.sv"),
             }},
            {"trigger": "zero-progress-coverage",
             "resolution": {
                 "kind": "add-properties", "reviewer": "verif-lead", "effort_minutes": 20,
                 "note": "reload loop and prescaler cadence were never pinned down",
                 "properties": added_props,
             }},
            {"trigger": "zero-progress-coverage",
             "resolution": {
                 "kind": "waive-unreachable", "reviewer": "verif-lead", "effort_minutes": 10,
                 "note": "saturation guards are dead: the counter stops at zero by construction",
                 "waived_locations": ["timer_core.sv:47", "timer_core.sv:52"],
             }},
        ],
        "expected": {
            "status": "signed-off",
            "tickets": 3,
            "metrics": {
                b: expected_row(
                    d, TEMPS[b],
                    accuracy_mas={LOW: "non-synthesizable", MID: "incorrect",
                                  HIGH: "incorrect"}[b],
                    properties_mas=42, properties_hitl=57,
                    coverage_mas_pct=83.95, coverage_hitl_pct=96.39,
                    cex_mas=22, cex_hitl=0,
                    hitl_rtl_minutes=15, hitl_formal_minutes=30,
                    rtl_iterations=1,
                )
                for b in BUCKETS
            },
        },
    }
    return spec_text, scenario


BUILDERS = {
    "crc": build_crc,
    "ecc": build_ecc,
    "fifo": build_fifo,
    "lemming": build_lemming,
    "timer": build_timer,
}

ZERO_SHOT = {"crc": 55.2, "ecc": 78.1, "fifo": 71.3, "lemming": 74.15, "timer": 70.5}


def check_diffs(scenario: dict[str, Any]) -> None:
    """Every shipped diff must apply cleanly to something; spot-check shape."""
    for entry in scenario["resolutions"]:
        for body in [entry.get("resolution", {})] + list(entry.get("per_bucket", {}).values()):
            if body.get("kind") == "patch-rtl":
                assert body["diff"].startswith("--- "), "diff missing file header"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=ROOT, help="repository root to write into")
    parser.add_argument("--no-check", action="store_true", help="skip the dry-run validation")
    args = parser.parse_args()

    out: Path = args.out
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    (out / "specs").mkdir(parents=True, exist_ok=True)
    (out / "data").mkdir(parents=True, exist_ok=True)

    written: list[Path] = []
    for name, builder in BUILDERS.items():
        spec_text, scenario = builder()
        check_diffs(scenario)
        spec_path = out / "specs" / f"{name}.spec"
        spec_path.write_text(spec_text, encoding="utf-8")
        scenario_path = out / "scenarios" / f"{name}.json"
        scenario_path.write_text(json.dumps(scenario, indent=1) + "\n", encoding="utf-8")
        written += [spec_path, scenario_path]

    zs_path = out / "data" / "zero_shot.json"
    zs_path.write_text(json.dumps({"rows": ZERO_SHOT}, indent=1) + "\n", encoding="utf-8")
    written.append(zs_path)

    for p in written:
        print(f"wrote {p.relative_to(out)}")

    if args.no_check:
        return 0

    from tapeloop.workflow import validate_scenario
    from tapeloop.tooling import ScenarioIncomplete, SchemaViolation

    failures = 0
    for name in BUILDERS:
        path = out / "scenarios" / f"{name}.json"
        try:
            validate_scenario(path)
        except (ScenarioIncomplete, SchemaViolation) as exc:
            print(f"FAIL {name}: {exc}")
            failures += 1
        else:
            print(f"ok   {name}: all buckets reach a deliberate terminal state")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
