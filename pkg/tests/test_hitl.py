"""Escalation tickets, resolution validation, unified diffs."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tapeloop.hitl import (
    ConflictingState,
    EscalationTicket,
    MINUTES_LEDGER,
    PatchFailed,
    Resolution,
    ResolutionInvalid,
    ResolutionKind,
    TicketStatus,
    TicketTrigger,
    apply_unified_diff,
    list_pending,
    make_unified_diff,
    next_ticket_id,
    parse_resolution,
    resolution_from_dict,
    ticket_from_dict,
)


def ticket(tid="T1") -> EscalationTicket:
    return EscalationTicket(
        ticket_id=tid,
        run_id="r1",
        trigger=TicketTrigger.DELIBERATION_EXHAUSTED,
        summary="stuck",
        context={"task_id": "fix-cex:p1#1"},
    )


def test_ticket_ids_count_up():
    assert next_ticket_id([]) == "T1"
    assert next_ticket_id([ticket("T1")]) == "T2"
    assert next_ticket_id([ticket("T1"), ticket("T2")]) == "T3"


def test_list_pending_filters_resolved():
    res = Resolution(ResolutionKind.ABORT, "alice", 0)
    open_t, closed_t = ticket("T1"), ticket("T2").resolved_with(res)
    assert list_pending([open_t, closed_t]) == (open_t,)
    assert closed_t.status is TicketStatus.RESOLVED


def test_double_resolution_conflicts():
    res = Resolution(ResolutionKind.ABORT, "alice", 0)
    closed = ticket().resolved_with(res)
    with pytest.raises(ConflictingState):
        closed.resolved_with(res)


def test_minutes_ledger_covers_every_kind():
    assert set(MINUTES_LEDGER) == set(ResolutionKind)
    assert MINUTES_LEDGER[ResolutionKind.PATCH_RTL] == "rtl"
    assert MINUTES_LEDGER[ResolutionKind.WAIVE_UNREACHABLE] == "formal"
    assert MINUTES_LEDGER[ResolutionKind.ABORT] is None


# -- wire validation -----------------------------------------------------------

def test_parse_resolution_each_kind():
    patch = parse_resolution({
        "kind": "patch-rtl", "reviewer": "hw-lead", "effort_minutes": 15,
        "module_name": "alu", "diff": "--- a\n+++ b\n",
    })
    assert patch.kind is ResolutionKind.PATCH_RTL and patch.effort_minutes == 15
    add = parse_resolution({
        "kind": "add-properties", "reviewer": "v", "effort_minutes": 10,
        "properties": [{"property_id": "q1", "body_text": "assert property (x);"}],
    })
    assert add.properties[0]["property_id"] == "q1"
    remove = parse_resolution({
        "kind": "remove-properties", "reviewer": "v", "effort_minutes": 5,
        "property_ids": ["p9"],
    })
    assert remove.property_ids == ("p9",)
    waive = parse_resolution({
        "kind": "waive-unreachable", "reviewer": "v", "effort_minutes": 5,
        "waived_locations": ["m.sv:4"],
    })
    assert waive.waived_locations == ("m.sv:4",)
    parse_resolution({"kind": "edit-spec", "reviewer": "v", "effort_minutes": 1,
                      "spec_text": "design_id: d\n"})
    parse_resolution({"kind": "abort", "reviewer": "v", "effort_minutes": 0})


@pytest.mark.parametrize(
    "wire,bad_subject",
    [
        ({"kind": "nope", "reviewer": "v"}, "nope"),
        ({"kind": "abort"}, "reviewer"),
        ({"kind": "abort", "reviewer": "v", "effort_minutes": -1}, "effort_minutes"),
        ({"kind": "abort", "reviewer": "v", "effort_minutes": True}, "effort_minutes"),
        ({"kind": "patch-rtl", "reviewer": "v", "module_name": "m"}, "diff"),
        ({"kind": "add-properties", "reviewer": "v", "properties": []}, "properties"),
        ({"kind": "add-properties", "reviewer": "v",
          "properties": [{"property_id": "p"}]}, "properties[0]"),
        ({"kind": "remove-properties", "reviewer": "v", "property_ids": [""]}, "property_ids"),
        ({"kind": "waive-unreachable", "reviewer": "v"}, "waived_locations"),
        ({"kind": "edit-spec", "reviewer": "v"}, "spec_text"),
    ],
)
def test_parse_resolution_rejections(wire, bad_subject):
    with pytest.raises(ResolutionInvalid) as exc:
        parse_resolution(wire)
    assert any(v.subject == bad_subject for v in exc.value.violations)


def test_parse_resolution_collects_multiple_violations():
    with pytest.raises(ResolutionInvalid) as exc:
        parse_resolution({"kind": "patch-rtl", "effort_minutes": -3})
    assert len(exc.value.violations) >= 4  # reviewer, minutes, module, diff


def test_resolution_dict_round_trip():
    res = parse_resolution({
        "kind": "remove-properties", "reviewer": "v", "effort_minutes": 5,
        "property_ids": ["a", "b"], "note": "redundant",
    })
    from tapeloop.domain import to_jsonable

    assert resolution_from_dict(to_jsonable(res)) == res
    t = ticket().resolved_with(res)
    assert ticket_from_dict(to_jsonable(t)) == t


# -- unified diffs ---------------------------------------------------------------

BASE = "module alu;\n  wire a;\n  wire b;\n  assign b = a;\nendmodule\n"


def test_make_then_apply_diff():
    updated = BASE.replace("assign b = a;", "assign b = ~a;")
    diff = make_unified_diff(BASE, updated, "alu.sv")
    assert diff.startswith("--- a/alu.sv")
    assert apply_unified_diff(BASE, diff) == updated


def test_apply_diff_rejects_context_mismatch():
    updated = BASE.replace("assign b = a;", "assign b = ~a;")
    diff = make_unified_diff(BASE, updated, "alu.sv")
    drifted = BASE.replace("wire a;", "wire a, c;")
    with pytest.raises(PatchFailed):
        apply_unified_diff(drifted, diff)


def test_apply_diff_rejects_garbage():
    with pytest.raises(PatchFailed):
        apply_unified_diff(BASE, "not a diff at all")
    with pytest.raises(PatchFailed):
        apply_unified_diff(BASE, "--- a/x\n+++ b/x\n@@ malformed @@\n")


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.sampled_from(["wire x;", "assign y = x;", "// note", "  if (a) b <= c;"]),
             min_size=1, max_size=12),
    st.data(),
)
def test_diff_round_trip_random_edits(lines, data):
    original = "\n".join(lines) + "\n"
    edited = list(lines)
    op = data.draw(st.sampled_from(["drop", "dup", "replace", "append"]))
    idx = data.draw(st.integers(0, len(edited) - 1))
    if op == "drop":
        edited.pop(idx)
    elif op == "dup":
        edited.insert(idx, edited[idx])
    elif op == "replace":
        edited[idx] = "assign z = 1'b0;"
    else:
        edited.append("endmodule")
    updated = "\n".join(edited) + "\n" if edited else ""
    diff = make_unified_diff(original, updated, "m.sv")
    if original == updated:
        assert diff == ""
        return
    assert apply_unified_diff(original, diff) == updated
