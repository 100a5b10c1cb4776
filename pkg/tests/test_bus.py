"""Event log and group chat mechanics."""

from __future__ import annotations

import json
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tapeloop.bus import (
    BusEvent,
    CorruptLog,
    EventLog,
    Granularity,
    GroupChatManager,
    HashMismatch,
    MessageBus,
    NotEnrolled,
    OutOfTurn,
    SeqGap,
    event_from_dict,
    groupchat_topic,
    read_log,
    replay_fold,
)


def ev(seq: int, payload=None) -> BusEvent:
    return BusEvent(
        seq=seq,
        granularity=Granularity.LIFECYCLE,
        sender="orchestrator",
        topic="run/r1/chat",
        payload=payload or {"type": "noop", "n": seq},
        state_hash_after="0" * 64,
    )


def test_event_line_round_trip():
    e = ev(3, {"type": "x", "nested": {"a": [1, 2]}})
    line = e.to_line()
    back = event_from_dict(json.loads(line))
    assert back == e


def test_event_from_dict_missing_field():
    with pytest.raises(CorruptLog):
        event_from_dict({"seq": 1, "sender": "s"}, line_no=7)


def test_log_append_assigns_contiguous_seqs(tmp_path):
    log = EventLog(tmp_path / "events.jsonl")
    for i in range(3):
        e = log.append(Granularity.CHAT, "a", "t", {"i": i}, state_hash_after="f" * 64)
        assert e.seq == i + 1
    assert log.next_seq == 4
    assert [e.seq for e in log.events()] == [1, 2, 3]
    # write-through: the file carries the same three lines
    again = read_log(tmp_path / "events.jsonl")
    assert again == log.events()


def test_log_ingest_rejects_gaps():
    log = EventLog()
    log.ingest(ev(1))
    with pytest.raises(SeqGap):
        log.ingest(ev(3))


def test_events_from_is_inclusive():
    log = EventLog()
    for i in range(1, 6):
        log.ingest(ev(i))
    assert [e.seq for e in log.events_from(3)] == [3, 4, 5]
    assert log.events_from(99) == []


def test_wait_beyond_wakes_on_append():
    log = EventLog()
    log.ingest(ev(1))
    seen = []

    def waiter():
        seen.append(log.wait_beyond(1, timeout=5.0))

    t = threading.Thread(target=waiter)
    t.start()
    log.ingest(ev(2))
    t.join(timeout=5.0)
    assert seen == [True]
    assert log.wait_beyond(99, timeout=0.01) is False


def test_read_log_rejects_garbage(tmp_path):
    p = tmp_path / "events.jsonl"
    p.write_text('{"not": "an event"}\n', encoding="utf-8")
    with pytest.raises(CorruptLog):
        read_log(p)
    p.write_text("not json at all\n", encoding="utf-8")
    with pytest.raises(CorruptLog):
        read_log(p)


def test_replay_fold_verifies_recorded_hashes():
    from tapeloop.domain import canonical_hash

    def fold(state, event):
        return {"n": (state or {"n": 0})["n"] + 1}

    good = BusEvent(1, Granularity.CHAT, "s", "t", {}, canonical_hash({"n": 1}))
    bad = BusEvent(2, Granularity.CHAT, "s", "t", {}, "e" * 64)
    with pytest.raises(HashMismatch) as exc:
        replay_fold([good, bad], None, fold)
    assert exc.value.seq == 2  # divergence pinned to the first lying event
    # without verification the same log folds fine
    assert replay_fold([good, bad], None, fold, verify_hashes=False) == {"n": 2}
    assert replay_fold([], None, fold) is None


def test_replay_fold_requires_seq_one_start():
    with pytest.raises(SeqGap):
        replay_fold([ev(2)], None, lambda s, e: s, verify_hashes=False)


# -- pub/sub -----------------------------------------------------------------

def test_message_bus_exact_topic_delivery():
    bus = MessageBus()
    got = []
    bus.subscribe("a", lambda t, s, p: got.append((t, s, p["k"])))
    assert bus.publish("a", "x", {"k": 1}) == 1
    assert bus.publish("b", "x", {"k": 2}) == 0
    bus.unsubscribe("a", None)  # unknown handler is a no-op
    assert got == [("a", "x", 1)]


# -- turn taking ---------------------------------------------------------------

def test_turn_order_is_fifo():
    chat = GroupChatManager("r1", ["a", "b"])
    chat.grant_floor("a")
    chat.grant_floor("b")
    chat.grant_floor("a")
    order = []
    for expected in ("a", "b", "a"):
        assert chat.select_next_speaker() == expected
        chat.route_message(expected, {"m": expected})
        order.append(expected)
    assert chat.select_next_speaker() is None
    assert [s for s, _ in chat.transcript()] == order


def test_out_of_turn_leaves_queue_untouched():
    chat = GroupChatManager("r1", ["a", "b"])
    chat.grant_floor("a")
    before = chat.pending_turns
    with pytest.raises(OutOfTurn):
        chat.route_message("b", {"m": 1})
    assert chat.pending_turns == before
    assert chat.transcript() == []
    chat.route_message("a", {"m": 2})  # rightful holder still posts


def test_unenrolled_sender_rejected():
    chat = GroupChatManager("r1", ["a"])
    with pytest.raises(NotEnrolled):
        chat.grant_floor("ghost")
    with pytest.raises(NotEnrolled):
        chat.route_message("ghost", {})
    chat.enroll("ghost")
    chat.grant_floor("ghost")
    assert chat.select_next_speaker() == "ghost"


def test_post_with_empty_queue_is_out_of_turn():
    chat = GroupChatManager("r1", ["a"])
    with pytest.raises(OutOfTurn):
        chat.route_message("a", {})


def test_groupchat_topic_shape():
    chat = GroupChatManager("r7", ["a"])
    assert chat.topic == groupchat_topic("r7")
    assert "r7" in chat.topic


ROLES = ("architect", "critic", "designer")


@settings(max_examples=120, deadline=None)
@given(
    st.lists(
        st.tuples(st.sampled_from(("grant", "post")), st.sampled_from(ROLES)),
        max_size=40,
    )
)
def test_turn_taking_never_admits_an_interloper(ops):
    """Whatever the interleaving, only the queue head ever lands a message."""
    chat = GroupChatManager("fuzz", ROLES)
    posted = []
    for op, role in ops:
        if op == "grant":
            chat.grant_floor(role)
        else:
            holder = chat.select_next_speaker()
            queue_before = chat.pending_turns
            if holder == role:
                chat.route_message(role, {"r": role})
                posted.append(role)
                assert chat.pending_turns == queue_before[1:]
            else:
                with pytest.raises(OutOfTurn):
                    chat.route_message(role, {"r": role})
                assert chat.pending_turns == queue_before
    assert [s for s, _ in chat.transcript()] == posted
