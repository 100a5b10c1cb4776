"""Topic message bus, group chat turn-taking, and the append-only event log.

The event log is the system of record: one JSONL file per run, one event per
line, sequence numbers gapless from 1 across every granularity.  Replay folds
the log back through a caller-supplied transition function and cross-checks
each recorded ``state_hash_after``, so any tampering or nondeterminism is
detected at the first divergent event.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

from .domain import DomainError, canonical_hash, to_jsonable

logger = logging.getLogger(__name__)


class Granularity(str, Enum):
    CHAT = "chat"
    TOOL = "tool"
    ERROR = "error"
    LIFECYCLE = "lifecycle"


def groupchat_topic(run_id: str) -> str:
    return f"groupchat:{run_id}"


def tool_topic(run_id: str) -> str:
    return f"tool:{run_id}"


def hitl_topic(run_id: str) -> str:
    return f"hitl:{run_id}"


@dataclass(frozen=True)
class BusEvent:
    """One immutable log line.  ``payload`` must already be JSON-able."""

    seq: int
    granularity: Granularity
    sender: str
    topic: str
    payload: dict[str, Any]
    state_hash_after: str

    def to_line(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "granularity": self.granularity.value,
                "sender": self.sender,
                "topic": self.topic,
                "payload": self.payload,
                "state_hash_after": self.state_hash_after,
            },
            ensure_ascii=False,
            sort_keys=True,
        )


class SeqGap(DomainError):
    def __init__(self, expected: int, got: int):
        self.expected, self.got = expected, got
        super().__init__(f"sequence gap: expected {expected}, got {got}")


class CorruptLog(DomainError):
    def __init__(self, line_no: int, reason: str):
        self.line_no, self.reason = line_no, reason
        super().__init__(f"corrupt log at line {line_no}: {reason}")


class HashMismatch(DomainError):
    def __init__(self, seq: int, recorded: str, computed: str):
        self.seq, self.recorded, self.computed = seq, recorded, computed
        super().__init__(
            f"state hash mismatch at seq {seq}: log says {recorded[:12]}.., replay computed {computed[:12]}.."
        )


def event_from_dict(d: dict[str, Any], line_no: int = 0) -> BusEvent:
    try:
        return BusEvent(
            seq=int(d["seq"]),
            granularity=Granularity(d["granularity"]),
            sender=d["sender"],
            topic=d["topic"],
            payload=d["payload"],
            state_hash_after=d["state_hash_after"],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptLog(line_no, f"bad event shape: {exc}") from exc


def read_log(path: str | Path) -> list[BusEvent]:
    """Load a JSONL event log; any malformed line raises :class:`CorruptLog`."""
    events: list[BusEvent] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptLog(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise CorruptLog(line_no, "line is not an object")
            events.append(event_from_dict(data, line_no))
    return events


class EventLog:
    """Append-only per-run event log with optional JSONL write-through.

    Single writer by construction: every append happens under one lock and
    the sequence number is assigned there, so the gapless invariant cannot
    be broken by interleaving.  Readers may tail concurrently via
    :meth:`events_from` / :meth:`wait_beyond`.
    """

    def __init__(self, path: str | Path | None = None):
        self._events: list[BusEvent] = []
        self._path = Path(path) if path is not None else None
        self._cond = threading.Condition()
        if self._path is not None and self._path.exists():
            self._events = read_log(self._path)
            self._check_contiguous(self._events)

    @staticmethod
    def _check_contiguous(events: list[BusEvent]) -> None:
        for i, ev in enumerate(events, start=1):
            if ev.seq != i:
                raise SeqGap(i, ev.seq)

    def __len__(self) -> int:
        with self._cond:
            return len(self._events)

    @property
    def next_seq(self) -> int:
        return len(self) + 1

    def append(
        self,
        granularity: Granularity,
        sender: str,
        topic: str,
        payload: dict[str, Any],
        state_hash_after: str,
    ) -> BusEvent:
        with self._cond:
            event = BusEvent(
                seq=len(self._events) + 1,
                granularity=granularity,
                sender=sender,
                topic=topic,
                payload=to_jsonable(payload),
                state_hash_after=state_hash_after,
            )
            self._events.append(event)
            if self._path is not None:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(event.to_line() + "\n")
            self._cond.notify_all()
            return event

    def ingest(self, event: BusEvent) -> None:
        """Append a pre-sequenced event; raises :class:`SeqGap` when out of order."""
        with self._cond:
            expected = len(self._events) + 1
            if event.seq != expected:
                raise SeqGap(expected, event.seq)
            self._events.append(event)
            if self._path is not None:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(event.to_line() + "\n")
            self._cond.notify_all()

    def events(self) -> list[BusEvent]:
        with self._cond:
            return list(self._events)

    def events_from(self, seq: int) -> list[BusEvent]:
        """All events with sequence number >= ``seq`` (1-based)."""
        with self._cond:
            return [e for e in self._events if e.seq >= seq]

    def wait_beyond(self, seq: int, timeout: float | None = None) -> bool:
        """Block until an event with sequence number > ``seq`` exists."""
        with self._cond:
            return self._cond.wait_for(lambda: len(self._events) > seq, timeout=timeout)


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

def replay_fold(
    events: Iterable[BusEvent],
    initial_state: Any,
    apply_fn: Callable[[Any, BusEvent], Any],
    verify_hashes: bool = True,
) -> Any:
    """Rebuild state by folding ``apply_fn`` over the log.

    The log must be gapless from 1.  With ``verify_hashes`` every event's
    recorded ``state_hash_after`` is compared against the canonical hash of
    the replayed state; the first divergence raises :class:`HashMismatch`.
    """
    state = initial_state
    expected_seq = 1
    for event in events:
        if event.seq != expected_seq:
            raise SeqGap(expected_seq, event.seq)
        expected_seq += 1
        state = apply_fn(state, event)
        if verify_hashes:
            computed = canonical_hash(state)
            if computed != event.state_hash_after:
                raise HashMismatch(event.seq, event.state_hash_after, computed)
    return state


# ---------------------------------------------------------------------------
# Pub/sub and group chat turn-taking
# ---------------------------------------------------------------------------

Subscriber = Callable[[str, str, dict[str, Any]], None]


class MessageBus:
    """Exact-topic pub/sub.  Delivery is synchronous and in subscribe order."""

    def __init__(self) -> None:
        self._subs: dict[str, list[Subscriber]] = {}

    def subscribe(self, topic: str, handler: Subscriber) -> None:
        self._subs.setdefault(topic, []).append(handler)

    def unsubscribe(self, topic: str, handler: Subscriber) -> None:
        handlers = self._subs.get(topic, [])
        if handler in handlers:
            handlers.remove(handler)

    def publish(self, topic: str, sender: str, payload: dict[str, Any]) -> int:
        """Deliver to current subscribers; returns the delivery count."""
        handlers = list(self._subs.get(topic, []))
        for handler in handlers:
            handler(topic, sender, payload)
        return len(handlers)


class OutOfTurn(DomainError):
    def __init__(self, sender: str, holder: str | None):
        self.sender, self.holder = sender, holder
        super().__init__(f"{sender} posted out of turn (floor holder: {holder})")


class NotEnrolled(DomainError):
    def __init__(self, sender: str):
        self.sender = sender
        super().__init__(f"{sender} is not enrolled in this chat")


class GroupChatManager:
    """Sequential turn-taking over one group chat topic.

    Speakers are granted the floor in FIFO order.  Only the current floor
    holder may post; a successful post passes the floor to the next queued
    speaker.  Posts from anyone else raise :class:`OutOfTurn` and leave the
    queue untouched, so a misbehaving agent cannot steal or burn a turn.
    """

    def __init__(self, run_id: str, participants: Iterable[str], bus: MessageBus | None = None):
        self.run_id = run_id
        self.topic = groupchat_topic(run_id)
        self._participants = set(participants)
        self._queue: deque[str] = deque()
        self._bus = bus or MessageBus()
        self._transcript: list[tuple[str, dict[str, Any]]] = []

    @property
    def participants(self) -> frozenset[str]:
        return frozenset(self._participants)

    @property
    def pending_turns(self) -> tuple[str, ...]:
        return tuple(self._queue)

    def enroll(self, role_id: str) -> None:
        self._participants.add(role_id)

    def grant_floor(self, role_id: str) -> None:
        """Queue a speaker.  The same speaker may hold several queued turns."""
        if role_id not in self._participants:
            raise NotEnrolled(role_id)
        self._queue.append(role_id)

    def select_next_speaker(self) -> str | None:
        """Who may post now; ``None`` when no turns are queued."""
        return self._queue[0] if self._queue else None

    def route_message(self, sender: str, payload: dict[str, Any]) -> int:
        """Post to the group chat as ``sender``.

        Enforces turn order: ``sender`` must hold the floor.  On success the
        message is delivered to every topic subscriber, recorded in the
        transcript, and the floor passes on.
        """
        if sender not in self._participants:
            raise NotEnrolled(sender)
        holder = self.select_next_speaker()
        if holder != sender:
            raise OutOfTurn(sender, holder)
        self._queue.popleft()
        self._transcript.append((sender, dict(payload)))
        return self._bus.publish(self.topic, sender, payload)

    def transcript(self) -> list[tuple[str, dict[str, Any]]]:
        return list(self._transcript)
