"""Per-message event records and their tab-separated on-disk form."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

CREATED = "created"
TRANSFER_STARTED = "transfer_started"
TRANSFER_ABORTED = "transfer_aborted"
TRANSFER_COMPLETED = "transfer_completed"
DELIVERED = "delivered"
EXPIRED = "expired"
DROPPED = "dropped"

KINDS = frozenset({
    CREATED,
    TRANSFER_STARTED,
    TRANSFER_ABORTED,
    TRANSFER_COMPLETED,
    DELIVERED,
    EXPIRED,
    DROPPED,
})

# node_a is the acting node (source, sender, custodian); node_b is the peer
# (destination, receiver) or NO_NODE when the event involves a single node.
NO_NODE = -1

_HEADER = "# time\tkind\tmsg\tnode_a\tnode_b\tsize"


@dataclass(frozen=True)
class Event:
    """One simulation event."""

    time: float
    kind: str
    msg_id: int
    node_a: int
    node_b: int
    size: int


class EventLogError(ValueError):
    """Raised when an event log file cannot be parsed; carries the record index."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"event record {index}: {reason}")
        self.index = index


def format_event(event: Event) -> str:
    """Render one event as a tab-separated line.

    The timestamp uses repr() so it round-trips to the identical float.
    """
    return "\t".join((
        repr(event.time),
        event.kind,
        str(event.msg_id),
        str(event.node_a),
        str(event.node_b),
        str(event.size),
    ))


def write_event_log(events: list[Event], path: str | Path) -> None:
    """Write events to a tab-separated file with a comment header."""
    lines = [_HEADER]
    lines.extend(format_event(e) for e in events)
    Path(path).write_text("\n".join(lines) + "\n")


def read_event_log(path: str | Path) -> list[Event]:
    """Parse an event log written by write_event_log.

    Raises EventLogError with the 0-based record index on malformed input.
    """
    events: list[Event] = []
    index = 0
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise EventLogError(index, f"expected 6 fields, got {len(parts)}")
        try:
            event = Event(
                time=float(parts[0]),
                kind=parts[1],
                msg_id=int(parts[2]),
                node_a=int(parts[3]),
                node_b=int(parts[4]),
                size=int(parts[5]),
            )
        except ValueError as exc:
            raise EventLogError(index, str(exc)) from exc
        if event.kind not in KINDS:
            raise EventLogError(index, f"unknown event kind {event.kind!r}")
        events.append(event)
        index += 1
    return events
