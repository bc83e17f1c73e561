"""Single-copy store-carry-forward routing policies.

All policies share custody semantics enforced by the engine: a completed
transfer moves the only copy from sender to receiver. A policy only answers
the question "should the carrier hand this message to this peer right now".
"""
from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .engine import Connection, Message, NodeState


class RoutingPolicy:
    """Forwarding decision interface."""

    name = "?"

    def decide(
        self,
        carrier: "NodeState",
        peer: "NodeState",
        msg: "Message",
        conn: "Connection",
    ) -> bool:
        raise NotImplementedError


class DirectDelivery(RoutingPolicy):
    """Hold the message until meeting its destination."""

    name = "direct_delivery"

    def decide(self, carrier, peer, msg, conn) -> bool:
        return peer.node_id == msg.destination


class FirstContact(RoutingPolicy):
    """Hand the message to the first peer that does not hold it.

    A peer that already relayed or held this message during the current
    connection session is not fresh, which stops two-node ping-pong while
    the pair stays in range.
    """

    name = "first_contact"

    def decide(self, carrier, peer, msg, conn) -> bool:
        if (msg.message_id, peer.node_id) in conn.history:
            return False
        return True


class ActivityFirstContact(RoutingPolicy):
    """Climb the activity gradient: forward only to strictly busier peers.

    The destination is always accepted regardless of its activity level.
    """

    name = "afc"

    def decide(self, carrier, peer, msg, conn) -> bool:
        if peer.node_id == msg.destination:
            return True
        return peer.activity > carrier.activity


POLICIES: dict[str, type[RoutingPolicy]] = {
    cls.name: cls
    for cls in (DirectDelivery, FirstContact, ActivityFirstContact)
}


def make_policy(name: str) -> RoutingPolicy:
    """Instantiate a policy by config name."""
    try:
        return POLICIES[name]()
    except KeyError:
        valid = ", ".join(sorted(POLICIES))
        raise ValueError(f"unknown routing policy {name!r} (valid: {valid})") from None


def select_transfer(
    policy: RoutingPolicy,
    carrier: "NodeState",
    peer: "NodeState",
    conn: "Connection",
    now: float,
) -> "Message | None":
    """Pick the message the carrier should offer the peer, oldest first.

    Skips messages already moving on another connection, expired messages,
    and messages the peer already holds. Returns None when nothing is
    eligible.
    """
    for msg in sorted(carrier.buffer.values(), key=lambda m: m.message_id):
        if msg.in_flight:
            continue
        if now > msg.expires_at:
            continue
        if msg.message_id in peer.buffer:
            continue
        if policy.decide(carrier, peer, msg, conn):
            return msg
    return None
