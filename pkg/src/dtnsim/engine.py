"""Time-stepped simulation core: contacts, transfers, buffers, TTL, events.

Each step advances in a fixed phase order: clock, mobility, contact
detection with routing callbacks, transfer progress, traffic, TTL expiry.
The clock is step_n * dt (multiplied, not accumulated) so event times stay
exact over long runs.

Mobility is the vectorized twin of the scalar rule in `mobility`: identical
float64 expressions and identical RNG draw order, so trajectories match the
reference bit for bit. Contact detection keeps an exact lazy re-check
schedule per node pair: a pair at distance d cannot come into range before
(d - range) / (2 * v_max * dt) steps, so distant pairs are skipped without
changing any result. The schedule is disabled when scripted nodes exist,
because scripts may jump arbitrarily far in one step.
"""
from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

import numpy as np

from . import events as ev
from . import mobility as mob
from .mapgraph import RoadGraph, shortest_path
from .mobility import ScriptedPath
from .routing import RoutingPolicy, make_policy, select_transfer
from .traffic import TrafficGenerator

# Far-future step index for pairs that can never meet (stationary worlds).
_NEVER = 2**62


def transfer_duration(size: int, bitrate: float) -> float:
    """Ideal transfer time in seconds for a message of `size` bytes."""
    if bitrate <= 0:
        raise ValueError("bitrate must be positive")
    if size < 0:
        raise ValueError("size must be non-negative")
    return size / bitrate


@dataclass
class Message:
    """A single-copy message; exactly one node holds custody while it lives."""

    message_id: int
    source: int
    destination: int
    size: int
    created_at: float
    ttl: float
    expires_at: float = field(init=False)
    hop_count: int = 0
    path_trail: list[int] = field(default_factory=list)
    in_flight: bool = False
    holder: int | None = None
    flight_key: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        self.expires_at = self.created_at + self.ttl
        if not self.path_trail:
            self.path_trail = [self.source]


@dataclass
class Transfer:
    """An in-progress copy over one connection."""

    msg: Message
    sender: int
    receiver: int
    rate: float
    bytes_remaining: float
    started_step: int
    started_at: float


@dataclass
class Connection:
    """A live bidirectional contact between two nodes (node_a < node_b)."""

    node_a: int
    node_b: int
    established_at: float
    transfer: Transfer | None = None
    # (msg_id, node_id) pairs that held the message during this session;
    # cleared when the contact breaks. Stops ping-pong within one session.
    history: set[tuple[int, int]] = field(default_factory=set)

    @property
    def key(self) -> tuple[int, int]:
        return (self.node_a, self.node_b)

    def other(self, node_id: int) -> int:
        return self.node_b if node_id == self.node_a else self.node_a


class NodeState:
    """Identity, radio, and buffer of one node."""

    __slots__ = (
        "node_id", "group", "activity", "range", "bitrate",
        "buffer", "buffer_bytes",
    )

    def __init__(
        self, node_id: int, group: str, activity: float,
        radio_range: float, bitrate: float,
    ):
        self.node_id = node_id
        self.group = group
        self.activity = activity
        self.range = radio_range
        self.bitrate = bitrate
        self.buffer: dict[int, Message] = {}
        self.buffer_bytes = 0


def pairwise_in_range(
    px: np.ndarray, py: np.ndarray, ranges: np.ndarray
) -> np.ndarray:
    """Boolean contact matrix: distance <= min of the two ranges, inclusive.

    The diagonal is False. Used by tests as the brute-force reference for
    the engine's incremental detection.
    """
    dx = px[:, None] - px[None, :]
    dy = py[:, None] - py[None, :]
    d2 = dx * dx + dy * dy
    thresh = np.minimum(ranges[:, None], ranges[None, :])
    mat = d2 <= thresh * thresh
    np.fill_diagonal(mat, False)
    return mat


class World:
    """Complete simulation state plus the step loop."""

    def __init__(
        self,
        graph: RoadGraph,
        groups,
        *,
        policy: str | RoutingPolicy,
        seed: int,
        dt: float = 0.1,
        interface_range: float = 10.0,
        bitrate: float = 250_000.0,
        traffic=None,
        buffer_capacity: int = 0,
        scripts: dict[int, ScriptedPath] | None = None,
        full_scan: bool = False,
    ):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if interface_range <= 0:
            raise ValueError("interface range must be positive")
        if bitrate <= 0:
            raise ValueError("bitrate must be positive")
        if buffer_capacity < 0:
            raise ValueError("buffer capacity must be >= 0")
        if not groups:
            raise ValueError("need at least one node group")

        self.graph = graph
        self.dt = float(dt)
        self.step_n = 0
        self.now = 0.0
        self.seed = seed
        self._policy = policy if isinstance(policy, RoutingPolicy) else make_policy(policy)
        self._capacity = int(buffer_capacity)
        self.events: list[ev.Event] = []

        # --- nodes and groups -----------------------------------------
        self.nodes: list[NodeState] = []
        self.group_ranges: dict[str, tuple[int, int]] = {}
        self._speed_lo: list[float] = []
        self._speed_hi: list[float] = []
        self._wait_lo: list[float] = []
        self._wait_hi: list[float] = []
        vmax = 0.0
        for g in groups:
            if g.hosts < 1:
                raise ValueError(f"group {g.name!r} needs at least one host")
            if g.name in self.group_ranges:
                raise ValueError(f"duplicate group name {g.name!r}")
            start = len(self.nodes)
            for _ in range(g.hosts):
                nid = len(self.nodes)
                self.nodes.append(NodeState(
                    nid, g.name, float(g.activity),
                    float(interface_range), float(bitrate),
                ))
                self._speed_lo.append(float(g.speed[0]))
                self._speed_hi.append(float(g.speed[1]))
                self._wait_lo.append(float(g.wait[0]))
                self._wait_hi.append(float(g.wait[1]))
            self.group_ranges[g.name] = (start, len(self.nodes))
            vmax = max(vmax, float(g.speed[1]))
        n = len(self.nodes)
        if n < 1:
            raise ValueError("empty world")

        self._scripts: dict[int, ScriptedPath] = dict(scripts or {})
        for nid in self._scripts:
            if not (0 <= nid < n):
                raise ValueError(f"script for unknown node {nid}")
        self._script_items = sorted(self._scripts.items())

        # --- RNG layout: per-node child seeds in id order, then traffic –
        master = random.Random(seed)
        node_seeds = [master.getrandbits(64) for _ in range(n)]
        traffic_seed = master.getrandbits(64)
        self._rngs = [random.Random(s) for s in node_seeds]

        # --- mobility arrays -------------------------------------------
        self._px = np.zeros(n)
        self._py = np.zeros(n)
        self._leg_fx = np.zeros(n)
        self._leg_fy = np.zeros(n)
        self._leg_ux = np.zeros(n)
        self._leg_uy = np.zeros(n)
        self._leg_len = np.zeros(n)
        self._leg_pos = np.zeros(n)
        self._speed = np.zeros(n)
        self._wait_until = np.zeros(n)
        self._has_path = np.zeros(n, dtype=bool)
        self._paths: list[list[int] | None] = [None] * n
        self._leg_index = [0] * n
        self._cur_vertex = [0] * n
        self._walker = np.ones(n, dtype=bool)
        for i in range(n):
            if i in self._scripts:
                self._walker[i] = False
                x, y = self._scripts[i].position(0.0)
                self._px[i] = x
                self._py[i] = y
                self._wait_until[i] = np.inf
            else:
                st = mob.init_position(self._rngs[i], graph)
                self._px[i] = st.x
                self._py[i] = st.y
                self._cur_vertex[i] = st.current_vertex
        if graph.vertex_count < 2:
            self._walker[:] = False

        # --- contact detection -----------------------------------------
        self._iu, self._ju = np.triu_indices(n, k=1)
        ranges = np.array([node.range for node in self.nodes])
        pair_range = np.minimum(ranges[self._iu], ranges[self._ju])
        self._range_pair = pair_range
        self._thresh2 = pair_range * pair_range
        self._adj = np.zeros(len(self._iu), dtype=bool)
        self._next_check = np.zeros(len(self._iu), dtype=np.int64)
        closing = 2.0 * vmax * self.dt
        self._lazy = not full_scan and not self._scripts and closing > 0.0
        # Without the lazy schedule, pairs re-check every step unless the
        # world is provably static (no scripts, zero max speed, no override).
        self._rescan = bool(full_scan or self._scripts)
        self._inv_closing = 1.0 / closing if closing > 0.0 else 0.0

        # --- messages, connections, transfers ---------------------------
        self._live: dict[int, Message] = {}
        self._expiry: list[tuple[float, int]] = []
        self._next_msg_id = 0
        self._connections: dict[tuple[int, int], Connection] = {}
        self._node_conns: list[set[tuple[int, int]]] = [set() for _ in range(n)]
        self._busy: set[tuple[int, int]] = set()

        self._traffic: TrafficGenerator | None = None
        self.traffic_ttl = 0.0
        if traffic is not None:
            sources = traffic.sources
            dests = traffic.destinations
            if traffic.mode == "fixed_source":
                if traffic.source_group is None:
                    raise ValueError("fixed_source traffic needs a source group")
                if sources is not None:
                    raise ValueError(
                        "fixed_source traffic derives sources from the group; "
                        "remove the explicit source range"
                    )
                if traffic.source_group not in self.group_ranges:
                    raise ValueError(
                        f"unknown traffic source group {traffic.source_group!r}"
                    )
                lo, hi = self.group_ranges[traffic.source_group]
                sources = (lo, hi - 1)
            elif traffic.mode != "uniform":
                raise ValueError(f"unknown traffic mode {traffic.mode!r}")
            if sources is None:
                sources = (0, n - 1)
            if dests is None:
                dests = (0, n - 1)
            for lo, hi in (sources, dests):
                if not (0 <= lo <= hi < n):
                    raise ValueError(f"node pool ({lo}, {hi}) out of range")
            self._traffic = TrafficGenerator(
                random.Random(traffic_seed),
                tuple(traffic.interval),
                tuple(traffic.size),
                float(traffic.ttl),
                tuple(sources),
                tuple(dests),
            )
            self.traffic_ttl = float(traffic.ttl)

        # Initial contact pass at t = 0.
        self._detect()

    # --- public API ------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def position_of(self, node_id: int) -> tuple[float, float]:
        return float(self._px[node_id]), float(self._py[node_id])

    def current_contacts(self) -> list[tuple[int, int]]:
        return sorted(self._connections)

    def advance(self) -> None:
        """Advance one step of dt seconds through the fixed phase order."""
        self.step_n += 1
        self.now = self.step_n * self.dt
        self._step_mobility()
        self._detect()
        if self._busy:
            self._progress_transfers()
        if self._traffic is not None:
            self._poll_traffic()
        self._expire()

    def run(self, until: float, *, audit: bool = False) -> int:
        """Advance until the clock reaches `until` seconds.

        With audit=True, recount custody from the buffers after every step;
        returns the total number of single-copy violations observed (0 for
        a correct run).
        """
        target = round(until / self.dt)
        violations = 0
        while self.step_n < target:
            self.advance()
            if audit:
                violations += self.audit_custody()
        return violations

    def create_message(
        self, source: int, destination: int, size: int, ttl: float
    ) -> Message:
        """Inject a message at its source node and offer it immediately."""
        n = len(self.nodes)
        if not (0 <= source < n and 0 <= destination < n):
            raise ValueError("unknown source or destination node")
        if source == destination:
            raise ValueError("source and destination must differ")
        if size <= 0:
            raise ValueError("message size must be positive")
        if ttl <= 0:
            raise ValueError("ttl must be positive")
        mid = self._next_msg_id
        self._next_msg_id += 1
        msg = Message(mid, source, destination, int(size), self.now, float(ttl))
        self._live[mid] = msg
        msg.holder = source
        node = self.nodes[source]
        node.buffer[mid] = msg
        node.buffer_bytes += msg.size
        heapq.heappush(self._expiry, (msg.expires_at, mid))
        self._emit(ev.CREATED, mid, source, destination, msg.size)
        self._enforce_capacity(node)
        if mid in node.buffer:
            self._trigger_node(source)
        return msg

    def start_transfer(self, conn: Connection, sender_id: int, msg: Message) -> bool:
        """Begin copying msg over conn; False if preconditions fail."""
        if conn.transfer is not None:
            return False
        receiver_id = conn.other(sender_id)
        sender = self.nodes[sender_id]
        if msg.message_id not in sender.buffer:
            return False
        if msg.in_flight:
            return False
        if self.now > msg.expires_at:
            return False
        if msg.message_id in self.nodes[receiver_id].buffer:
            return False
        rate = min(sender.bitrate, self.nodes[receiver_id].bitrate)
        conn.transfer = Transfer(
            msg=msg,
            sender=sender_id,
            receiver=receiver_id,
            rate=rate,
            bytes_remaining=float(msg.size),
            started_step=self.step_n,
            started_at=self.now,
        )
        msg.in_flight = True
        msg.flight_key = conn.key
        self._busy.add(conn.key)
        self._emit(ev.TRANSFER_STARTED, msg.message_id, sender_id, receiver_id, msg.size)
        return True

    def audit_custody(self) -> int:
        """Recount custody from node buffers, independent of engine state.

        Returns the number of violations: live messages whose copy count is
        not exactly 1, plus buffered copies of messages no longer live.
        """
        counts: dict[int, int] = {}
        for node in self.nodes:
            for mid in node.buffer:
                counts[mid] = counts.get(mid, 0) + 1
        violations = 0
        for mid in self._live:
            if counts.get(mid, 0) != 1:
                violations += 1
        for mid in counts:
            if mid not in self._live:
                violations += 1
        return violations

    # --- phase 2: mobility -------------------------------------------------

    def _step_mobility(self) -> None:
        now = self.now
        for i, script in self._script_items:
            x, y = script.position(now)
            self._px[i] = x
            self._py[i] = y
        due = (~self._has_path) & (self._wait_until <= now) & self._walker
        if due.any():
            for i in np.nonzero(due)[0]:
                self._begin_path(int(i))
        moving = self._has_path
        self._leg_pos += np.where(moving, self._speed * self.dt, 0.0)
        crossed = moving & (self._leg_pos > self._leg_len)
        if crossed.any():
            for i in np.nonzero(crossed)[0]:
                self._cross(int(i))
            moving = self._has_path
        self._px = np.where(
            moving, self._leg_fx + self._leg_ux * self._leg_pos, self._px
        )
        self._py = np.where(
            moving, self._leg_fy + self._leg_uy * self._leg_pos, self._py
        )

    def _begin_path(self, i: int) -> None:
        rng = self._rngs[i]
        cur = self._cur_vertex[i]
        count = self.graph.vertex_count
        dest = rng.randrange(count)
        while dest == cur:
            dest = rng.randrange(count)
        path, _ = shortest_path(self.graph, cur, dest)
        self._paths[i] = path
        self._leg_index[i] = 0
        self._leg_pos[i] = 0.0
        self._speed[i] = rng.uniform(self._speed_lo[i], self._speed_hi[i])
        self._has_path[i] = True
        self._load_leg(i)

    def _load_leg(self, i: int) -> None:
        path = self._paths[i]
        k = self._leg_index[i]
        u, v = path[k], path[k + 1]
        ux, uy = self.graph.coords[u]
        vx, vy = self.graph.coords[v]
        length = self.graph.edge_length(u, v)
        self._leg_fx[i] = ux
        self._leg_fy[i] = uy
        self._leg_ux[i] = (vx - ux) / length
        self._leg_uy[i] = (vy - uy) / length
        self._leg_len[i] = length

    def _cross(self, i: int) -> None:
        while self._leg_pos[i] > self._leg_len[i]:
            path = self._paths[i]
            if self._leg_index[i] == len(path) - 2:
                vertex = path[-1]
                x, y = self.graph.coords[vertex]
                self._px[i] = x
                self._py[i] = y
                self._cur_vertex[i] = vertex
                self._paths[i] = None
                self._has_path[i] = False
                self._leg_pos[i] = 0.0
                self._leg_len[i] = 0.0
                rng = self._rngs[i]
                self._wait_until[i] = self.now + rng.uniform(
                    self._wait_lo[i], self._wait_hi[i]
                )
                return
            self._leg_pos[i] -= self._leg_len[i]
            self._leg_index[i] += 1
            self._load_leg(i)

    # --- phase 3: contact detection ------------------------------------------

    def _detect(self) -> None:
        step = self.step_n
        due = self._next_check <= step
        idx = np.nonzero(due)[0]
        if idx.size == 0:
            return
        ii = self._iu[idx]
        jj = self._ju[idx]
        dx = self._px[ii] - self._px[jj]
        dy = self._py[ii] - self._py[jj]
        d2 = dx * dx + dy * dy
        inr = d2 <= self._thresh2[idx]
        prev = self._adj[idx]
        self._adj[idx] = inr
        if self._lazy:
            nxt = np.empty(idx.size, dtype=np.int64)
            nxt[inr] = step + 1
            out = ~inr
            if out.any():
                gap = np.sqrt(d2[out]) - self._range_pair[idx[out]]
                k = (gap * self._inv_closing).astype(np.int64)
                nxt[out] = step + np.maximum(k, 1)
            self._next_check[idx] = nxt
        else:
            self._next_check[idx] = step + 1 if self._rescan else _NEVER
        changed = inr != prev
        if not changed.any():
            return
        ch = idx[changed]
        ch_in = inr[changed]
        for p in ch[~ch_in]:
            self._drop_connection(int(self._iu[p]), int(self._ju[p]))
        for p in ch[ch_in]:
            self._open_connection(int(self._iu[p]), int(self._ju[p]))

    def _open_connection(self, a: int, b: int) -> None:
        key = (a, b)
        conn = Connection(a, b, self.now)
        self._connections[key] = conn
        self._node_conns[a].add(key)
        self._node_conns[b].add(key)
        self._evaluate(conn)

    def _drop_connection(self, a: int, b: int) -> None:
        key = (a, b)
        conn = self._connections.pop(key)
        self._node_conns[a].discard(key)
        self._node_conns[b].discard(key)
        if conn.transfer is not None:
            sender = conn.transfer.sender
            self._abort(conn)
            # The freed message may flow over the sender's other contacts.
            self._trigger_node(sender)

    # --- routing callbacks ----------------------------------------------------

    def _evaluate(self, conn: Connection) -> None:
        """Grant the connection's one transfer slot to the best direction.

        Each direction nominates its oldest eligible message; a nomination
        that delivers to its destination outranks a relay, and ties go to
        the lower sender id. Deliveries never queue behind relay handovers
        moving the other way through a short contact.
        """
        if conn.transfer is not None:
            return
        best: tuple[tuple[bool, int], int, Message] | None = None
        for sender, receiver in ((conn.node_a, conn.node_b), (conn.node_b, conn.node_a)):
            msg = select_transfer(
                self._policy, self.nodes[sender], self.nodes[receiver], conn, self.now
            )
            if msg is None:
                continue
            rank = (msg.destination != receiver, sender)
            if best is None or rank < best[0]:
                best = (rank, sender, msg)
        if best is not None:
            self.start_transfer(conn, best[1], best[2])

    def _trigger_node(self, node_id: int) -> None:
        for key in sorted(self._node_conns[node_id]):
            conn = self._connections[key]
            if conn.transfer is None:
                self._evaluate(conn)

    # --- phase 4: transfer progress -------------------------------------------

    def _progress_transfers(self) -> None:
        for key in sorted(self._busy):
            conn = self._connections.get(key)
            if conn is None or conn.transfer is None:
                continue
            tr = conn.transfer
            if tr.started_step == self.step_n:
                continue
            tr.bytes_remaining -= tr.rate * self.dt
            if tr.bytes_remaining <= 0.0:
                self._complete(conn)

    def _abort(self, conn: Connection) -> None:
        tr = conn.transfer
        conn.transfer = None
        self._busy.discard(conn.key)
        tr.msg.in_flight = False
        tr.msg.flight_key = None
        self._emit(
            ev.TRANSFER_ABORTED, tr.msg.message_id, tr.sender, tr.receiver, tr.msg.size
        )

    def _complete(self, conn: Connection) -> None:
        tr = conn.transfer
        msg = tr.msg
        conn.transfer = None
        self._busy.discard(conn.key)
        msg.in_flight = False
        msg.flight_key = None
        if self.now > msg.expires_at:
            # Deadline passed while the last bytes were moving: never
            # deliver late. Phase 6 records the expiry this same step.
            self._emit(
                ev.TRANSFER_ABORTED, msg.message_id, tr.sender, tr.receiver, msg.size
            )
            return
        sender = self.nodes[tr.sender]
        del sender.buffer[msg.message_id]
        sender.buffer_bytes -= msg.size
        msg.hop_count += 1
        msg.path_trail.append(tr.receiver)
        conn.history.add((msg.message_id, tr.sender))
        conn.history.add((msg.message_id, tr.receiver))
        self._emit(
            ev.TRANSFER_COMPLETED, msg.message_id, tr.sender, tr.receiver, msg.size
        )
        if tr.receiver == msg.destination:
            del self._live[msg.message_id]
            msg.holder = None
            self._emit(
                ev.DELIVERED, msg.message_id, msg.destination, msg.source, msg.size
            )
        else:
            receiver = self.nodes[tr.receiver]
            receiver.buffer[msg.message_id] = msg
            receiver.buffer_bytes += msg.size
            msg.holder = tr.receiver
            self._enforce_capacity(receiver)
            if msg.message_id in receiver.buffer:
                self._trigger_node(tr.receiver)
        self._evaluate(conn)

    def _enforce_capacity(self, node: NodeState) -> None:
        if self._capacity <= 0:
            return
        while node.buffer_bytes > self._capacity:
            victims = [m for m in node.buffer.values() if not m.in_flight]
            if not victims:
                return
            victim = min(victims, key=lambda m: m.message_id)
            del node.buffer[victim.message_id]
            node.buffer_bytes -= victim.size
            del self._live[victim.message_id]
            victim.holder = None
            self._emit(
                ev.DROPPED, victim.message_id, node.node_id, ev.NO_NODE, victim.size
            )

    # --- phase 5: traffic --------------------------------------------------------

    def _poll_traffic(self) -> None:
        while True:
            spec = self._traffic.next_message(self.now)
            if spec is None:
                return
            source, dest, size = spec
            self.create_message(source, dest, size, self._traffic.ttl)

    # --- phase 6: TTL expiry --------------------------------------------------------

    def _expire(self) -> None:
        heap = self._expiry
        while heap and heap[0][0] < self.now:
            _, mid = heapq.heappop(heap)
            msg = self._live.get(mid)
            if msg is None:
                continue
            if msg.in_flight:
                conn = self._connections[msg.flight_key]
                self._abort(conn)
                self._evaluate(conn)
            holder = self.nodes[msg.holder]
            del holder.buffer[mid]
            holder.buffer_bytes -= msg.size
            del self._live[mid]
            self._emit(ev.EXPIRED, mid, holder.node_id, ev.NO_NODE, msg.size)
            msg.holder = None

    # --- internals --------------------------------------------------------------

    def _emit(self, kind: str, msg_id: int, node_a: int, node_b: int, size: int) -> None:
        self.events.append(ev.Event(self.now, kind, msg_id, node_a, node_b, size))
