"""Map-constrained node movement.

Nodes pick a random map vertex, walk the shortest road path to it at a speed
drawn once per path, pause at the destination, and repeat. This module holds
the scalar single-node reference semantics; the simulation engine vectorizes
the identical update rule (same float64 expressions, same RNG draw order) so
both produce bit-identical trajectories.
"""
from __future__ import annotations

import bisect
import random
from .mapgraph import RoadGraph, shortest_path


class MobilityState:
    """Mutable kinematic state of one walking node."""

    __slots__ = (
        "x", "y",
        "leg_fx", "leg_fy", "leg_ux", "leg_uy", "leg_len", "leg_pos",
        "speed", "wait_until", "path", "leg_index", "current_vertex",
    )

    def __init__(self, x: float, y: float, vertex: int):
        self.x = x
        self.y = y
        self.leg_fx = x
        self.leg_fy = y
        self.leg_ux = 0.0
        self.leg_uy = 0.0
        self.leg_len = 0.0
        self.leg_pos = 0.0
        self.speed = 0.0
        self.wait_until = 0.0
        self.path: list[int] | None = None
        self.leg_index = 0
        self.current_vertex = vertex


def init_position(rng: random.Random, graph: RoadGraph) -> MobilityState:
    """Place a node on a uniformly random map vertex, ready to move at t=0."""
    vertex = rng.randrange(graph.vertex_count)
    x, y = graph.coords[vertex]
    return MobilityState(x, y, vertex)


def _load_leg(state: MobilityState, graph: RoadGraph) -> None:
    path = state.path
    assert path is not None
    u = path[state.leg_index]
    v = path[state.leg_index + 1]
    ux, uy = graph.coords[u]
    vx, vy = graph.coords[v]
    length = graph.edge_length(u, v)
    state.leg_fx = ux
    state.leg_fy = uy
    state.leg_ux = (vx - ux) / length
    state.leg_uy = (vy - uy) / length
    state.leg_len = length


def _begin_path(
    state: MobilityState,
    rng: random.Random,
    graph: RoadGraph,
    speed_range: tuple[float, float],
) -> None:
    # Draw order is part of the contract: destination first, then speed.
    dest = rng.randrange(graph.vertex_count)
    while dest == state.current_vertex:
        dest = rng.randrange(graph.vertex_count)
    path, _ = shortest_path(graph, state.current_vertex, dest)
    state.path = path
    state.leg_index = 0
    state.leg_pos = 0.0
    state.speed = rng.uniform(speed_range[0], speed_range[1])
    _load_leg(state, graph)


def _arrive(
    state: MobilityState,
    rng: random.Random,
    graph: RoadGraph,
    wait_range: tuple[float, float],
    now: float,
) -> None:
    assert state.path is not None
    vertex = state.path[-1]
    state.x, state.y = graph.coords[vertex]
    state.current_vertex = vertex
    state.path = None
    state.leg_index = 0
    state.leg_pos = 0.0
    state.leg_len = 0.0
    state.wait_until = now + rng.uniform(wait_range[0], wait_range[1])


def step(
    state: MobilityState,
    rng: random.Random,
    graph: RoadGraph,
    speed_range: tuple[float, float],
    wait_range: tuple[float, float],
    now: float,
    dt: float,
) -> None:
    """Advance one node by dt seconds, ending at time `now`.

    A node with no path waits until its pause expires, then draws a new
    destination and moves in the same step. Overshooting a leg carries the
    surplus into the next leg; overshooting the final leg snaps the node to
    the destination vertex exactly and discards the surplus. On a
    single-vertex map the node never moves.
    """
    if state.path is None:
        if now < state.wait_until or graph.vertex_count < 2:
            return
        _begin_path(state, rng, graph, speed_range)
    state.leg_pos += state.speed * dt
    while state.leg_pos > state.leg_len:
        if state.leg_index == len(state.path) - 2:
            _arrive(state, rng, graph, wait_range, now)
            return
        state.leg_pos -= state.leg_len
        state.leg_index += 1
        _load_leg(state, graph)
    state.x = state.leg_fx + state.leg_ux * state.leg_pos
    state.y = state.leg_fy + state.leg_uy * state.leg_pos


class ScriptedPath:
    """Piecewise-constant position script for choreographed test nodes.

    Keyframes are (time, x, y); the node holds each position until the next
    keyframe time, i.e. position(t) is the last keyframe with time <= t.
    """

    def __init__(self, keyframes: list[tuple[float, float, float]]):
        if not keyframes:
            raise ValueError("script needs at least one keyframe")
        times = [k[0] for k in keyframes]
        if times != sorted(times) or len(set(times)) != len(times):
            raise ValueError("keyframe times must be strictly increasing")
        if times[0] > 0.0:
            raise ValueError("first keyframe must be at time <= 0")
        self._times = times
        self._points = [(k[1], k[2]) for k in keyframes]

    def position(self, t: float) -> tuple[float, float]:
        idx = bisect.bisect_right(self._times, t) - 1
        return self._points[idx]
