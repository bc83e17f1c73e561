"""Shared world-building helpers for the test suite."""
from dtnsim.config import GroupSpec
from dtnsim.engine import World
from dtnsim.mapgraph import RoadGraph
from dtnsim.mobility import ScriptedPath


LINE = RoadGraph([(0.0, 0.0), (2000.0, 0.0)], [(0, 1)])


def stationary_world(xs, *, policy="direct_delivery", activities=None, **kw):
    """World of motionless scripted nodes at x positions on the y=0 line."""
    if activities is None:
        activities = [0.0] * len(xs)
    groups = [
        GroupSpec(f"g{i}", 1, (1.0, 1.0), (0.0, 0.0), act)
        for i, act in enumerate(activities)
    ]
    scripts = {i: ScriptedPath([(0.0, x, 0.0)]) for i, x in enumerate(xs)}
    return World(LINE, groups, policy=policy, seed=1, scripts=scripts, **kw)


def scripted_world(keyframes, *, policy="direct_delivery", activities=None, **kw):
    """World of scripted nodes; keyframes[i] is a list of (t, x) pairs."""
    if activities is None:
        activities = [0.0] * len(keyframes)
    groups = [
        GroupSpec(f"g{i}", 1, (1.0, 1.0), (0.0, 0.0), act)
        for i, act in enumerate(activities)
    ]
    scripts = {
        i: ScriptedPath([(t, x, 0.0) for t, x in frames])
        for i, frames in enumerate(keyframes)
    }
    return World(LINE, groups, policy=policy, seed=1, scripts=scripts, **kw)


def run_until(world, t):
    """Advance the world until its clock reaches t seconds."""
    while world.now < t - 1e-9:
        world.advance()


def events_of(world, *kinds):
    """The world's events, optionally filtered to the given kinds."""
    if not kinds:
        return list(world.events)
    return [e for e in world.events if e.kind in kinds]
