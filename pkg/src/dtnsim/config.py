"""Scenario configuration: a flat key = value dialect with group sections.

The format is line-oriented: `Section.key = value`, blank lines and `#`
comments ignored. Node groups use a numbered prefix (`Group1.`, `Group2.`,
...); every other key is global. Unknown keys are rejected rather than
ignored so typos cannot silently change a scenario. Keys left at their
defaults are tracked so reports can show what was assumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .routing import POLICIES


class ConfigError(ValueError):
    """Raised for unknown keys, bad values, or inconsistent scenarios."""


@dataclass(frozen=True)
class GroupSpec:
    """One homogeneous population of nodes."""

    name: str
    hosts: int
    speed: tuple[float, float]
    wait: tuple[float, float]
    activity: float


@dataclass(frozen=True)
class TrafficSpec:
    """Workload description consumed by the engine."""

    interval: tuple[float, float]
    size: tuple[int, int]
    ttl: float
    mode: str = "uniform"
    sources: tuple[int, int] | None = None
    destinations: tuple[int, int] | None = None
    source_group: str | None = None


@dataclass
class ScenarioConfig:
    """Complete, validated scenario description."""

    duration: float
    dt: float
    seed: int
    world_size: tuple[float, float]
    map_type: str
    grid_rows: int
    grid_cols: int
    grid_spacing: float
    map_file: str | None
    interface_range: float
    bitrate: int
    groups: list[GroupSpec]
    traffic: TrafficSpec
    policy: str
    buffer_capacity: int
    warmup: float
    # Keys that fell back to defaults during parsing; informational only.
    defaulted: list[str] = field(default_factory=list, compare=False)

    @property
    def total_hosts(self) -> int:
        return sum(g.hosts for g in self.groups)


# Each entry: canonical key -> (parser, default). A default of _REQUIRED
# means the key must appear (possibly only in certain modes, validated
# later). Group keys are listed without their number prefix.


def _parse_float(raw: str) -> float:
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _parse_int(raw: str) -> int:
    return int(raw, 10)


def _parse_str(raw: str) -> str:
    return raw


def _parse_float_pair(raw: str) -> tuple[float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ValueError("expected 'min, max'")
    return (_parse_float(parts[0]), _parse_float(parts[1]))


def _parse_int_pair(raw: str) -> tuple[int, int]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ValueError("expected 'min, max'")
    return (_parse_int(parts[0]), _parse_int(parts[1]))


_REQUIRED = object()

_GLOBAL_KEYS = {
    "Scenario.duration": (_parse_float, 43_200.0),
    "Scenario.dt": (_parse_float, 0.1),
    "Scenario.seed": (_parse_int, 1),
    "Scenario.worldSize": (_parse_float_pair, (4500.0, 4500.0)),
    "Map.type": (_parse_str, "grid"),
    "Map.gridRows": (_parse_int, 10),
    "Map.gridCols": (_parse_int, 10),
    "Map.gridSpacing": (_parse_float, 500.0),
    "Map.file": (_parse_str, None),
    "Interface.range": (_parse_float, 10.0),
    "Interface.bitrate": (_parse_int, 250_000),
    "Traffic.interval": (_parse_float_pair, (25.0, 35.0)),
    "Traffic.size": (_parse_int_pair, (500_000, 1_000_000)),
    "Traffic.ttl": (_parse_float, 18_000.0),
    "Traffic.mode": (_parse_str, "uniform"),
    "Traffic.sources": (_parse_int_pair, None),
    "Traffic.destinations": (_parse_int_pair, None),
    "Traffic.sourceGroup": (_parse_str, None),
    "Routing.policy": (_parse_str, "afc"),
    "Buffer.capacity": (_parse_int, 0),
    "Report.warmup": (_parse_float, 0.0),
}

_GROUP_KEYS = {
    "name": (_parse_str, None),
    "nrofHosts": (_parse_int, _REQUIRED),
    "speed": (_parse_float_pair, (0.5, 1.5)),
    "wait": (_parse_float_pair, (0.0, 0.0)),
    "activity": (_parse_float, 0.0),
}


def _check_range(key: str, pair: tuple[float, float], *, low: float) -> None:
    if pair[0] < low or pair[0] > pair[1]:
        raise ConfigError(
            f"{key}: range must satisfy {low} <= min <= max, got {pair}"
        )


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario; raises ConfigError on any problem."""
    globals_seen: dict[str, object] = {}
    groups_seen: dict[int, dict[str, object]] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {line_no}: expected 'key = value'")

        group_no: int | None = None
        group_field: str | None = None
        if key.startswith("Group"):
            prefix, dot, rest = key.partition(".")
            digits = prefix[len("Group"):]
            if dot and digits.isdigit():
                group_no = int(digits)
                group_field = rest
        if group_no is not None:
            if group_no < 1:
                raise ConfigError(f"line {line_no}: group numbers start at 1")
            if group_field not in _GROUP_KEYS:
                raise ConfigError(f"line {line_no}: unknown key {key!r}")
            parser, _ = _GROUP_KEYS[group_field]
            bucket = groups_seen.setdefault(group_no, {})
            if group_field in bucket:
                raise ConfigError(f"line {line_no}: duplicate key {key!r}")
            try:
                bucket[group_field] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"line {line_no}: {key}: {exc}") from None
        else:
            if key not in _GLOBAL_KEYS:
                raise ConfigError(f"line {line_no}: unknown key {key!r}")
            if key in globals_seen:
                raise ConfigError(f"line {line_no}: duplicate key {key!r}")
            parser, _ = _GLOBAL_KEYS[key]
            try:
                globals_seen[key] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"line {line_no}: {key}: {exc}") from None

    defaulted: list[str] = []

    def use(key: str):
        if key in globals_seen:
            return globals_seen[key]
        _, default = _GLOBAL_KEYS[key]
        defaulted.append(key)
        return default

    # --- groups ---------------------------------------------------------
    if not groups_seen:
        raise ConfigError("at least one group (Group1.nrofHosts) is required")
    numbers = sorted(groups_seen)
    if numbers != list(range(1, len(numbers) + 1)):
        raise ConfigError(
            f"group numbers must be consecutive from 1, got {numbers}"
        )
    groups: list[GroupSpec] = []
    names_seen: set[str] = set()
    for number in numbers:
        bucket = groups_seen[number]
        if "nrofHosts" not in bucket:
            raise ConfigError(f"Group{number}.nrofHosts is required")
        hosts = bucket["nrofHosts"]
        if hosts < 1:
            raise ConfigError(f"Group{number}.nrofHosts must be >= 1")
        name = bucket.get("name", f"group{number}")
        if "name" not in bucket:
            defaulted.append(f"Group{number}.name")
        if name in names_seen:
            raise ConfigError(f"duplicate group name {name!r}")
        names_seen.add(name)
        speed = bucket.get("speed")
        if speed is None:
            defaulted.append(f"Group{number}.speed")
            speed = _GROUP_KEYS["speed"][1]
        if speed[0] <= 0 or speed[0] > speed[1]:
            raise ConfigError(
                f"Group{number}.speed: range must satisfy 0 < min <= max"
            )
        wait = bucket.get("wait")
        if wait is None:
            defaulted.append(f"Group{number}.wait")
            wait = _GROUP_KEYS["wait"][1]
        _check_range(f"Group{number}.wait", wait, low=0.0)
        activity = bucket.get("activity")
        if activity is None:
            defaulted.append(f"Group{number}.activity")
            activity = _GROUP_KEYS["activity"][1]
        groups.append(GroupSpec(name, hosts, speed, wait, float(activity)))
    total = sum(g.hosts for g in groups)
    if total < 2:
        raise ConfigError("scenario needs at least 2 nodes")

    # --- scenario globals ----------------------------------------------
    duration = use("Scenario.duration")
    if duration <= 0:
        raise ConfigError("Scenario.duration must be positive")
    dt = use("Scenario.dt")
    if dt <= 0:
        raise ConfigError("Scenario.dt must be positive")
    seed = use("Scenario.seed")
    world_size = use("Scenario.worldSize")
    if world_size[0] <= 0 or world_size[1] <= 0:
        raise ConfigError("Scenario.worldSize must be positive")

    map_type = use("Map.type")
    if map_type not in ("grid", "file"):
        raise ConfigError(f"Map.type must be 'grid' or 'file', got {map_type!r}")
    map_file = None
    grid_rows = _GLOBAL_KEYS["Map.gridRows"][1]
    grid_cols = _GLOBAL_KEYS["Map.gridCols"][1]
    grid_spacing = _GLOBAL_KEYS["Map.gridSpacing"][1]
    if map_type == "grid":
        for bad in ("Map.file",):
            if bad in globals_seen:
                raise ConfigError(f"{bad} is only valid with Map.type = file")
        grid_rows = use("Map.gridRows")
        grid_cols = use("Map.gridCols")
        grid_spacing = use("Map.gridSpacing")
        if grid_rows < 2 or grid_cols < 2:
            raise ConfigError("grid needs at least 2 rows and 2 cols")
        if grid_spacing <= 0:
            raise ConfigError("Map.gridSpacing must be positive")
    else:
        for bad in ("Map.gridRows", "Map.gridCols", "Map.gridSpacing"):
            if bad in globals_seen:
                raise ConfigError(f"{bad} is only valid with Map.type = grid")
        if "Map.file" not in globals_seen:
            raise ConfigError("Map.file is required when Map.type = file")
        map_file = globals_seen["Map.file"]

    interface_range = use("Interface.range")
    if interface_range <= 0:
        raise ConfigError("Interface.range must be positive")
    bitrate = use("Interface.bitrate")
    if bitrate <= 0:
        raise ConfigError("Interface.bitrate must be positive")

    interval = use("Traffic.interval")
    if interval[0] <= 0 or interval[0] > interval[1]:
        raise ConfigError("Traffic.interval: range must satisfy 0 < min <= max")
    size = use("Traffic.size")
    if size[0] <= 0 or size[0] > size[1]:
        raise ConfigError("Traffic.size: range must satisfy 0 < min <= max")
    ttl = use("Traffic.ttl")
    if ttl <= 0:
        raise ConfigError("Traffic.ttl must be positive")
    mode = use("Traffic.mode")
    if mode not in ("uniform", "fixed_source"):
        raise ConfigError(
            f"Traffic.mode must be 'uniform' or 'fixed_source', got {mode!r}"
        )
    sources = globals_seen.get("Traffic.sources")
    destinations = globals_seen.get("Traffic.destinations")
    source_group = globals_seen.get("Traffic.sourceGroup")
    if mode == "fixed_source":
        if source_group is None:
            raise ConfigError(
                "Traffic.sourceGroup is required when Traffic.mode = fixed_source"
            )
        if source_group not in names_seen:
            raise ConfigError(f"unknown Traffic.sourceGroup {source_group!r}")
        if sources is not None:
            raise ConfigError(
                "Traffic.sources conflicts with fixed_source mode; "
                "the source group already defines the pool"
            )
    else:
        if source_group is not None:
            raise ConfigError(
                "Traffic.sourceGroup is only valid with Traffic.mode = fixed_source"
            )
    for label, pool in (("Traffic.sources", sources), ("Traffic.destinations", destinations)):
        if pool is not None and not (0 <= pool[0] <= pool[1] < total):
            raise ConfigError(
                f"{label}: node pool {pool} outside 0..{total - 1}"
            )
    if (
        sources is not None
        and destinations is not None
        and sources[0] == sources[1] == destinations[0] == destinations[1]
    ):
        raise ConfigError(
            "source and destination pools are the same single node"
        )
    traffic = TrafficSpec(
        interval=interval,
        size=size,
        ttl=ttl,
        mode=mode,
        sources=sources,
        destinations=destinations,
        source_group=source_group,
    )

    policy = use("Routing.policy")
    if policy not in POLICIES:
        valid = ", ".join(sorted(POLICIES))
        raise ConfigError(f"Routing.policy must be one of: {valid}")
    buffer_capacity = use("Buffer.capacity")
    if buffer_capacity < 0:
        raise ConfigError("Buffer.capacity must be >= 0 (0 = unbounded)")
    warmup = use("Report.warmup")
    if warmup < 0:
        raise ConfigError("Report.warmup must be >= 0")
    if warmup >= duration:
        raise ConfigError("Report.warmup must be shorter than the run")

    return ScenarioConfig(
        duration=duration,
        dt=dt,
        seed=seed,
        world_size=world_size,
        map_type=map_type,
        grid_rows=grid_rows,
        grid_cols=grid_cols,
        grid_spacing=grid_spacing,
        map_file=map_file,
        interface_range=interface_range,
        bitrate=bitrate,
        groups=groups,
        traffic=traffic,
        policy=policy,
        buffer_capacity=buffer_capacity,
        warmup=warmup,
        defaulted=sorted(defaulted),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse a scenario file from disk."""
    return parse_config(Path(path).read_text())


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return f"{_fmt(value[0])}, {_fmt(value[1])}"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: ScenarioConfig) -> str:
    """Render the effective configuration; parse_config inverts it."""
    lines = [
        f"Scenario.duration = {_fmt(cfg.duration)}",
        f"Scenario.dt = {_fmt(cfg.dt)}",
        f"Scenario.seed = {cfg.seed}",
        f"Scenario.worldSize = {_fmt(cfg.world_size)}",
        f"Map.type = {cfg.map_type}",
    ]
    if cfg.map_type == "grid":
        lines += [
            f"Map.gridRows = {cfg.grid_rows}",
            f"Map.gridCols = {cfg.grid_cols}",
            f"Map.gridSpacing = {_fmt(cfg.grid_spacing)}",
        ]
    else:
        lines.append(f"Map.file = {cfg.map_file}")
    lines += [
        f"Interface.range = {_fmt(cfg.interface_range)}",
        f"Interface.bitrate = {cfg.bitrate}",
    ]
    for number, group in enumerate(cfg.groups, start=1):
        lines += [
            f"Group{number}.name = {group.name}",
            f"Group{number}.nrofHosts = {group.hosts}",
            f"Group{number}.speed = {_fmt(group.speed)}",
            f"Group{number}.wait = {_fmt(group.wait)}",
            f"Group{number}.activity = {_fmt(group.activity)}",
        ]
    t = cfg.traffic
    lines += [
        f"Traffic.interval = {_fmt(t.interval)}",
        f"Traffic.size = {_fmt(t.size)}",
        f"Traffic.ttl = {_fmt(t.ttl)}",
        f"Traffic.mode = {t.mode}",
    ]
    if t.sources is not None:
        lines.append(f"Traffic.sources = {_fmt(t.sources)}")
    if t.destinations is not None:
        lines.append(f"Traffic.destinations = {_fmt(t.destinations)}")
    if t.source_group is not None:
        lines.append(f"Traffic.sourceGroup = {t.source_group}")
    lines += [
        f"Routing.policy = {cfg.policy}",
        f"Buffer.capacity = {cfg.buffer_capacity}",
        f"Report.warmup = {_fmt(cfg.warmup)}",
    ]
    return "\n".join(lines) + "\n"


def default_scenario_path() -> Path:
    """Path of the bundled default scenario."""
    return Path(resources.files("dtnsim.data") / "default.cfg")
