"""Run statistics computed from event logs, plus their text renderings."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from . import events as ev

COMPARISON_COLUMNS = (
    "protocol",
    "seed",
    "created",
    "delivered",
    "delivery_prob",
    "latency_avg",
    "latency_med",
    "hopcount_avg",
    "overhead_ratio",
)

# Ratios print with 4 decimals, durations in seconds with 1.
_RATIO_METRICS = {"delivery_prob", "hopcount_avg", "overhead_ratio"}
_SECONDS_METRICS = {"latency_avg", "latency_med"}


@dataclass(frozen=True)
class RunStats:
    """Aggregate outcome of one run."""

    created: int
    delivered: int
    expired: int
    dropped: int
    aborted: int
    relayed: int
    delivery_prob: float
    latency_avg: float
    latency_med: float
    hopcount_avg: float
    overhead_ratio: float


def compute_stats(events: Iterable[ev.Event], warmup: float = 0.0) -> RunStats:
    """Reduce an event stream to run statistics.

    Messages created before `warmup` seconds are excluded entirely.
    Latency and hop count average over delivered messages only. The
    overhead ratio is (relayed - delivered) / delivered, where relayed
    counts every completed transfer; it is NaN when nothing was delivered.
    """
    created_at: dict[int, float] = {}
    hops: dict[int, int] = {}
    excluded: set[int] = set()
    latencies: list[float] = []
    delivered_hops: list[int] = []
    created = delivered = expired = dropped = aborted = relayed = 0

    for event in events:
        if event.kind == ev.CREATED:
            if event.time < warmup:
                excluded.add(event.msg_id)
                continue
            created += 1
            created_at[event.msg_id] = event.time
            hops[event.msg_id] = 0
        elif event.msg_id in excluded:
            continue
        elif event.kind == ev.TRANSFER_COMPLETED:
            relayed += 1
            hops[event.msg_id] = hops.get(event.msg_id, 0) + 1
        elif event.kind == ev.DELIVERED:
            delivered += 1
            latencies.append(event.time - created_at[event.msg_id])
            delivered_hops.append(hops[event.msg_id])
        elif event.kind == ev.EXPIRED:
            expired += 1
        elif event.kind == ev.DROPPED:
            dropped += 1
        elif event.kind == ev.TRANSFER_ABORTED:
            aborted += 1

    delivery_prob = delivered / created if created else 0.0
    latency_avg = statistics.fmean(latencies) if latencies else math.nan
    latency_med = statistics.median(latencies) if latencies else math.nan
    hopcount_avg = statistics.fmean(delivered_hops) if delivered_hops else math.nan
    overhead = (relayed - delivered) / delivered if delivered else math.nan
    return RunStats(
        created=created,
        delivered=delivered,
        expired=expired,
        dropped=dropped,
        aborted=aborted,
        relayed=relayed,
        delivery_prob=delivery_prob,
        latency_avg=latency_avg,
        latency_med=latency_med,
        hopcount_avg=hopcount_avg,
        overhead_ratio=overhead,
    )


def format_ratio(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.4f}"


def format_seconds(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.1f}"


def format_summary(stats: RunStats, metadata: Mapping[str, object]) -> str:
    """Render the single-run summary: metadata first, then metrics."""
    lines = [f"{key}: {value}" for key, value in metadata.items()]
    lines += [
        f"created: {stats.created}",
        f"delivered: {stats.delivered}",
        f"expired: {stats.expired}",
        f"dropped: {stats.dropped}",
        f"aborted_transfers: {stats.aborted}",
        f"relayed: {stats.relayed}",
        f"delivery_prob: {format_ratio(stats.delivery_prob)}",
        f"latency_avg: {format_seconds(stats.latency_avg)}",
        f"latency_med: {format_seconds(stats.latency_med)}",
        f"hopcount_avg: {format_ratio(stats.hopcount_avg)}",
        f"overhead_ratio: {format_ratio(stats.overhead_ratio)}",
    ]
    return "\n".join(lines) + "\n"


def write_summary(
    stats: RunStats, metadata: Mapping[str, object], path: str | Path
) -> None:
    Path(path).write_text(format_summary(stats, metadata))


def comparison_row(protocol: str, seed: int, stats: RunStats) -> str:
    """One CSV row of the cross-protocol comparison table."""
    return ",".join((
        protocol,
        str(seed),
        str(stats.created),
        str(stats.delivered),
        format_ratio(stats.delivery_prob),
        format_seconds(stats.latency_avg),
        format_seconds(stats.latency_med),
        format_ratio(stats.hopcount_avg),
        format_ratio(stats.overhead_ratio),
    ))


def comparison_header() -> str:
    return ",".join(COMPARISON_COLUMNS)


def aggregate(values: list[float]) -> tuple[float, float, int]:
    """Mean, sample standard deviation (NaN for n < 2), and count.

    NaN inputs are excluded; an all-NaN list aggregates to (NaN, NaN, 0).
    """
    clean = [v for v in values if not math.isnan(v)]
    if not clean:
        return math.nan, math.nan, 0
    mean = statistics.fmean(clean)
    std = statistics.stdev(clean) if len(clean) > 1 else math.nan
    return mean, std, len(clean)


def metric_formatter(metric: str):
    if metric in _SECONDS_METRICS:
        return format_seconds
    return format_ratio
