"""Statistics reduction and report formatting against hand-counted streams."""
import math

from dtnsim import events as ev
from dtnsim.reports import (
    COMPARISON_COLUMNS,
    aggregate,
    compute_stats,
    comparison_header,
    comparison_row,
    format_ratio,
    format_seconds,
    format_summary,
    metric_formatter,
)


def stream():
    """Three messages: delivered direct, delivered via relay, expired."""
    return [
        # m0: 0 -> 2 direct, latency 4.0, one hop.
        ev.Event(0.0, ev.CREATED, 0, 0, 2, 100),
        ev.Event(0.0, ev.TRANSFER_STARTED, 0, 0, 2, 100),
        ev.Event(4.0, ev.TRANSFER_COMPLETED, 0, 0, 2, 100),
        ev.Event(4.0, ev.DELIVERED, 0, 2, 0, 100),
        # m1: 1 -> 3 via node 5 with one aborted attempt, latency 10, 2 hops.
        ev.Event(2.0, ev.CREATED, 1, 1, 3, 200),
        ev.Event(2.0, ev.TRANSFER_STARTED, 1, 1, 5, 200),
        ev.Event(3.0, ev.TRANSFER_ABORTED, 1, 1, 5, 200),
        ev.Event(4.0, ev.TRANSFER_STARTED, 1, 1, 5, 200),
        ev.Event(5.0, ev.TRANSFER_COMPLETED, 1, 1, 5, 200),
        ev.Event(11.0, ev.TRANSFER_COMPLETED, 1, 5, 3, 200),
        ev.Event(12.0, ev.DELIVERED, 1, 3, 1, 200),
        # m2: 4 -> 0, never delivered.
        ev.Event(6.0, ev.CREATED, 2, 4, 0, 300),
        ev.Event(106.0, ev.EXPIRED, 2, 4, ev.NO_NODE, 300),
    ]


def test_compute_stats_hand_counted():
    s = compute_stats(stream())
    assert s.created == 3
    assert s.delivered == 2
    assert s.expired == 1
    assert s.dropped == 0
    assert s.aborted == 1
    assert s.relayed == 3
    assert s.delivery_prob == 2 / 3
    assert s.latency_avg == 7.0        # (4 + 10) / 2
    assert s.latency_med == 7.0
    assert s.hopcount_avg == 1.5       # (1 + 2) / 2
    assert s.overhead_ratio == 0.5     # (3 - 2) / 2


def test_compute_stats_empty_and_undelivered():
    s = compute_stats([])
    assert s.created == 0
    assert s.delivery_prob == 0.0
    assert math.isnan(s.latency_avg)
    assert math.isnan(s.latency_med)
    assert math.isnan(s.hopcount_avg)
    assert math.isnan(s.overhead_ratio)

    undelivered = [e for e in stream() if e.kind != ev.DELIVERED]
    s = compute_stats(undelivered)
    assert s.created == 3 and s.delivered == 0
    assert math.isnan(s.overhead_ratio)


def test_warmup_excludes_early_messages_entirely():
    # warmup = 1.0 drops m0 (created at 0.0) and all of its later events.
    s = compute_stats(stream(), warmup=1.0)
    assert s.created == 2
    assert s.delivered == 1
    assert s.relayed == 2
    assert s.latency_avg == 10.0
    assert s.hopcount_avg == 2.0
    # A creation exactly at the cutoff is kept (strictly-before rule).
    s = compute_stats(stream(), warmup=2.0)
    assert s.created == 2


def test_formatters():
    assert format_ratio(2 / 3) == "0.6667"
    assert format_ratio(1.0) == "1.0000"
    assert format_ratio(math.nan) == "nan"
    assert format_seconds(4311.66) == "4311.7"
    assert format_seconds(math.nan) == "nan"
    assert metric_formatter("latency_avg") is format_seconds
    assert metric_formatter("delivery_prob") is format_ratio


def test_format_summary_layout():
    text = format_summary(compute_stats(stream()), {"policy": "afc", "seed": 4})
    lines = text.splitlines()
    assert lines[0] == "policy: afc"
    assert lines[1] == "seed: 4"
    assert "delivery_prob: 0.6667" in lines
    assert "latency_avg: 7.0" in lines
    assert "hopcount_avg: 1.5000" in lines
    assert text.endswith("\n")


def test_comparison_row_matches_header_shape():
    header = comparison_header()
    assert header.split(",") == list(COMPARISON_COLUMNS)
    row = comparison_row("afc", 3, compute_stats(stream()))
    fields = row.split(",")
    assert len(fields) == len(COMPARISON_COLUMNS)
    assert fields[0] == "afc"
    assert fields[1] == "3"
    assert fields[4] == "0.6667"
    assert fields[8] == "0.5000"


def test_aggregate_mean_std_count():
    mean, std, n = aggregate([1.0, 2.0, 3.0])
    assert (mean, n) == (2.0, 3)
    assert std == 1.0
    mean, std, n = aggregate([5.0])
    assert (mean, n) == (5.0, 1)
    assert math.isnan(std)
    mean, std, n = aggregate([1.0, math.nan, 3.0])
    assert (mean, n) == (2.0, 2)
    mean, std, n = aggregate([math.nan, math.nan])
    assert math.isnan(mean) and n == 0


def test_stats_round_trip_through_event_log(tmp_path):
    path = tmp_path / "events.tsv"
    ev.write_event_log(stream(), path)
    assert compute_stats(ev.read_event_log(path)) == compute_stats(stream())
