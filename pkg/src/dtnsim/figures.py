"""Bar-chart rendering for cross-protocol comparisons.

Uses the object-oriented matplotlib API with the Agg canvas directly, so
rendering works headless and never touches pyplot global state.
"""
from __future__ import annotations

import math
from pathlib import Path

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

_METRIC_LABELS = {
    "delivery_prob": ("Delivery probability", "delivered / created"),
    "latency_avg": ("Average delivery latency", "seconds"),
    "latency_med": ("Median delivery latency", "seconds"),
    "hopcount_avg": ("Average hop count", "hops per delivered message"),
    "overhead_ratio": ("Overhead ratio", "(relayed - delivered) / delivered"),
}


def render_metric_bars(
    metric: str,
    series: list[tuple[str, float, float]],
    path: str | Path,
) -> None:
    """Render one bar chart: mean per protocol with sample-std error bars.

    `series` holds (protocol, mean, std) triples; NaN stds draw no bar cap.
    """
    title, ylabel = _METRIC_LABELS.get(metric, (metric, ""))
    labels = [s[0] for s in series]
    means = [0.0 if math.isnan(s[1]) else s[1] for s in series]
    errors = [0.0 if math.isnan(s[2]) else s[2] for s in series]

    fig = Figure(figsize=(5.0, 3.6), dpi=120)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    positions = range(len(series))
    ax.bar(
        positions, means, yerr=errors, capsize=4.0,
        color="#5b8db8", edgecolor="#2e4a61",
    )
    ax.set_xticks(list(positions))
    ax.set_xticklabels(labels)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)


def render_comparison_figures(
    aggregates: dict[str, dict[str, tuple[float, float, int]]],
    out_dir: str | Path,
) -> list[Path]:
    """Render one figure per metric into out_dir; returns written paths.

    `aggregates` maps metric -> protocol -> (mean, std, n).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for metric, per_protocol in aggregates.items():
        series = [
            (protocol, mean, std)
            for protocol, (mean, std, _) in per_protocol.items()
        ]
        path = out / f"{metric}.png"
        render_metric_bars(metric, series, path)
        written.append(path)
    return written
