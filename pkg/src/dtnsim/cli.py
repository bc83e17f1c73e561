"""Command-line entry points: run, compare, validate-map."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from os import cpu_count
from pathlib import Path

from . import events as ev
from . import figures, reports
from .config import (
    ConfigError,
    ScenarioConfig,
    default_scenario_path,
    load_config,
)
from .engine import World
from .mapgraph import (
    DisconnectedMapError,
    MapParseError,
    RoadGraph,
    generate_grid_map,
    load_map_file,
    validate_connectivity,
)
from .routing import POLICIES

_METRICS = (
    "delivery_prob",
    "latency_avg",
    "latency_med",
    "hopcount_avg",
    "overhead_ratio",
)
# Direction of "better" per metric, used by the ranking summary.
_HIGHER_IS_BETTER = {"delivery_prob"}


@dataclass
class RunResult:
    stats: reports.RunStats
    events: list[ev.Event]
    metadata: dict[str, object]
    world: World


def build_graph(cfg: ScenarioConfig) -> RoadGraph:
    """Materialize and sanity-check the scenario's road network."""
    if cfg.map_type == "grid":
        graph = generate_grid_map(cfg.grid_rows, cfg.grid_cols, cfg.grid_spacing)
    else:
        graph = load_map_file(cfg.map_file)
    validate_connectivity(graph)
    min_x, min_y, max_x, max_y = graph.bounds()
    width, height = cfg.world_size
    if min_x < 0 or min_y < 0 or max_x > width or max_y > height:
        raise ConfigError(
            f"map bounds ({min_x}, {min_y})..({max_x}, {max_y}) exceed "
            f"Scenario.worldSize {width} x {height}"
        )
    return graph


def _map_label(cfg: ScenarioConfig) -> str:
    if cfg.map_type == "grid":
        return f"grid {cfg.grid_rows}x{cfg.grid_cols} spacing {cfg.grid_spacing}"
    return f"file {cfg.map_file}"


def run_metadata(cfg: ScenarioConfig, policy: str, seed: int) -> dict[str, object]:
    hosts = ", ".join(f"{g.name}={g.hosts}" for g in cfg.groups)
    return {
        "policy": policy,
        "seed": seed,
        "duration": cfg.duration,
        "dt": cfg.dt,
        "map": _map_label(cfg),
        "hosts": hosts,
        "traffic_mode": cfg.traffic.mode,
        "warmup": cfg.warmup,
        "defaulted_keys": "; ".join(cfg.defaulted) if cfg.defaulted else "none",
    }


def run_scenario(
    cfg: ScenarioConfig,
    *,
    policy: str | None = None,
    seed: int | None = None,
) -> RunResult:
    """Run one complete scenario and reduce it to statistics."""
    effective_policy = policy if policy is not None else cfg.policy
    effective_seed = seed if seed is not None else cfg.seed
    graph = build_graph(cfg)
    world = World(
        graph,
        cfg.groups,
        policy=effective_policy,
        seed=effective_seed,
        dt=cfg.dt,
        interface_range=cfg.interface_range,
        bitrate=cfg.bitrate,
        traffic=cfg.traffic,
        buffer_capacity=cfg.buffer_capacity,
    )
    world.run(cfg.duration)
    stats = reports.compute_stats(world.events, warmup=cfg.warmup)
    metadata = run_metadata(cfg, effective_policy, effective_seed)
    return RunResult(stats, world.events, metadata, world)


# --- run ------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    result = run_scenario(cfg, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports.write_summary(result.stats, result.metadata, out / "summary.txt")
    policy = result.metadata["policy"]
    seed = result.metadata["seed"]
    rows = [reports.comparison_header(), reports.comparison_row(policy, seed, result.stats)]
    (out / "run.csv").write_text("\n".join(rows) + "\n")
    if args.events:
        ev.write_event_log(result.events, out / "events.tsv")
    sys.stdout.write(reports.format_summary(result.stats, result.metadata))
    return 0


# --- compare ----------------------------------------------------------------


def _compare_cell(cfg: ScenarioConfig, policy: str, seed: int):
    result = run_scenario(cfg, policy=policy, seed=seed)
    return policy, seed, result.stats


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for policy in policies:
        if policy not in POLICIES:
            raise ConfigError(
                f"unknown policy {policy!r} (valid: {', '.join(sorted(POLICIES))})"
            )
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad seed list {args.seeds!r}") from None
    if not policies or not seeds:
        raise ConfigError("compare needs at least one policy and one seed")

    cells = [(policy, seed) for policy in policies for seed in seeds]
    results: dict[tuple[str, int], reports.RunStats] = {}
    failures: list[tuple[str, int, str]] = []
    workers = args.parallel if args.parallel else (cpu_count() or 1)
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_compare_cell, cfg, policy, seed): (policy, seed)
                for policy, seed in cells
            }
            for future, (policy, seed) in futures.items():
                exc = future.exception()
                if exc is not None:
                    failures.append((policy, seed, str(exc)))
                else:
                    _, _, stats = future.result()
                    results[(policy, seed)] = stats
                    _report_cell(policy, seed, stats)
    else:
        for policy, seed in cells:
            try:
                _, _, stats = _compare_cell(cfg, policy, seed)
            except Exception as exc:
                failures.append((policy, seed, str(exc)))
                continue
            results[(policy, seed)] = stats
            _report_cell(policy, seed, stats)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    ordered = sorted(results)
    lines = [reports.comparison_header()]
    lines += [reports.comparison_row(p, s, results[(p, s)]) for p, s in ordered]
    (out / "comparison.csv").write_text("\n".join(lines) + "\n")

    aggregates: dict[str, dict[str, tuple[float, float, int]]] = {}
    present = sorted({p for p, _ in results})
    for metric in _METRICS:
        per_policy: dict[str, tuple[float, float, int]] = {}
        for policy in present:
            values = [
                getattr(stats, _stat_field(metric))
                for (p, _), stats in sorted(results.items())
                if p == policy
            ]
            per_policy[policy] = reports.aggregate(values)
        aggregates[metric] = per_policy
        fmt = reports.metric_formatter(metric)
        agg_lines = ["policy,mean,std,n"]
        for policy in present:
            mean, std, n = per_policy[policy]
            agg_lines.append(f"{policy},{fmt(mean)},{fmt(std)},{n}")
        (out / f"agg_{metric}.csv").write_text("\n".join(agg_lines) + "\n")

    (out / "ranking.txt").write_text(_format_ranking(aggregates))
    figures.render_comparison_figures(aggregates, out / "figures")

    if failures:
        failure_lines = [
            f"{policy} seed {seed}: {message}"
            for policy, seed, message in sorted(failures)
        ]
        (out / "failures.txt").write_text("\n".join(failure_lines) + "\n")
        sys.stderr.write(
            f"{len(failures)} of {len(cells)} runs failed; see "
            f"{out / 'failures.txt'}\n"
        )
        return 1
    return 0


def _stat_field(metric: str) -> str:
    return metric


def _report_cell(policy: str, seed: int, stats: reports.RunStats) -> None:
    sys.stdout.write(
        f"{policy} seed {seed}: delivered {stats.delivered}/{stats.created}, "
        f"latency_avg {reports.format_seconds(stats.latency_avg)}, "
        f"hops {reports.format_ratio(stats.hopcount_avg)}\n"
    )
    sys.stdout.flush()


def _format_ranking(
    aggregates: dict[str, dict[str, tuple[float, float, int]]]
) -> str:
    lines = []
    for metric in _METRICS:
        per_policy = aggregates[metric]
        higher = metric in _HIGHER_IS_BETTER
        ordered = sorted(
            per_policy.items(),
            key=lambda item: item[1][0],
            reverse=higher,
        )
        fmt = reports.metric_formatter(metric)
        direction = "higher is better" if higher else "lower is better"
        sep = " > " if higher else " < "
        chain = sep.join(f"{policy} {fmt(mean)}" for policy, (mean, _, _) in ordered)
        lines.append(f"{metric} ({direction}): {chain}")
    return "\n".join(lines) + "\n"


# --- validate-map ---------------------------------------------------------


def cmd_validate_map(args: argparse.Namespace) -> int:
    graph = load_map_file(args.map)
    validate_connectivity(graph)
    min_x, min_y, max_x, max_y = graph.bounds()
    sys.stdout.write(
        f"OK: {graph.vertex_count} vertices, {graph.edge_count} edges, "
        f"bounds ({min_x}, {min_y})..({max_x}, {max_y}), 1 component\n"
    )
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtnsim",
        description="Deterministic store-carry-forward network simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write reports")
    p_run.add_argument(
        "config", nargs="?", default=str(default_scenario_path()),
        help="scenario file (default: bundled campus grid)",
    )
    p_run.add_argument("--seed", type=int, default=None, help="override Scenario.seed")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument(
        "--events", action=argparse.BooleanOptionalAction, default=True,
        help="write the per-message event log (events.tsv)",
    )
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser(
        "compare", help="run a policy x seed sweep and aggregate results"
    )
    p_cmp.add_argument(
        "config", nargs="?", default=str(default_scenario_path()),
        help="scenario file (default: bundled campus grid)",
    )
    p_cmp.add_argument(
        "--policies", default=",".join(sorted(POLICIES)),
        help="comma-separated policy names",
    )
    p_cmp.add_argument(
        "--seeds", default="1,2,3,4,5", help="comma-separated seed list"
    )
    p_cmp.add_argument(
        "--parallel", type=int, default=0,
        help="worker processes (default: one per CPU)",
    )
    p_cmp.add_argument("--out", default="compare_out", help="output directory")
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate-map", help="check a road map file")
    p_val.add_argument("map", help="map file with LINESTRING records")
    p_val.set_defaults(func=cmd_validate_map)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MapParseError, DisconnectedMapError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
