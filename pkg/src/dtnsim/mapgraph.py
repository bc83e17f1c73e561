"""Road-network graphs: WKT parsing, grid generation, shortest paths."""
from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass, field
from pathlib import Path


class MapParseError(ValueError):
    """Raised for unreadable map input; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class DisconnectedMapError(ValueError):
    """Raised when a road graph splits into multiple components."""

    def __init__(self, components: int):
        super().__init__(
            f"road graph has {components} connected components, expected 1"
        )
        self.components = components


@dataclass
class RoadGraph:
    """Undirected road network with planar vertex coordinates in metres.

    Vertices are dense integer ids assigned in first-appearance order. Edge
    lengths are always the Euclidean distance between endpoint coordinates,
    computed here so they cannot drift out of sync with the geometry.
    """

    coords: list[tuple[float, float]]
    segments: list[tuple[int, int]]
    edges: list[tuple[int, int, float]] = field(init=False)
    neighbors: dict[int, list[tuple[int, float]]] = field(init=False, repr=False)
    _edge_len: dict[tuple[int, int], float] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = len(self.coords)
        self.edges = []
        self.neighbors = {v: [] for v in range(n)}
        self._edge_len = {}
        for u, v in self.segments:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) references unknown vertex")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            a, b = (u, v) if u < v else (v, u)
            if (a, b) in self._edge_len:
                raise ValueError(f"duplicate edge ({a}, {b})")
            length = math.dist(self.coords[a], self.coords[b])
            if length <= 0.0:
                raise ValueError(f"zero-length edge ({a}, {b})")
            self._edge_len[(a, b)] = length
            self.edges.append((a, b, length))
            self.neighbors[a].append((b, length))
            self.neighbors[b].append((a, length))
        for adj in self.neighbors.values():
            adj.sort()

    @property
    def vertex_count(self) -> int:
        return len(self.coords)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def edge_length(self, u: int, v: int) -> float:
        key = (u, v) if u < v else (v, u)
        try:
            return self._edge_len[key]
        except KeyError:
            raise ValueError(f"no edge between {u} and {v}") from None

    def bounds(self) -> tuple[float, float, float, float]:
        """Return (min_x, min_y, max_x, max_y) over all vertices."""
        if not self.coords:
            raise ValueError("empty graph has no bounds")
        xs = [c[0] for c in self.coords]
        ys = [c[1] for c in self.coords]
        return (min(xs), min(ys), max(xs), max(ys))


# --- parsing -----------------------------------------------------------

_LINESTRING = re.compile(r"^LINESTRING\s*\((.*)\)\s*$", re.IGNORECASE)


def parse_map(text: str) -> RoadGraph:
    """Build a RoadGraph from LINESTRING records, one per line.

    Blank lines and lines starting with '#' are skipped. Identical
    coordinates refer to the same vertex across records, which is how
    separate road records join into one network. Repeated segments are
    deduplicated; a segment between identical consecutive points is an
    error.
    """
    vertex_ids: dict[tuple[float, float], int] = {}
    coords: list[tuple[float, float]] = []
    segments: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    records = 0

    def intern(point: tuple[float, float]) -> int:
        vid = vertex_ids.get(point)
        if vid is None:
            vid = len(coords)
            vertex_ids[point] = vid
            coords.append(point)
        return vid

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _LINESTRING.match(line)
        if match is None:
            raise MapParseError(
                "expected 'LINESTRING (x y, x y, ...)'", line_no
            )
        body = match.group(1).strip()
        points: list[tuple[float, float]] = []
        if body:
            for chunk in body.split(","):
                parts = chunk.split()
                if len(parts) != 2:
                    raise MapParseError(
                        f"bad coordinate pair {chunk.strip()!r}", line_no
                    )
                try:
                    x, y = float(parts[0]), float(parts[1])
                except ValueError:
                    raise MapParseError(
                        f"bad coordinate pair {chunk.strip()!r}", line_no
                    ) from None
                if not (math.isfinite(x) and math.isfinite(y)):
                    raise MapParseError(
                        f"non-finite coordinate {chunk.strip()!r}", line_no
                    )
                points.append((x, y))
        if len(points) < 2:
            raise MapParseError("LINESTRING needs at least 2 points", line_no)
        records += 1
        prev = intern(points[0])
        for point in points[1:]:
            cur = intern(point)
            if cur == prev:
                raise MapParseError(
                    f"zero-length segment at {point}", line_no
                )
            key = (prev, cur) if prev < cur else (cur, prev)
            if key not in seen:
                seen.add(key)
                segments.append(key)
            prev = cur

    if records == 0:
        raise MapParseError("no LINESTRING records found")
    return RoadGraph(coords, segments)


def load_map_file(path: str | Path) -> RoadGraph:
    """Parse a map file from disk."""
    return parse_map(Path(path).read_text())


def generate_grid_map(rows: int, cols: int, spacing: float) -> RoadGraph:
    """Build a rows x cols lattice with the given edge spacing in metres.

    Vertex (i, j) sits at (i * spacing, j * spacing) and has id i * cols + j.
    """
    if rows < 2 or cols < 2:
        raise ValueError("grid needs at least 2 rows and 2 cols")
    if spacing <= 0.0:
        raise ValueError("grid spacing must be positive")
    coords = [
        (float(i) * spacing, float(j) * spacing)
        for i in range(rows)
        for j in range(cols)
    ]
    segments: list[tuple[int, int]] = []
    for i in range(rows):
        for j in range(cols):
            vid = i * cols + j
            if j + 1 < cols:
                segments.append((vid, vid + 1))
            if i + 1 < rows:
                segments.append((vid, vid + cols))
    return RoadGraph(coords, segments)


# --- connectivity ------------------------------------------------------


def count_components(graph: RoadGraph) -> int:
    """Number of connected components (isolated vertices count)."""
    n = graph.vertex_count
    if n == 0:
        raise ValueError("empty graph")
    seen = [False] * n
    components = 0
    for start in range(n):
        if seen[start]:
            continue
        components += 1
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            for v, _ in graph.neighbors[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
    return components


def validate_connectivity(graph: RoadGraph) -> None:
    """Raise DisconnectedMapError unless the graph is one component."""
    components = count_components(graph)
    if components != 1:
        raise DisconnectedMapError(components)


# --- shortest paths ----------------------------------------------------


def _distances_to(graph: RoadGraph, target: int) -> list[float]:
    """Dijkstra distances from every vertex to the target."""
    dist = [math.inf] * graph.vertex_count
    dist[target] = 0.0
    heap: list[tuple[float, int]] = [(0.0, target)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in graph.neighbors[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def shortest_path(
    graph: RoadGraph, src: int, dst: int
) -> tuple[list[int], float]:
    """Shortest path between two vertices with a deterministic tie-break.

    Among equal-length shortest paths the lexicographically smallest vertex
    sequence is returned: after computing distances to dst, the path walks
    greedily from src, at each step taking the lowest-id neighbor that still
    lies on some shortest path. Returns (vertex list, total length).
    """
    n = graph.vertex_count
    if not (0 <= src < n and 0 <= dst < n):
        raise ValueError(f"unknown vertex in ({src}, {dst})")
    if src == dst:
        return [src], 0.0
    dist = _distances_to(graph, dst)
    if math.isinf(dist[src]):
        raise ValueError(f"no path from {src} to {dst}")
    path = [src]
    total = 0.0
    u = src
    while u != dst:
        for v, w in graph.neighbors[u]:
            if dist[v] + w == dist[u]:
                total += w
                path.append(v)
                u = v
                break
        else:
            raise AssertionError("shortest-path walk lost the gradient")
    return path, total
