"""Camera-calibrated graph over video frames and A* path search.

Nodes are frames, keyed by frame index. Two frames are joined when their
camera centers are closer than ``distance_threshold`` and no occupancy point
lies inside the cylinder of radius ``corridor_radius`` around the segment
between the centers. Edge weight is the center distance in meters.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple

import numpy as np
from scipy.spatial import cKDTree

from geopipe.geometry import CalibratedFrame

DEFAULT_DISTANCE_THRESHOLD = 0.5
DEFAULT_CORRIDOR_RADIUS = 0.2
DEFAULT_MIN_HOPS = 3
MAX_SAMPLING_ATTEMPTS = 10_000


class GraphError(ValueError):
    pass


class NoPathError(LookupError):
    """Raised by :func:`astar` when the goal is not reachable from the start."""

    def __init__(self, start, goal):
        super().__init__(f"no path from node {start} to node {goal}")
        self.start = start
        self.goal = goal


class EndpointSamplingError(GraphError):
    pass


@dataclass(frozen=True)
class OccupancyCloud:
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise GraphError("occupancy cloud has non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points)


def _blocked_among(points: np.ndarray, a: np.ndarray, b: np.ndarray, radius: float) -> bool:
    d = b - a
    rel = points - a
    s = rel @ d / (d @ d)
    inside = (s >= 0.0) & (s <= 1.0)
    if not inside.any():
        return False
    perp = rel[inside] - s[inside, None] * d
    return bool(np.any(np.einsum("ij,ij->i", perp, perp) < radius * radius))


def obstruction_check(a, b, cloud: OccupancyCloud, corridor_radius: float) -> bool:
    """True when the corridor between ``a`` and ``b`` is clear.

    The corridor is the finite cylinder of radius ``corridor_radius`` whose
    axis is the segment a-b; end caps are flat (no hemispheres).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.array_equal(a, b):
        raise GraphError("obstruction check needs two distinct endpoints")
    if corridor_radius <= 0:
        raise GraphError(f"corridor_radius must be positive, got {corridor_radius}")
    if len(cloud) == 0:
        return True
    if len(cloud) < 64:
        return not _blocked_among(cloud.points, a, b, corridor_radius)
    half = 0.5 * float(np.linalg.norm(b - a))
    reach = math.hypot(half, corridor_radius) * (1 + 1e-9) + 1e-12
    idx = cloud.tree.query_ball_point(0.5 * (a + b), reach)
    if not idx:
        return True
    return not _blocked_among(cloud.points[np.sort(idx)], a, b, corridor_radius)


@dataclass(frozen=True)
class CameraGraph:
    nodes: Tuple[int, ...]
    centers: Mapping[int, np.ndarray]
    adjacency: Mapping[int, Mapping[int, float]]

    def __contains__(self, node) -> bool:
        return node in self.adjacency

    def __len__(self):
        return len(self.nodes)

    def neighbors(self, node: int) -> Mapping[int, float]:
        return self.adjacency[node]

    def edges(self) -> List[Tuple[int, int, float]]:
        """Each undirected edge once, as (low, high, weight), sorted."""
        return [
            (a, b, w)
            for a in self.nodes
            for b, w in sorted(self.adjacency[a].items())
            if a < b
        ]

    @property
    def num_edges(self) -> int:
        return sum(len(n) for n in self.adjacency.values()) // 2

    def heuristic(self, node: int, goal: int) -> float:
        return float(np.linalg.norm(self.centers[node] - self.centers[goal]))


def _edge_clear(args) -> bool:
    ca, cb, cloud, radius = args
    if np.array_equal(ca, cb):
        # coincident cameras: nothing to traverse, only the center must be free
        if len(cloud) == 0:
            return True
        dist, _ = cloud.tree.query(ca)
        return bool(dist >= radius)
    return obstruction_check(ca, cb, cloud, radius)


def graph_from_centers(
    centers: Mapping[int, Sequence[float]],
    cloud: Optional[OccupancyCloud] = None,
    distance_threshold: float = DEFAULT_DISTANCE_THRESHOLD,
    corridor_radius: float = DEFAULT_CORRIDOR_RADIUS,
    threads: Optional[int] = None,
) -> CameraGraph:
    if distance_threshold <= 0:
        raise GraphError(f"distance_threshold must be positive, got {distance_threshold}")
    if corridor_radius <= 0:
        raise GraphError(f"corridor_radius must be positive, got {corridor_radius}")
    cloud = cloud if cloud is not None else OccupancyCloud()
    nodes = tuple(sorted(int(n) for n in centers))
    pos = {n: np.asarray(centers[n], dtype=np.float64).reshape(3) for n in nodes}
    coords = np.array([pos[n] for n in nodes]).reshape(-1, 3)

    candidates = []
    if len(nodes) >= 2:
        for i, j in sorted(cKDTree(coords).query_pairs(distance_threshold)):
            w = float(np.linalg.norm(coords[i] - coords[j]))
            if w < distance_threshold:
                candidates.append((nodes[i], nodes[j], w))

    jobs = [(pos[a], pos[b], cloud, corridor_radius) for a, b, _ in candidates]
    if threads is not None and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            clear = list(pool.map(_edge_clear, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        clear = [_edge_clear(j) for j in jobs]

    adjacency: Dict[int, Dict[int, float]] = {n: {} for n in nodes}
    for (a, b, w), ok in zip(candidates, clear):
        if ok:
            adjacency[a][b] = w
            adjacency[b][a] = w
    return CameraGraph(nodes, pos, adjacency)


def build_graph(
    frames: Sequence[CalibratedFrame],
    cloud: Optional[OccupancyCloud] = None,
    distance_threshold: float = DEFAULT_DISTANCE_THRESHOLD,
    corridor_radius: float = DEFAULT_CORRIDOR_RADIUS,
    threads: Optional[int] = None,
) -> CameraGraph:
    if len(frames) < 2:
        raise GraphError(f"need at least 2 frames to build a graph, got {len(frames)}")
    centers = {}
    for f in frames:
        if f.frame_index in centers:
            raise GraphError(f"duplicate frame_index {f.frame_index}")
        centers[f.frame_index] = f.center
    return graph_from_centers(centers, cloud, distance_threshold, corridor_radius, threads)


@dataclass(frozen=True)
class Trajectory:
    nodes: Tuple[int, ...]
    cost: float

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        object.__setattr__(self, "cost", float(self.cost))

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1


def astar(graph: CameraGraph, start: int, goal: int) -> Trajectory:
    """Shortest path by A* with the Euclidean center distance as heuristic.

    At equal f-score the node with the smaller frame index is expanded first.
    Raises :class:`NoPathError` when ``goal`` is unreachable.
    """
    for n in (start, goal):
        if n not in graph:
            raise GraphError(f"node {n} is not in the graph")
    if start == goal:
        return Trajectory((start,), 0.0)

    h_cache: Dict[int, float] = {}

    def h(n):
        if n not in h_cache:
            h_cache[n] = graph.heuristic(n, goal)
        return h_cache[n]

    best = {start: 0.0}
    parent: Dict[int, Optional[int]] = {start: None}
    frontier = [(h(start), start, 0.0)]
    while frontier:
        _, node, g = heapq.heappop(frontier)
        if g > best[node]:
            continue
        if node == goal:
            path = [node]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return Trajectory(tuple(reversed(path)), g)
        for nbr, w in graph.neighbors(node).items():
            ng = g + w
            if ng < best.get(nbr, math.inf):
                best[nbr] = ng
                parent[nbr] = node
                heapq.heappush(frontier, (ng + h(nbr), nbr, ng))
    raise NoPathError(start, goal)


def hop_distances(graph: CameraGraph, source: int) -> Dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        n = queue.popleft()
        for nbr in graph.neighbors(n):
            if nbr not in dist:
                dist[nbr] = dist[n] + 1
                queue.append(nbr)
    return dist


def sample_endpoints(
    graph: CameraGraph,
    seed: int,
    min_hops: int = DEFAULT_MIN_HOPS,
    max_attempts: int = MAX_SAMPLING_ATTEMPTS,
) -> Tuple[int, int]:
    """Draw a connected (start, goal) pair at least ``min_hops`` edges apart.

    Rejection sampling from ``numpy.random.default_rng(seed)``; gives up after
    ``max_attempts`` draws.
    """
    if not graph.nodes:
        raise EndpointSamplingError("graph has no nodes")
    rng = np.random.default_rng(seed)
    hops: Dict[int, Dict[int, int]] = {}
    n = len(graph.nodes)
    for _ in range(max_attempts):
        i, j = rng.integers(n, size=2)
        start, goal = graph.nodes[i], graph.nodes[j]
        if start not in hops:
            hops[start] = hop_distances(graph, start)
        d = hops[start].get(goal)
        if d is not None and d >= min_hops:
            return start, goal
    raise EndpointSamplingError(
        f"no connected endpoint pair at least {min_hops} hops apart "
        f"after {max_attempts} attempts ({n} nodes, {graph.num_edges} edges)"
    )


def write_graph(fh: TextIO, graph: CameraGraph) -> None:
    fh.write(f"nodes {len(graph.nodes)}\n")
    for a, b, w in graph.edges():
        fh.write(f"{a} {b} {w:.17g}\n")


def read_graph_edges(fh: TextIO) -> Tuple[int, List[Tuple[int, int, float]]]:
    header = fh.readline().split()
    if len(header) != 2 or header[0] != "nodes":
        raise GraphError("graph file must start with 'nodes <count>'")
    edges = []
    for lineno, line in enumerate(fh, start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GraphError(f"line {lineno}: expected 'a b weight'")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return int(header[1]), edges


def load_cloud(path) -> OccupancyCloud:
    """Read ``x y z`` rows (whitespace or comma separated, ``#`` comments) or a
    ``.npy`` array of shape (n, 3)."""
    path = str(path)
    if path.endswith(".npy"):
        return OccupancyCloud(np.load(path))
    with open(path, encoding="utf-8") as fh:
        rows = []
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].replace(",", " ").strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3:
                raise GraphError(f"{path}:{lineno}: expected at least 3 coordinates")
            rows.append([float(v) for v in parts[:3]])
    return OccupancyCloud(np.array(rows).reshape(-1, 3))


def centers_of(frames: Iterable[CalibratedFrame]) -> Dict[int, np.ndarray]:
    return {f.frame_index: f.center for f in frames}
