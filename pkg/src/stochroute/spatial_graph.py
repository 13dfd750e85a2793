"""
Spatial networks with stochastic edge weights.

Edges are directed and kept sorted by ``(tail, head)``; an undirected link
is stored as two directed edges with identical length and weight law.
"""

from __future__ import annotations

import heapq
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .distributions import (DiscreteDistribution, LogNormalParams, TimeGrid,
                            discretize_lognormal, sample)
from .errors import IntegrityError, NodeLookupError, ParameterError, TNTPParseError

log = logging.getLogger(__name__)

Weight = Union[LogNormalParams, DiscreteDistribution]


@dataclass(frozen=True)
class SpatialNode:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class StochasticEdge:
    tail: int
    head: int
    length: float
    weight: Weight

    def __post_init__(self):
        if self.tail == self.head:
            raise IntegrityError(f"self-loop at node {self.tail}")
        if not self.length >= 0:
            raise IntegrityError(f"edge ({self.tail}, {self.head}) has negative length")


class SpatialNetwork:
    """Immutable directed network embedded in the plane.

    Adjacency is stored in CSR form: the out-edges of node ``i`` are the
    edge ids ``offsets[i]:offsets[i + 1]``, ordered by head id.
    """

    def __init__(self, nodes: Sequence[SpatialNode], edges: Iterable[StochasticEdge],
                 labels: Optional[Sequence] = None):
        nodes = list(nodes)
        for k, node in enumerate(nodes):
            if node.id != k:
                raise IntegrityError(f"node ids must be contiguous from 0; position {k} has id {node.id}")
        self.nodes: Tuple[SpatialNode, ...] = tuple(nodes)
        self.labels = tuple(labels) if labels is not None else tuple(range(len(nodes)))
        n = len(nodes)
        edges = sorted(edges, key=lambda e: (e.tail, e.head))
        seen = set()
        for e in edges:
            if not (0 <= e.tail < n and 0 <= e.head < n):
                raise IntegrityError(f"edge ({e.tail}, {e.head}) refers to a missing node")
            if (e.tail, e.head) in seen:
                raise IntegrityError(f"duplicate edge ({e.tail}, {e.head})")
            seen.add((e.tail, e.head))
        self.edges: Tuple[StochasticEdge, ...] = tuple(edges)
        self.xy = np.array([[v.x, v.y] for v in nodes], dtype=float).reshape(n, 2)
        self.tails = np.array([e.tail for e in edges], dtype=np.int64)
        self.heads = np.array([e.head for e in edges], dtype=np.int64)
        self.lengths = np.array([e.length for e in edges], dtype=float)
        self.offsets = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.offsets, self.tails + 1, 1)
        np.cumsum(self.offsets, out=self.offsets)
        self._edge_ids: Dict[Tuple[int, int], int] = {(e.tail, e.head): k for k, e in enumerate(edges)}
        self._coords = {(v.x, v.y): v.id for v in nodes}
        self._grid_cache: Dict[TimeGrid, Tuple[List[DiscreteDistribution], np.ndarray]] = {}

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return len(self.edges)

    def __repr__(self):
        return f"SpatialNetwork(n={self.n}, m={self.m})"

    def check_node(self, i) -> int:
        if not (isinstance(i, (int, np.integer)) and 0 <= i < self.n):
            raise NodeLookupError(i)
        return int(i)

    def out_edges(self, i: int) -> range:
        i = self.check_node(i)
        return range(int(self.offsets[i]), int(self.offsets[i + 1]))

    def neighbors(self, i: int) -> np.ndarray:
        """Heads of the out-edges of ``i`` in increasing id order."""
        i = self.check_node(i)
        return self.heads[self.offsets[i]:self.offsets[i + 1]]

    def degree(self, i: int) -> int:
        i = self.check_node(i)
        return int(self.offsets[i + 1] - self.offsets[i])

    def edge_id(self, tail: int, head: int) -> int:
        try:
            return self._edge_ids[(int(tail), int(head))]
        except KeyError:
            raise NodeLookupError(f"no edge ({tail}, {head})") from None

    def has_edge(self, tail: int, head: int) -> bool:
        return (int(tail), int(head)) in self._edge_ids

    def node_at(self, x: float, y: float) -> int:
        try:
            return self._coords[(float(x), float(y))]
        except KeyError:
            raise NodeLookupError(f"no node at ({x}, {y})") from None

    def _discretized(self, grid: TimeGrid):
        cached = self._grid_cache.get(grid)
        if cached is None:
            dists = []
            for e in self.edges:
                if isinstance(e.weight, LogNormalParams):
                    dists.append(discretize_lognormal(e.weight, grid))
                elif e.weight.grid == grid:
                    dists.append(e.weight)
                else:
                    raise ParameterError(
                        f"edge ({e.tail}, {e.head}) carries a distribution on another grid")
            masses = np.stack([d.mass for d in dists]) if dists else np.zeros((0, grid.bin_count))
            masses.setflags(write=False)
            cached = (dists, masses)
            self._grid_cache[grid] = cached
        return cached

    def edge_distribution(self, e: int, grid: TimeGrid) -> DiscreteDistribution:
        return self._discretized(grid)[0][e]

    def edge_distributions(self, grid: TimeGrid) -> List[DiscreteDistribution]:
        return self._discretized(grid)[0]

    def edge_masses(self, grid: TimeGrid) -> np.ndarray:
        """(m, bin_count) array of per-edge bin masses on ``grid``."""
        return self._discretized(grid)[1]

    def sample_weight(self, e: int, rng: np.random.Generator) -> float:
        w = self.edges[e].weight
        if isinstance(w, LogNormalParams):
            return math.exp(w.mu + w.sigma * rng.standard_normal())
        return sample(w, rng)

    def is_symmetric(self) -> bool:
        for e in self.edges:
            k = self._edge_ids.get((e.head, e.tail))
            if k is None or self.edges[k].length != e.length:
                return False
        return True


def euclidean_distance(net: SpatialNetwork, i: int, j: int) -> float:
    i, j = net.check_node(i), net.check_node(j)
    dx, dy = net.xy[i] - net.xy[j]
    return math.hypot(dx, dy)


def lattice_distance(net: SpatialNetwork, i: int, j: int) -> float:
    i, j = net.check_node(i), net.check_node(j)
    dx, dy = net.xy[i] - net.xy[j]
    return abs(dx) + abs(dy)


METRICS: Dict[str, Callable[[SpatialNetwork, int, int], float]] = {
    "euclidean": euclidean_distance,
    "lattice": lattice_distance,
}


def pairwise_metric(net: SpatialNetwork, source: int, metric: str = "euclidean") -> np.ndarray:
    """Distance from ``source`` to every node under ``metric``."""
    diff = net.xy - net.xy[net.check_node(source)]
    if metric == "euclidean":
        return np.hypot(diff[:, 0], diff[:, 1])
    if metric == "lattice":
        return np.abs(diff).sum(axis=1)
    raise ParameterError(f"unknown metric {metric!r}")


def network_distance(net: SpatialNetwork, source: int) -> np.ndarray:
    """Shortest along-edge length from ``source`` to every node (inf if unreachable).

    Label-setting search; heap entries are ``(distance, node)`` so equal
    distances settle the smaller node id first.
    """
    source = net.check_node(source)
    dist = np.full(net.n, math.inf)
    dist[source] = 0.0
    done = np.zeros(net.n, dtype=bool)
    heap = [(0.0, source)]
    heads, lengths, offsets = net.heads, net.lengths, net.offsets
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for e in range(offsets[u], offsets[u + 1]):
            v = heads[e]
            nd = d + lengths[e]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, int(v)))
    return dist


# ---------------------------------------------------------------------------
# Kleinberg-variant generator
# ---------------------------------------------------------------------------

def shortcut_probabilities(side: int, i: int, metric: str = "lattice") -> np.ndarray:
    """Probability that node ``i`` of a ``side`` x ``side`` lattice draws each shortcut destination.

    Proportional to the inverse squared distance (lattice by default, or
    Euclidean); zero for ``i`` itself.
    """
    xs, ys = np.meshgrid(np.arange(side), np.arange(side))
    xs, ys = xs.ravel(), ys.ravel()
    if metric == "lattice":
        D = np.abs(xs - xs[i]) + np.abs(ys - ys[i])
    elif metric == "euclidean":
        D = np.hypot(xs - xs[i], ys - ys[i])
    else:
        raise ParameterError(f"unknown metric {metric!r}")
    w = np.zeros(side * side)
    mask = D > 0
    w[mask] = 1.0 / D[mask].astype(float) ** 2
    return w / w.sum()


def generate_kleinberg_variant(side: int, rng: np.random.Generator,
                               mu_range: Tuple[float, float] = (0.5, 1.5),
                               sigma_range: Tuple[float, float] = (0.5, 1.5),
                               shortcut_metric: str = "lattice") -> SpatialNetwork:
    """Square lattice plus one undirected long-range link per node.

    Node ``y * side + x`` sits at integer coordinates ``(x, y)``. Each node
    draws one shortcut destination with probability proportional to
    ``1 / D**2`` (``shortcut_metric`` distance); a draw duplicating an existing link is
    dropped, not redrawn. Grid links have length 1, shortcuts their
    Euclidean length. Every undirected link gets log-normal parameters with
    ``mu`` and ``sigma`` drawn uniformly from the given ranges.
    """
    if int(side) != side or side < 2:
        raise ParameterError(f"side must be an integer >= 2, got {side}")
    side = int(side)
    n = side * side
    nodes = [SpatialNode(y * side + x, float(x), float(y)) for y in range(side) for x in range(side)]
    links = set()
    for y in range(side):
        for x in range(side):
            i = y * side + x
            if x + 1 < side:
                links.add((i, i + 1))
            if y + 1 < side:
                links.add((i, i + side))
    for i in range(n):
        j = int(rng.choice(n, p=shortcut_probabilities(side, i, shortcut_metric)))
        key = (min(i, j), max(i, j))
        if key not in links:
            links.add(key)
    edges = []
    for a, b in sorted(links):
        mu = rng.uniform(*mu_range)
        sigma = rng.uniform(*sigma_range)
        params = LogNormalParams(float(mu), float(sigma))
        dx, dy = nodes[a].x - nodes[b].x, nodes[a].y - nodes[b].y
        length = 1.0 if abs(dx) + abs(dy) == 1 else math.hypot(dx, dy)
        edges.append(StochasticEdge(a, b, length, params))
        edges.append(StochasticEdge(b, a, length, params))
    return SpatialNetwork(nodes, edges)


# ---------------------------------------------------------------------------
# TNTP-style files
# ---------------------------------------------------------------------------

@dataclass
class EdgeRow:
    """One parsed edge line, handed to ``WeightRule.mapper`` hooks."""
    tail: int
    head: int
    length: float
    columns: Dict[str, str] = field(default_factory=dict)


@dataclass
class WeightRule:
    """How edge weight laws are assigned to loaded edges.

    By default ``mu`` and ``sigma`` are drawn uniformly from the configured
    intervals with a generator seeded by ``seed``. ``mapper`` overrides the
    draw, e.g. ``lambda row, rng: LogNormalParams(math.log(float(row.columns['free_flow_time'])), 0.5)``.
    """
    mu_range: Tuple[float, float] = (0.5, 1.5)
    sigma_range: Tuple[float, float] = (0.5, 1.5)
    seed: int = 0
    coord_scale: float = 1.0
    length_scale: float = 1.0
    use_file_lengths: bool = True
    mapper: Optional[Callable[[EdgeRow, np.random.Generator], LogNormalParams]] = None


_META = re.compile(r"^<[^>]*>")


def _tntp_lines(path: Path):
    """Yield ``(lineno, tokens, header)`` for data lines; ``header`` is the latest ``~`` column line."""
    header = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or _META.match(line):
                continue
            if line.startswith("~"):
                cols = line[1:].replace(";", " ").split()
                if cols:
                    header = [c.lower() for c in cols]
                continue
            line = line.rstrip(";").strip()
            if not line:
                continue
            yield lineno, line.split(), header


def _number(tok: str, path, lineno):
    try:
        return float(tok)
    except ValueError:
        raise TNTPParseError(path, lineno, f"expected a number, got {tok!r}") from None


def load_tntp(node_file, edge_file, weight_rule: Optional[WeightRule] = None) -> SpatialNetwork:
    """Read a node file (``id x y``) and an edge file (``tail head [length ...]``).

    Comment lines start with ``~``; a ``~`` line naming columns is used to
    locate ``init_node``/``term_node``/``length``. Metadata lines like
    ``<NUMBER OF NODES> 542`` are skipped, as is a leading column-title row
    in the node file. File node ids are relabelled to ``0..n-1`` in
    increasing order; originals are kept in ``net.labels``.
    """
    rule = weight_rule or WeightRule()
    node_file, edge_file = Path(node_file), Path(edge_file)

    raw_nodes = {}
    first = True
    for lineno, toks, _ in _tntp_lines(node_file):
        if first and not _is_number(toks[0]):
            first = False
            continue
        first = False
        if len(toks) < 3:
            raise TNTPParseError(node_file, lineno, "node line needs 'id x y'")
        ident = _number(toks[0], node_file, lineno)
        if ident != int(ident):
            raise TNTPParseError(node_file, lineno, f"node id {toks[0]!r} is not an integer")
        if int(ident) in raw_nodes:
            raise TNTPParseError(node_file, lineno, f"duplicate node id {int(ident)}")
        raw_nodes[int(ident)] = (_number(toks[1], node_file, lineno) * rule.coord_scale,
                                 _number(toks[2], node_file, lineno) * rule.coord_scale)
    labels = sorted(raw_nodes)
    index = {lab: k for k, lab in enumerate(labels)}
    nodes = [SpatialNode(k, *raw_nodes[lab]) for k, lab in enumerate(labels)]

    rows: List[EdgeRow] = []
    seen = set()
    for lineno, toks, header in _tntp_lines(edge_file):
        if header and "init_node" in header and "term_node" in header:
            ti, hi = header.index("init_node"), header.index("term_node")
            li = header.index("length") if "length" in header else None
        else:
            ti, hi, li = 0, 1, 2
        if len(toks) <= max(ti, hi):
            raise TNTPParseError(edge_file, lineno, "edge line needs 'tail head'")
        a, b = _number(toks[ti], edge_file, lineno), _number(toks[hi], edge_file, lineno)
        for endpoint in (a, b):
            if endpoint not in index:
                raise IntegrityError(f"{edge_file}:{lineno}: edge endpoint {endpoint:g} is not a known node")
        tail, head = index[int(a)], index[int(b)]
        if tail == head:
            log.warning("%s:%d: skipping self-loop at node %s", edge_file, lineno, labels[tail])
            continue
        if (tail, head) in seen:
            log.warning("%s:%d: skipping duplicate edge (%s, %s)", edge_file, lineno, labels[tail], labels[head])
            continue
        seen.add((tail, head))
        if rule.use_file_lengths and li is not None and li < len(toks):
            length = _number(toks[li], edge_file, lineno) * rule.length_scale
        else:
            dx, dy = nodes[tail].x - nodes[head].x, nodes[tail].y - nodes[head].y
            length = math.hypot(dx, dy)
        cols = dict(zip(header, toks)) if header else {}
        rows.append(EdgeRow(tail, head, length, cols))

    rng = np.random.default_rng(rule.seed)
    edges = []
    for row in rows:
        if rule.mapper is not None:
            params = rule.mapper(row, rng)
        else:
            params = LogNormalParams(float(rng.uniform(*rule.mu_range)), float(rng.uniform(*rule.sigma_range)))
        edges.append(StochasticEdge(row.tail, row.head, row.length, params))
    return SpatialNetwork(nodes, edges, labels=labels)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def write_tntp(net: SpatialNetwork, node_file, edge_file) -> None:
    """Write ``net`` in the format ``load_tntp`` reads, with weight parameters as extra columns."""
    with open(node_file, "w") as fh:
        fh.write("~ node x y\n")
        for v in net.nodes:
            fh.write(f"{net.labels[v.id]} {v.x!r} {v.y!r} ;\n")
    with open(edge_file, "w") as fh:
        fh.write(f"<NUMBER OF NODES> {net.n}\n<NUMBER OF LINKS> {net.m}\n<END OF METADATA>\n")
        fh.write("~ init_node term_node length mu sigma ;\n")
        for e in net.edges:
            w = e.weight
            mu, sigma = (w.mu, w.sigma) if isinstance(w, LogNormalParams) else (math.nan, math.nan)
            fh.write(f"{net.labels[e.tail]} {net.labels[e.head]} {e.length!r} {mu!r} {sigma!r} ;\n")


def lognormal_from_columns(row: EdgeRow, rng: np.random.Generator) -> LogNormalParams:
    """Mapper reading ``mu``/``sigma`` columns, as written by ``write_tntp``."""
    return LogNormalParams(float(row.columns["mu"]), float(row.columns["sigma"]))
