"""Graphs, graph families and stationary distributions.

Nodes are dense integer labels ``0..n-1``. A :class:`Graph` is validated on
construction (simple, undirected, connected) and is immutable afterwards.
"""
from __future__ import annotations

import itertools
import math
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GraphError",
    "DuplicateEdge",
    "SelfLoop",
    "Disconnected",
    "LabelOutOfRange",
    "InvalidParameters",
    "BipartiteGraph",
    "GraphFormatError",
    "MaxLengthExceeded",
    "Graph",
    "DistVector",
    "GraphFamily",
    "build_graph",
    "generate",
    "parse_family",
    "stationary_distribution",
    "two_coloring",
    "validate_for_walk",
    "read_graph",
    "write_graph",
    "parse_graph_text",
    "format_graph_text",
    "bfs_distances",
    "diameter",
    "default_max_length",
]


class GraphError(ValueError):
    """Base class for graph construction and validation errors."""


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class Disconnected(GraphError):
    pass


class LabelOutOfRange(GraphError):
    pass


class InvalidParameters(GraphError):
    pass


class GraphFormatError(GraphError):
    pass


class MaxLengthExceeded(RuntimeError):
    """No walk length up to the safety cap got within epsilon.

    ``estimate`` optionally carries a partial result (used by the protocol
    driver to expose its probe log).
    """

    def __init__(self, message: str, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class BipartiteGraph(GraphError):
    """Raised when a plain (non-lazy) walk is requested on a bipartite graph.

    ``coloring`` is a proper 2-coloring witnessing bipartiteness.
    """

    def __init__(self, coloring: Sequence[int]):
        self.coloring = tuple(coloring)
        super().__init__(
            "graph is bipartite; the simple walk is periodic (use the lazy walk)"
        )


@dataclass(frozen=True)
class Graph:
    n: int
    m: int
    adjacency: tuple[tuple[int, ...], ...]
    degrees: tuple[int, ...]

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as ``(u, v)`` with ``u < v``, sorted."""
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    def directed_edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u]]

    def has_edge(self, u: int, v: int) -> bool:
        if not (0 <= u < self.n and 0 <= v < self.n):
            return False
        nbrs = self.adjacency[u]
        i = bisect_left(nbrs, v)
        return i < len(nbrs) and nbrs[i] == v


@dataclass(frozen=True)
class DistVector:
    """Probability vector of exact rationals."""

    entries: tuple[Fraction, ...]

    def __post_init__(self):
        if any(p < 0 for p in self.entries):
            raise ValueError("negative probability entry")
        if sum(self.entries, Fraction(0)) != 1:
            raise ValueError("entries do not sum to 1")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> Fraction:
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def l1_distance(self, other: DistVector | Sequence[Fraction]) -> Fraction:
        return sum((abs(a - b) for a, b in zip(self.entries, other)), Fraction(0))


def build_graph(edges: Iterable[tuple[int, int]], n: int) -> Graph:
    """Validate an edge list on nodes ``0..n-1`` and build a :class:`Graph`."""
    if n < 1:
        raise InvalidParameters("graph needs at least one node")
    nbrs: list[set[int]] = [set() for _ in range(n)]
    m = 0
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise LabelOutOfRange(f"edge ({u}, {v}) outside 0..{n - 1}")
        if u == v:
            raise SelfLoop(f"self-loop at node {u}")
        if v in nbrs[u]:
            raise DuplicateEdge(f"edge ({min(u, v)}, {max(u, v)}) given twice")
        nbrs[u].add(v)
        nbrs[v].add(u)
        m += 1
    if n < 2:
        raise InvalidParameters("a walk graph needs at least two nodes")
    adjacency = tuple(tuple(sorted(s)) for s in nbrs)
    dist = _bfs(adjacency, 0)
    missing = [v for v in range(n) if dist[v] < 0]
    if missing:
        raise Disconnected(f"nodes unreachable from 0: {missing[:10]}")
    return Graph(n=n, m=m, adjacency=adjacency, degrees=tuple(len(a) for a in adjacency))


def _bfs(adjacency: Sequence[Sequence[int]], root: int) -> list[int]:
    dist = [-1] * len(adjacency)
    dist[root] = 0
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def bfs_distances(g: Graph, root: int) -> list[int]:
    """Hop distances from ``root`` (centralized; used for checks and reports)."""
    return _bfs(g.adjacency, root)


def default_max_length(n: int) -> int:
    """Safety cap on walk lengths: ``n**3 * ceil(log2 n)``."""
    return n**3 * max(1, math.ceil(math.log2(n)))


def diameter(g: Graph) -> int:
    return max(max(_bfs(g.adjacency, v)) for v in range(g.n))


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

FAMILIES = ("complete", "cycle", "lollipop", "barbell", "hypercube", "petersen", "erdos_renyi")

_ER_MAX_TRIES = 1000


@dataclass(frozen=True)
class GraphFamily:
    """A named family plus its parameters, e.g. ``GraphFamily("lollipop", (4, 4))``.

    Parameters are integers except for ``erdos_renyi`` whose second parameter
    is the edge probability as a :class:`~fractions.Fraction`.
    """

    name: str
    params: tuple = ()

    def __str__(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}:{','.join(str(p) for p in self.params)}"


def parse_family(text: str) -> GraphFamily:
    """Parse ``NAME`` or ``NAME:P1,P2`` (rationals as ``num/den``)."""
    name, _, rest = text.partition(":")
    name = name.strip()
    if name not in FAMILIES:
        raise InvalidParameters(f"unknown graph family {name!r}")
    raw = [p.strip() for p in rest.split(",")] if rest.strip() else []
    params: list = []
    for i, p in enumerate(raw):
        if name == "erdos_renyi" and i == 1:
            if "/" not in p:
                raise InvalidParameters(f"edge probability must be num/den, got {p!r}")
            try:
                params.append(Fraction(p))
            except (ValueError, ZeroDivisionError) as exc:
                raise InvalidParameters(f"bad rational {p!r}") from exc
        else:
            try:
                params.append(int(p))
            except ValueError as exc:
                raise InvalidParameters(f"bad integer parameter {p!r}") from exc
    return GraphFamily(name, tuple(params))


def _clique_edges(nodes: Sequence[int]) -> list[tuple[int, int]]:
    return list(itertools.combinations(nodes, 2))


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidParameters(msg)


def generate(family: GraphFamily, seed: int = 0) -> Graph:
    """Build a member of a graph family.

    lollipop(c, p) is a clique on nodes ``0..c-1`` with a path of ``p`` extra
    nodes ``c..c+p-1`` hanging off node ``c-1``. barbell(c[, p]) joins two
    c-cliques through a path of ``p`` nodes (a single bridge edge for p = 0).
    Only erdos_renyi(n, p) uses ``seed``; it resamples until connected.
    """
    name, params = family.name, family.params

    def nparams(*allowed: int) -> None:
        _require(len(params) in allowed, f"{name} takes {allowed} parameters, got {len(params)}")

    if name == "complete":
        nparams(1)
        (n,) = params
        _require(n >= 2, "complete(n) needs n >= 2")
        return build_graph(_clique_edges(range(n)), n)
    if name == "cycle":
        nparams(1)
        (n,) = params
        _require(n >= 3, "cycle(n) needs n >= 3")
        return build_graph([(i, (i + 1) % n) for i in range(n)], n)
    if name == "lollipop":
        nparams(2)
        c, p = params
        _require(c >= 2 and p >= 0, "lollipop(c, p) needs c >= 2, p >= 0")
        edges = _clique_edges(range(c))
        edges += [(c - 1 + i, c + i) for i in range(p)]
        return build_graph(edges, c + p)
    if name == "barbell":
        nparams(1, 2)
        c, p = (params[0], params[1] if len(params) == 2 else 0)
        _require(c >= 2 and p >= 0, "barbell(c, p) needs c >= 2, p >= 0")
        left = list(range(c))
        path = list(range(c, c + p))
        right = list(range(c + p, 2 * c + p))
        chain = [c - 1] + path + [c + p]
        edges = _clique_edges(left) + _clique_edges(right)
        edges += list(zip(chain, chain[1:]))
        return build_graph(edges, 2 * c + p)
    if name == "hypercube":
        nparams(1)
        (k,) = params
        _require(k >= 1, "hypercube(k) needs k >= 1")
        n = 1 << k
        return build_graph([(u, u ^ (1 << b)) for u in range(n) for b in range(k) if u < u ^ (1 << b)], n)
    if name == "petersen":
        nparams(0)
        outer = [(i, (i + 1) % 5) for i in range(5)]
        spokes = [(i, i + 5) for i in range(5)]
        inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
        return build_graph(outer + spokes + inner, 10)
    if name == "erdos_renyi":
        nparams(2)
        n, p = params
        p = Fraction(p)
        _require(n >= 1 and 0 < p <= 1, "erdos_renyi(n, p) needs n >= 1, 0 < p <= 1")
        rng = np.random.default_rng(seed)
        pairs = _clique_edges(range(n))
        for _ in range(_ER_MAX_TRIES):
            # exact Bernoulli(p): uniform integer below the denominator
            draws = rng.integers(0, p.denominator, size=len(pairs))
            edges = [e for e, x in zip(pairs, draws) if x < p.numerator]
            try:
                return build_graph(edges, n)
            except Disconnected:
                continue
        raise InvalidParameters(
            f"erdos_renyi({n}, {p}) stayed disconnected after {_ER_MAX_TRIES} samples"
        )
    raise InvalidParameters(f"unknown graph family {name!r}")


# ---------------------------------------------------------------------------
# walk-related checks
# ---------------------------------------------------------------------------


def stationary_distribution(g: Graph) -> DistVector:
    """pi(v) = d(v) / 2m as exact rationals."""
    two_m = 2 * g.m
    return DistVector(tuple(Fraction(d, two_m) for d in g.degrees))


def two_coloring(g: Graph) -> list[int] | None:
    """A proper 2-coloring found by BFS, or ``None`` if the graph has an odd cycle."""
    color = [-1] * g.n
    for start in range(g.n):
        if color[start] >= 0:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in g.adjacency[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    queue.append(v)
                elif color[v] == color[u]:
                    return None
    return color


def validate_for_walk(g: Graph, lazy: bool = False) -> None:
    """Raise :class:`BipartiteGraph` unless the walk on ``g`` is aperiodic."""
    if lazy:
        return
    coloring = two_coloring(g)
    if coloring is not None:
        raise BipartiteGraph(coloring)


# ---------------------------------------------------------------------------
# text format: "n m" header, then m lines "u v" with u < v
# ---------------------------------------------------------------------------


def _parse_int(tok: str, lineno: int) -> int:
    if not tok.isdigit():
        raise GraphFormatError(f"line {lineno}: expected a decimal label, got {tok!r}")
    return int(tok)


def parse_graph_text(text: str) -> Graph:
    lines = text.splitlines()
    if not lines:
        raise GraphFormatError("empty graph file")
    header = lines[0].split(" ")
    if len(header) != 2:
        raise GraphFormatError("line 1: expected 'n m'")
    n, m = (_parse_int(t, 1) for t in header)
    body = lines[1:]
    if len(body) != m:
        raise GraphFormatError(f"header declares {m} edges, found {len(body)} edge lines")
    edges = []
    for lineno, line in enumerate(body, start=2):
        parts = line.split(" ")
        if len(parts) != 2:
            raise GraphFormatError(f"line {lineno}: expected 'u v'")
        u, v = (_parse_int(t, lineno) for t in parts)
        if not u < v:
            raise GraphFormatError(f"line {lineno}: edges must be written with u < v")
        edges.append((u, v))
    return build_graph(edges, n)


def format_graph_text(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"] + [f"{u} {v}" for u, v in g.edges]
    return "\n".join(lines) + "\n"


def read_graph(path: str | Path) -> Graph:
    return parse_graph_text(Path(path).read_text())


def write_graph(g: Graph, path: str | Path) -> None:
    Path(path).write_text(format_graph_text(g))
