"""Random agent graphs and token-traversal cycles.

Agents are labelled ``1..n``. A :class:`Cycle` is the closed route the token
follows; for shortest-path walks some positions are relay hops where the
holder forwards the token without updating.
"""

from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CsiAdmmError, GraphGenerationError, NoHamiltonianCycle

log = logging.getLogger(__name__)

MAX_GRAPH_TRIES = 1000


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset  # of (u, v) with u < v

    adjacency: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj = {v: [] for v in range(1, self.n + 1)}
        for u, v in self.edges:
            if u == v:
                raise CsiAdmmError(f"self-loop at agent {u}")
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "adjacency", {v: tuple(sorted(nb)) for v, nb in adj.items()})

    @classmethod
    def from_edges(cls, n, edges):
        return cls(n, frozenset((min(u, v), max(u, v)) for u, v in edges))

    @property
    def n_edges(self):
        return len(self.edges)

    def has_edge(self, u, v):
        return (min(u, v), max(u, v)) in self.edges

    def edge_list(self):
        return sorted(self.edges)

    def is_connected(self):
        return len(_bfs_parents(self, 1)) == self.n


@dataclass(frozen=True)
class Cycle:
    """Closed token route.

    ``order[p]`` is the agent holding the token at position ``p``; the walk
    closes with the hop ``order[-1] -> order[0]``. ``active[p]`` is False on
    relay positions.
    """

    order: tuple
    kind: str
    active: tuple = None

    def __post_init__(self):
        if self.active is None:
            object.__setattr__(self, "active", (True,) * len(self.order))

    def __len__(self):
        return len(self.order)

    @property
    def n_updates(self):
        return sum(self.active)

    def validate(self, g: Graph):
        hops = zip(self.order, self.order[1:] + self.order[:1])
        if len(self.order) > 1 and not all(g.has_edge(u, v) for u, v in hops):
            raise CsiAdmmError("cycle uses a non-edge")
        if set(self.order) != set(range(1, g.n + 1)):
            raise CsiAdmmError("cycle does not visit every agent")
        if self.kind == "hamiltonian" and len(self.order) != g.n:
            raise CsiAdmmError("hamiltonian cycle revisits an agent")


def target_edge_count(n, eta):
    return int(np.floor(n * (n - 1) / 2 * eta))


def generate_graph(n: int, eta: float, seed: int,
                   accept: Callable[[Graph], bool] | None = None) -> Graph:
    """Sample a connected graph with ``floor(n(n-1)/2 * eta)`` edges.

    Edge sets are drawn uniformly among all sets of that size; disconnected
    draws (or draws failing ``accept``) are rejected and redrawn with the next
    sub-seed, at most ``MAX_GRAPH_TRIES`` times.
    """
    if n < 2:
        raise CsiAdmmError(f"need at least 2 agents, got {n}")
    if not 0 < eta <= 1:
        raise CsiAdmmError(f"connectivity ratio must lie in (0, 1], got {eta}")
    n_edges = target_edge_count(n, eta)
    if n_edges < n - 1:
        log.warning("eta=%g gives %d edges for %d agents; raising to %d for connectivity",
                    eta, n_edges, n, n - 1)
        n_edges = n - 1
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    for attempt in range(MAX_GRAPH_TRIES):
        rng = np.random.default_rng((seed, attempt))
        picked = rng.choice(len(pairs), size=n_edges, replace=False)
        g = Graph(n, frozenset(pairs[i] for i in picked))
        if g.is_connected() and (accept is None or accept(g)):
            return g
    raise GraphGenerationError(
        f"no acceptable connected graph with n={n}, {n_edges} edges after {MAX_GRAPH_TRIES} tries")


def hamiltonian_cycle(g: Graph) -> Cycle:
    """Depth-first backtracking from agent 1, neighbours in ascending order."""
    n = g.n
    if n == 2:
        # the single edge traversed both ways
        if g.has_edge(1, 2):
            return Cycle((1, 2), "hamiltonian")
        raise NoHamiltonianCycle("graph is disconnected")
    if any(len(nb) < 2 for nb in g.adjacency.values()):
        raise NoHamiltonianCycle("an agent has degree < 2")

    path = [1]
    visited = [False] * (n + 1)
    visited[1] = True
    # explicit stack of neighbour iterators keeps deep graphs off the recursion limit
    stack = [iter(g.adjacency[1])]
    while stack:
        advanced = False
        for nb in stack[-1]:
            if visited[nb]:
                continue
            path.append(nb)
            visited[nb] = True
            if len(path) == n:
                if g.has_edge(nb, 1):
                    return Cycle(tuple(path), "hamiltonian")
                visited[path.pop()] = False
                continue
            stack.append(iter(g.adjacency[nb]))
            advanced = True
            break
        if not advanced:
            stack.pop()
            if len(path) > 1:
                visited[path.pop()] = False
    raise NoHamiltonianCycle(f"exhaustive search found no hamiltonian cycle on {n} agents")


def has_hamiltonian_cycle(g: Graph) -> bool:
    try:
        hamiltonian_cycle(g)
    except NoHamiltonianCycle:
        return False
    return True


def _bfs_parents(g, source):
    parents = {source: None}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if v not in parents:
                parents[v] = u
                queue.append(v)
    return parents


def shortest_path(g: Graph, src: int, dst: int) -> list:
    parents = _bfs_parents(g, src)
    if dst not in parents:
        raise CsiAdmmError(f"agent {dst} unreachable from {src}")
    path = [dst]
    while path[-1] != src:
        path.append(parents[path[-1]])
    return path[::-1]


def shortest_path_cycle(g: Graph, seed: int | None = None) -> Cycle:
    """Closed walk visiting agents in ascending id order via BFS shortest paths.

    ``seed`` is accepted for interface symmetry; the construction is fully
    deterministic.
    """
    if not g.is_connected():
        raise CsiAdmmError("graph is disconnected")
    targets = list(range(1, g.n + 1))
    order, active = [], []
    for src, dst in zip(targets, targets[1:] + targets[:1]):
        path = shortest_path(g, src, dst)
        order.append(src)
        active.append(True)
        for relay in path[1:-1]:
            order.append(relay)
            active.append(False)
    return Cycle(tuple(order), "shortest-path-walk", tuple(active))


def make_cycle(g: Graph, kind: str, seed: int | None = None) -> Cycle:
    if kind == "hamiltonian":
        return hamiltonian_cycle(g)
    if kind in ("shortest-path", "shortest-path-walk"):
        return shortest_path_cycle(g, seed)
    raise CsiAdmmError(f"unknown cycle kind {kind!r}")
