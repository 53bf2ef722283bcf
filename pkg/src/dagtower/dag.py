"""Labeled DAGs over vertices 1..n stored as out/in bit rows.

Bit ``v - 1`` of a row stands for vertex ``v``. Rows are plain Python ints, so
subset and intersection tests on neighbourhoods are single big-int operations.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import comb
from typing import Iterable, Iterator

import numpy as np

MAX_VERTICES = 4096
MAX_ENUMERATE = 6


class DagError(ValueError):
    pass


def _bits(x: int) -> Iterator[int]:
    """Yield 0-based indices of set bits, lowest first."""
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def _pack_rows(adj: np.ndarray) -> list[int]:
    packed = np.packbits(adj, axis=1, bitorder="little")
    return [int.from_bytes(r.tobytes(), "little") for r in packed]


def _popcount(x: int) -> int:
    return bin(x).count("1")


class Dag:
    """Immutable labeled DAG. Construct with :meth:`from_edges` or :meth:`from_matrix`."""

    __slots__ = ("n", "out_rows", "__dict__")

    def __init__(self, n: int, out_rows: Iterable[int], check: bool = True):
        rows = tuple(out_rows)
        if len(rows) != n:
            raise DagError(f"expected {n} rows, got {len(rows)}")
        self.n = n
        self.out_rows = rows
        if check:
            if not 0 <= n <= MAX_VERTICES:
                raise DagError(f"vertex count {n} outside [0, {MAX_VERTICES}]")
            full = (1 << n) - 1
            for i, row in enumerate(rows):
                if row & ~full:
                    raise DagError(f"row {i + 1} points outside [1, {n}]")
                if row >> i & 1:
                    raise DagError(f"self-loop at {i + 1}")
            if topological_order(rows) is None:
                raise DagError("graph has a directed cycle")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Dag":
        rows = [0] * n
        for u, v in edges:
            if not (1 <= u <= n and 1 <= v <= n):
                raise DagError(f"edge ({u}, {v}) outside [1, {n}]")
            rows[u - 1] |= 1 << (v - 1)
        return cls(n, rows)

    @classmethod
    def from_matrix(cls, adj: np.ndarray, check: bool = False) -> "Dag":
        """Build from a boolean matrix with ``adj[u, v]`` meaning u->v (0-based)."""
        n = adj.shape[0]
        if n == 0:
            return cls(0, ())
        adj = np.asarray(adj, dtype=bool)
        g = cls(n, _pack_rows(adj), check=check)
        g.__dict__["in_rows"] = tuple(_pack_rows(adj.T))
        return g

    def to_matrix(self) -> np.ndarray:
        nbytes = (self.n + 7) // 8
        buf = b"".join(r.to_bytes(nbytes, "little") for r in self.out_rows)
        packed = np.frombuffer(buf, dtype=np.uint8).reshape(self.n, nbytes)
        return np.unpackbits(packed, axis=1, count=self.n, bitorder="little").astype(bool)

    @cached_property
    def in_rows(self) -> tuple[int, ...]:
        rows = [0] * self.n
        for u, row in enumerate(self.out_rows):
            for v in _bits(row):
                rows[v] |= 1 << u
        return tuple(rows)

    @cached_property
    def adj_rows(self) -> tuple[int, ...]:
        return tuple(o | i for o, i in zip(self.out_rows, self.in_rows))

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(u + 1, v + 1) for u, row in enumerate(self.out_rows) for v in _bits(row)]

    @property
    def num_edges(self) -> int:
        return sum(_popcount(r) for r in self.out_rows)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.out_rows[u - 1] >> (v - 1) & 1)

    def parents(self, v: int) -> list[int]:
        return [u + 1 for u in _bits(self.in_rows[v - 1])]

    def children(self, v: int) -> list[int]:
        return [w + 1 for w in _bits(self.out_rows[v - 1])]

    def reversed(self) -> "Dag":
        return Dag(self.n, self.in_rows, check=False)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Dag) and self.n == other.n and self.out_rows == other.out_rows

    def __hash__(self) -> int:
        return hash((self.n, self.out_rows))

    def __repr__(self) -> str:
        return f"Dag(n={self.n}, edges={self.edges})"


@dataclass(frozen=True, order=True)
class VStructure:
    """Collider ``a -> c <- b`` with ``a < b`` and a, b nonadjacent."""

    a: int
    b: int
    c: int


def topological_order(out_rows: tuple[int, ...] | list[int]) -> list[int] | None:
    """Kahn order on 0-based vertices, or None when a cycle exists."""
    n = len(out_rows)
    indeg = [0] * n
    for row in out_rows:
        for v in _bits(row):
            indeg[v] += 1
    stack = [v for v in range(n) if indeg[v] == 0]
    order = []
    while stack:
        u = stack.pop()
        order.append(u)
        for v in _bits(out_rows[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    return order if len(order) == n else None


def is_acyclic(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    """True iff the digraph on [n] with the given 1-based edges has no directed cycle."""
    rows = [0] * n
    for u, v in edges:
        if u == v:
            raise DagError(f"self-loop at {u}")
        rows[u - 1] |= 1 << (v - 1)
    return topological_order(rows) is not None


def _descendant_closure(rows: list[int], seeds: int) -> int:
    reach = seeds
    frontier = seeds
    while frontier:
        nxt = 0
        for v in _bits(frontier):
            nxt |= rows[v]
        frontier = nxt & ~reach
        reach |= nxt
    return reach


def enumerate_dags(n: int) -> Iterator[Dag]:
    """Yield every labeled DAG on [n] exactly once.

    Vertex k+1 is attached to a DAG on [k] with an out-set O and an in-set I;
    the extension stays acyclic iff I avoids O and everything reachable from O.
    """
    if n < 0:
        raise DagError("n must be non-negative")
    if n > MAX_ENUMERATE:
        raise DagError(f"enumerate_dags refuses n={n} > {MAX_ENUMERATE}")

    def extend(rows: list[int], k: int) -> Iterator[list[int]]:
        if k == n:
            yield rows
            return
        full = (1 << k) - 1
        new_bit = 1 << k
        for out_set in range(full + 1):
            blocked = _descendant_closure(rows, out_set)
            free = full & ~blocked
            sub = free
            while True:
                child = [r | new_bit if (sub >> i) & 1 else r for i, r in enumerate(rows)]
                child.append(out_set)
                yield from extend(child, k + 1)
                if sub == 0:
                    break
                sub = (sub - 1) & free

    for rows in extend([], 0):
        yield Dag(n, rows, check=False)


@lru_cache(maxsize=None)
def count_dags(n: int) -> int:
    """Number of labeled DAGs on n vertices (inclusion-exclusion over the sink set)."""
    if n < 0:
        raise DagError("n must be non-negative")
    if n == 0:
        return 1
    return sum((-1) ** (k + 1) * comb(n, k) * 2 ** (k * (n - k)) * count_dags(n - k)
               for k in range(1, n + 1))


def skeleton(g: Dag) -> set[frozenset[int]]:
    return {frozenset((u, v)) for u, v in g.edges}


def v_structures(g: Dag) -> set[VStructure]:
    found = set()
    adj = g.adj_rows
    for c in range(g.n):
        parents = g.in_rows[c]
        for a in _bits(parents):
            # parents of c above a that are not adjacent to a
            rest = parents & ~adj[a] & ~((1 << (a + 1)) - 1)
            for b in _bits(rest):
                found.add(VStructure(a + 1, b + 1, c + 1))
    return found


def collider_rows(g: Dag) -> tuple[int, ...]:
    """Per tail u, the bit row of heads v such that u->v lies in a v-structure."""
    adj = g.adj_rows
    out = [0] * g.n
    for v in range(g.n):
        parents = g.in_rows[v]
        for u in _bits(parents):
            if parents & ~adj[u] & ~(1 << u):
                out[u] |= 1 << v
    return tuple(out)


def non_collider_edges(g: Dag) -> tuple[set[tuple[int, int]], set[int]]:
    """Edges in no v-structure, and the vertices touching them."""
    coll = collider_rows(g)
    edges = set()
    for u, row in enumerate(g.out_rows):
        for v in _bits(row & ~coll[u]):
            edges.add((u + 1, v + 1))
    verts = {x for e in edges for x in e}
    return edges, verts


@dataclass(frozen=True)
class ReachPoset:
    """Strict reachability order: ``below[v]`` holds every w with a directed path w -> v."""

    n: int
    below: tuple[int, ...]
    covers: tuple[int, ...]

    @property
    def dom(self) -> tuple[int, ...]:
        return tuple(_popcount(b) for b in self.below)

    @property
    def cov(self) -> tuple[int, ...]:
        return tuple(_popcount(c) for c in self.covers)

    @property
    def sources(self) -> list[int]:
        return [v + 1 for v in range(self.n) if not self.below[v]]

    @property
    def sinks(self) -> list[int]:
        above = 0
        for b in self.below:
            above |= b
        return [v + 1 for v in range(self.n) if not above >> v & 1]

    def geq(self, v: int, w: int) -> bool:
        """v >= w strictly, i.e. w reaches v."""
        return bool(self.below[v - 1] >> (w - 1) & 1)


def reachability_poset(g: Dag) -> ReachPoset:
    order = topological_order(g.out_rows)
    below = [0] * g.n
    for v in order:
        for p in _bits(g.in_rows[v]):
            below[v] |= below[p] | (1 << p)
    covers = []
    for v in range(g.n):
        # w is covered by v iff w is below v and not below any other element below v
        indirect = 0
        for u in _bits(below[v]):
            indirect |= below[u]
        covers.append(below[v] & ~indirect)
    return ReachPoset(g.n, tuple(below), tuple(covers))


def poset_weight(p: ReachPoset) -> int:
    """Number of DAGs whose reachability poset is ``p``."""
    return 2 ** sum(d - c for d, c in zip(p.dom, p.cov))
