"""Markov equivalence classes: essential graphs, chain components, class sizes."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dag import Dag, DagError, _bits, _popcount, non_collider_edges, topological_order, v_structures
from .tower import tower_decompose

DEFAULT_COMPONENT_CAP = 24
DEFAULT_EDGE_CAP = 24


class CapExceeded(DagError):
    """A computation was refused because its input exceeds a configured cap."""

    def __init__(self, message: str, reason: str, size: int, cap: int):
        super().__init__(message)
        self.reason = reason
        self.size = size
        self.cap = cap


def collider_rows_fast(g: Dag, adj: np.ndarray | None = None) -> tuple[int, ...]:
    """Collider-edge rows via one matrix product; same result as ``dag.collider_rows``.

    For an edge u->v the count (N @ A)[u, v] is the number of other parents of v
    not adjacent to u, where N marks non-adjacent pairs.
    """
    a = g.to_matrix() if adj is None else adj
    und = a | a.T
    non = ~und
    np.fill_diagonal(non, False)
    counts = non.astype(np.float32) @ a.astype(np.float32)
    coll = a & (counts > 0.5)
    return Dag.from_matrix(coll).out_rows


def _meek_closure(dpar: list[int], dchild: list[int], und: list[int], adj: list[int]) -> None:
    """Apply Meek rules R1-R3 in place until no undirected edge can be oriented."""
    changed = True
    while changed:
        changed = False
        for a in range(len(und)):
            for b in _bits(und[a]):
                if b < a:
                    continue
                if _forced(a, b, dpar, dchild, und, adj):
                    head, tail = b, a
                elif _forced(b, a, dpar, dchild, und, adj):
                    head, tail = a, b
                else:
                    continue
                und[a] &= ~(1 << b)
                und[b] &= ~(1 << a)
                dpar[head] |= 1 << tail
                dchild[tail] |= 1 << head
                changed = True


def _forced(a: int, b: int, dpar, dchild, und, adj) -> bool:
    """Whether the undirected edge a-b must be oriented a->b."""
    bbit = 1 << b
    # R1: c->a with c, b nonadjacent
    if dpar[a] & ~adj[b] & ~bbit:
        return True
    # R2: a->c->b
    if dchild[a] & dpar[b]:
        return True
    # R3: a-c->b and a-d->b with c, d nonadjacent
    both = und[a] & dpar[b]
    if both & (both - 1):
        for c in _bits(both):
            if both & ~adj[c] & ~(1 << c):
                return True
    return False


class EssentialGraph:
    """Partially directed graph of a Markov equivalence class (0-based rows inside)."""

    def __init__(self, n: int, dpar: list[int], und: list[int]):
        self.n = n
        self._dpar = tuple(dpar)
        self._und = tuple(und)

    @cached_property
    def directed(self) -> frozenset[tuple[int, int]]:
        return frozenset((u + 1, v + 1) for v, row in enumerate(self._dpar) for u in _bits(row))

    @cached_property
    def undirected(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset((a + 1, b + 1)) for a, row in enumerate(self._und)
                         for b in _bits(row) if a < b)

    @property
    def num_undirected(self) -> int:
        return sum(_popcount(r) for r in self._und) // 2

    def reversible_edges(self) -> list[list[int]]:
        return sorted(sorted(e) for e in self.undirected)

    def undirected_rows(self) -> tuple[int, ...]:
        return self._und


def cpdag(g: Dag, colliders: tuple[int, ...] | None = None) -> EssentialGraph:
    """Essential graph: v-structure edges seed the directed part, Meek rules close it."""
    coll = colliders if colliders is not None else _colliders(g)
    n = g.n
    und = [0] * n
    for u in range(n):
        for v in _bits(g.out_rows[u] & ~coll[u]):
            und[u] |= 1 << v
            und[v] |= 1 << u
    dpar = [row & ~u_row for row, u_row in zip(g.in_rows, und)]
    dchild = [row & ~u_row for row, u_row in zip(g.out_rows, und)]
    if any(und):
        _meek_closure(dpar, dchild, und, list(g.adj_rows))
    return EssentialGraph(n, dpar, und)


def _colliders(g: Dag) -> tuple[int, ...]:
    if g.n >= 64:
        return collider_rows_fast(g)
    from .dag import collider_rows

    return collider_rows(g)


@dataclass(frozen=True)
class ChainComponent:
    vertices: frozenset[int]
    edges: frozenset[frozenset[int]]

    def __len__(self) -> int:
        return len(self.vertices)


def chain_components(e: EssentialGraph) -> list[ChainComponent]:
    und = e.undirected_rows()
    seen = 0
    comps = []
    for start in range(e.n):
        if seen >> start & 1 or not und[start]:
            continue
        comp = 1 << start
        frontier = comp
        while frontier:
            nxt = 0
            for v in _bits(frontier):
                nxt |= und[v]
            frontier = nxt & ~comp
            comp |= nxt
        seen |= comp
        verts = frozenset(v + 1 for v in _bits(comp))
        edges = frozenset(frozenset((a + 1, b + 1)) for a in _bits(comp)
                          for b in _bits(und[a]) if a < b)
        comps.append(ChainComponent(verts, edges))
    comps.sort(key=lambda c: min(c.vertices))
    return comps


def _local_rows(c: ChainComponent) -> list[int]:
    index = {v: i for i, v in enumerate(sorted(c.vertices))}
    rows = [0] * len(index)
    for edge in c.edges:
        a, b = (index[x] for x in edge)
        rows[a] |= 1 << b
        rows[b] |= 1 << a
    return rows


def component_extension_count(c: ChainComponent, cap: int = DEFAULT_COMPONENT_CAP) -> int:
    """Number of acyclic orientations of the component with no v-structure.

    Each such orientation has a unique source. Fixing the source and closing
    under the Meek rules splits the rest into smaller components counted the
    same way; results are memoized by vertex set.
    """
    if len(c) > cap:
        raise CapExceeded(f"chain component of size {len(c)} exceeds cap {cap}",
                          "component_cap", len(c), cap)
    rows = _local_rows(c)
    memo: dict[int, int] = {}

    def count(mask: int) -> int:
        if mask & (mask - 1) == 0:
            return 1
        hit = memo.get(mask)
        if hit is not None:
            return hit
        verts = list(_bits(mask))
        k = len(verts)
        local = {v: i for i, v in enumerate(verts)}
        sub = [0] * k
        for v in verts:
            for w in _bits(rows[v] & mask):
                sub[local[v]] |= 1 << local[w]
        if all(_popcount(r) == k - 1 for r in sub):
            memo[mask] = math.factorial(k)
            return memo[mask]
        total = 0
        for root in range(k):
            und = list(sub)
            dpar = [0] * k
            dchild = [0] * k
            for w in _bits(und[root]):
                dchild[root] |= 1 << w
                dpar[w] |= 1 << root
                und[w] &= ~(1 << root)
            und[root] = 0
            _meek_closure(dpar, dchild, und, sub)
            prod = 1
            for comp in _components(und):
                prod *= count(sum(1 << verts[i] for i in _bits(comp)))
            total += prod
        memo[mask] = total
        return total

    return count((1 << len(rows)) - 1)


def _components(und: list[int]) -> list[int]:
    seen = 0
    out = []
    for s in range(len(und)):
        if seen >> s & 1 or not und[s]:
            continue
        comp = frontier = 1 << s
        while frontier:
            nxt = 0
            for v in _bits(frontier):
                nxt |= und[v]
            frontier = nxt & ~comp
            comp |= nxt
        seen |= comp
        out.append(comp)
    return out


def component_extension_count_brute(c: ChainComponent) -> int:
    """Oracle: try all 2^|E| orientations of the component on its own."""
    rows = _local_rows(c)
    k = len(rows)
    pairs = [(a, b) for a in range(k) for b in _bits(rows[a]) if a < b]
    if len(pairs) > DEFAULT_EDGE_CAP:
        raise CapExceeded(f"{len(pairs)} edges exceeds brute-force cap {DEFAULT_EDGE_CAP}",
                          "edge_cap", len(pairs), DEFAULT_EDGE_CAP)
    total = 0
    for flips in range(1 << len(pairs)):
        out = [0] * k
        for i, (a, b) in enumerate(pairs):
            if flips >> i & 1:
                out[b] |= 1 << a
            else:
                out[a] |= 1 << b
        if topological_order(out) is None:
            continue
        g = Dag(k, out, check=False)
        if not v_structures(g):
            total += 1
    return total


def mec_size(g: Dag, cap: int = DEFAULT_COMPONENT_CAP, essential: EssentialGraph | None = None) -> int:
    e = essential or cpdag(g)
    size = 1
    for comp in chain_components(e):
        size *= component_extension_count(comp, cap)
    return size


def mec_brute_force(g: Dag, cap: int = DEFAULT_EDGE_CAP) -> list[Dag]:
    """All DAGs sharing g's skeleton and v-structures, by trying every orientation."""
    pairs = sorted(tuple(sorted(e)) for e in _skeleton_pairs(g))
    if len(pairs) > cap:
        raise CapExceeded(f"{len(pairs)} edges exceeds brute-force cap {cap}", "edge_cap",
                          len(pairs), cap)
    target = v_structures(g)
    found = []
    for flips in range(1 << len(pairs)):
        out = [0] * g.n
        for i, (a, b) in enumerate(pairs):
            if flips >> i & 1:
                out[b - 1] |= 1 << (a - 1)
            else:
                out[a - 1] |= 1 << (b - 1)
        if topological_order(out) is None:
            continue
        cand = Dag(g.n, out, check=False)
        if v_structures(cand) == target:
            found.append(cand)
    return found


def _skeleton_pairs(g: Dag):
    return {frozenset(e) for e in g.edges}


def disagreement_edges(dags: list[Dag]) -> set[frozenset[int]]:
    """Skeleton pairs whose orientation differs somewhere in the list."""
    first = set(dags[0].edges)
    out = set()
    for other in dags[1:]:
        for u, v in first:
            if not other.has_edge(u, v):
                out.add(frozenset((u, v)))
    return out


def is_essential(g: Dag) -> bool:
    return cpdag(g).num_undirected == 0


def last_noncollider_layer(g: Dag) -> int:
    """Offset from the top layer of the lowest layer holding a non-collider edge head."""
    edges, _ = non_collider_edges(g)
    if not edges:
        return -1
    tower, h = tower_decompose(g)
    layer = tower.layer_of()
    top = len(h)
    return max(top - layer[v] for _, v in edges)


def mec_report(g: Dag, oracle: bool = False, cap: int = DEFAULT_COMPONENT_CAP) -> dict:
    e = cpdag(g)
    comps = chain_components(e)
    edges, verts = non_collider_edges(g)
    report = {
        "n": g.n,
        "mec_size": mec_size(g, cap, essential=e),
        "essential": e.num_undirected == 0,
        "reversible_edges": e.reversible_edges(),
        "chain_components": [sorted(c.vertices) for c in comps],
        "num_noncollider_edges": len(edges),
        "num_noncollider_vertices": len(verts),
        "L": last_noncollider_layer(g),
    }
    if oracle:
        members = mec_brute_force(g)
        report["oracle_mec_size"] = len(members)
        report["oracle_reversible_edges"] = sorted(sorted(p) for p in disagreement_edges(members))
    return report


def all_orientations(n: int, pairs):
    """Helper for tests: every orientation of the given 1-based pairs as edge lists."""
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        yield [(a, b) if s == 0 else (b, a) for (a, b), s in zip(pairs, bits)]
