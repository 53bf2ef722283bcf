"""Tower decomposition, tower-vector weights and the exact uniform DAG sampler.

Layer 1 holds the sinks; layer i+1 holds the sinks left after removing layers
1..i. A uniform DAG is drawn in two stages: its layer-size vector from a
dynamic program over (sites still unplaced, size of the previous layer), then
the edges given the vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .dag import Dag, DagError, _bits, count_dags

START = 0  # previous-layer marker before the sink layer is placed


@dataclass(frozen=True)
class Tower:
    """Layer assignment plus the edges between adjacent layers only.

    ``layers[i]`` lists the 1-based labels of layer i+1. ``edges`` holds u->v with
    u in layer i and v in layer i-1.
    """

    n: int
    layers: tuple[tuple[int, ...], ...]
    edges: frozenset[tuple[int, int]]

    @property
    def vector(self) -> tuple[int, ...]:
        return tuple(len(layer) for layer in self.layers)

    @property
    def height(self) -> int:
        return len(self.layers)

    def layer_of(self) -> dict[int, int]:
        return {v: i + 1 for i, layer in enumerate(self.layers) for v in layer}

    def key(self) -> tuple:
        return (tuple(tuple(sorted(layer)) for layer in self.layers), tuple(sorted(self.edges)))


def tower_decompose(g: Dag) -> tuple[Tower, tuple[int, ...]]:
    """Peel sinks repeatedly; return the tower and its layer-size vector."""
    if g.n == 0:
        raise DagError("tower decomposition needs at least one vertex")
    remaining = (1 << g.n) - 1
    layer_bits = []
    while remaining:
        sinks = 0
        for v in _bits(remaining):
            if not g.out_rows[v] & remaining:
                sinks |= 1 << v
        layer_bits.append(sinks)
        remaining &= ~sinks
    edges = set()
    for i in range(1, len(layer_bits)):
        below = layer_bits[i - 1]
        for u in _bits(layer_bits[i]):
            for v in _bits(g.out_rows[u] & below):
                edges.add((u + 1, v + 1))
    layers = tuple(tuple(v + 1 for v in _bits(b)) for b in layer_bits)
    tower = Tower(g.n, layers, frozenset(edges))
    return tower, tower.vector


def tower_dag_count(t: Tower) -> int:
    """Number of DAGs whose tower is ``t``.

    A vertex in layer i keeps its tower edges into layer i-1 fixed and may point
    to any site in layers 1..i-2 freely, so it contributes 2^(sites two or more
    layers below).
    """
    exponent = 0
    below = 0
    sizes = t.vector
    for i, size in enumerate(sizes):
        if i >= 1:
            exponent += size * (below - sizes[i - 1])
        below += size
    return 2 ** exponent


def compositions(n: int, min_part: int = 1) -> Iterator[tuple[int, ...]]:
    """All compositions of n into parts >= min_part (the empty one when n == 0)."""
    if n == 0:
        yield ()
        return
    for first in range(min_part, n + 1):
        for rest in compositions(n - first, min_part):
            yield (first,) + rest


def _check_vector(h: Sequence[int], n: int | None = None) -> tuple[int, ...]:
    h = tuple(int(x) for x in h)
    if not h or any(x < 1 for x in h):
        raise DagError(f"tower vector must have positive entries: {h}")
    if n is not None and sum(h) != n:
        raise DagError(f"tower vector {h} has size {sum(h)}, expected {n}")
    return h


def tower_vector_count(h: Sequence[int]) -> int:
    """Number of labeled DAGs with layer-size vector h."""
    h = _check_vector(h)
    n = sum(h)
    total = math.factorial(n)
    for x in h:
        total //= math.factorial(x)
    placed = 0
    for i, x in enumerate(h):
        if i >= 1:
            p = h[i - 1]
            # 2^(x * placed) * (1 - 2^-p)^x, kept integral
            total *= 2 ** (x * (placed - p)) * (2 ** p - 1) ** x
        placed += x
    return total


def tower_vector_weight(h: Sequence[int], n: int) -> Fraction:
    """Probability that a uniform DAG on n vertices has layer-size vector h."""
    h = _check_vector(h, n)
    return Fraction(tower_vector_count(h), count_dags(n))


def regeneration_points(h: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """1-based indices of single-site layers, and their count."""
    taus = tuple(i + 1 for i, x in enumerate(h) if x == 1)
    return taus, len(taus)


# ---------------------------------------------------------------------------
# layer-size dynamic program

def _log2_binom(m: int, x: np.ndarray) -> np.ndarray:
    from scipy.special import gammaln

    return (gammaln(m + 1) - gammaln(x + 1) - gammaln(m - x + 1)) / math.log(2)


@dataclass
class LayerDp:
    """Completion weights Z(m, p) for m unplaced sites after a layer of size p.

    In exact mode ``table[m][p]`` is the integer number of ways to finish a
    labeled DAG; in float mode ``table[m, p]`` is log2 of that number. Column 0
    is the START state (no layer placed yet), so ``Z(n, START) = |D_n|``.
    """

    n: int
    exact: bool
    table: object
    _cdf_cache: dict = field(default_factory=dict, repr=False)

    def z(self, m: int, p: int):
        return self.table[m][p]

    def _terms(self, m: int, p: int):
        """Per-x weights of choosing the next layer size x at state (m, p)."""
        a = self.n - m
        if self.exact:
            out = []
            for x in range(1, m + 1):
                f = math.comb(m, x)
                if p != START:
                    f *= 2 ** (x * (a - p)) * (2 ** p - 1) ** x
                out.append(f * self.table[m - x][x])
            return out
        xs = np.arange(1, m + 1)
        logs = _log2_binom(m, xs)
        if p != START:
            logs = logs + xs * (a - p) + xs * math.log2(2.0 ** p - 1.0)
        logs = logs + self.table[m - xs, xs]
        return logs

    def choice_distribution(self, m: int, p: int):
        """Exact: list of Fractions. Float: numpy array of probabilities."""
        terms = self._terms(m, p)
        if self.exact:
            total = sum(terms)
            return [Fraction(t, total) for t in terms]
        probs = np.exp2(terms - terms.max())
        return probs / probs.sum()

    def _cdf(self, m: int, p: int) -> np.ndarray:
        key = (m, p)
        cdf = self._cdf_cache.get(key)
        if cdf is None:
            probs = self.choice_distribution(m, p)
            # probabilities below 2^-64 of the total are beyond double resolution
            keep = np.nonzero(probs >= 2.0 ** -64)[0]
            probs = probs[: keep[-1] + 1]
            cdf = np.cumsum(probs)
            cdf /= cdf[-1]
            self._cdf_cache[key] = cdf
        return cdf


def build_layer_dp(n: int, exact: bool = False) -> LayerDp:
    if n < 1:
        raise DagError("n must be at least 1")
    if exact:
        table: list[list[int]] = [[1] * (n + 1)]
        for m in range(1, n + 1):
            a = n - m
            row = [0] * (n + 1)
            for p in range(0, a + 1 if a else 1):
                total = 0
                for x in range(1, m + 1):
                    f = math.comb(m, x)
                    if p != START:
                        f *= 2 ** (x * (a - p)) * (2 ** p - 1) ** x
                    total += f * table[m - x][x]
                row[p] = total
            table.append(row)
        return LayerDp(n, True, table)

    table_f = np.full((n + 1, n + 1), -np.inf)
    table_f[0, :] = 0.0
    ps = np.arange(1, n + 1)
    log_fill = np.log2(1.0 - np.exp2(-ps.astype(float)))
    for m in range(1, n + 1):
        a = n - m
        xs = np.arange(1, m + 1)
        base = _log2_binom(m, xs) + table_f[m - xs, xs]
        # START column: first layer, no constraint below
        table_f[m, 0] = _logsumexp2(base)
        if a == 0:
            continue
        pmax = a
        # terms[p, x] = base[x] + x*a + x*log2(1 - 2^-p)
        terms = base[None, :] + xs[None, :] * (a + log_fill[:pmax, None])
        table_f[m, 1:pmax + 1] = _logsumexp2(terms, axis=1)
    return LayerDp(n, False, table_f)


def _logsumexp2(values: np.ndarray, axis=None):
    top = np.max(values, axis=axis, keepdims=True)
    out = top + np.log2(np.sum(np.exp2(values - top), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else float(out.squeeze())


def _randbelow(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrarily large bound."""
    k = bound.bit_length()
    nbytes = (k + 7) // 8
    excess = nbytes * 8 - k
    while True:
        r = int.from_bytes(rng.bytes(nbytes), "little") >> excess
        if r < bound:
            return r


def sample_tower_vector(dp: LayerDp, rng: np.random.Generator) -> tuple[int, ...]:
    m, p = dp.n, START
    h = []
    while m:
        if dp.exact:
            terms = dp._terms(m, p)
            r = _randbelow(rng, sum(terms))
            x = 0
            while r >= terms[x]:
                r -= terms[x]
                x += 1
            x += 1
        else:
            cdf = dp._cdf(m, p)
            x = int(np.searchsorted(cdf, rng.random(), side="right")) + 1
            x = min(x, len(cdf))
        h.append(x)
        m -= x
        p = x
    return tuple(h)


def _position_matrix(h: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """Adjacency over positions sorted by layer (layer 1 first)."""
    n = sum(h)
    layer = np.repeat(np.arange(len(h)), h)
    gap = layer[:, None] - layer[None, :]
    coins = _coin_matrix(rng, n)
    adj = coins & (gap >= 2)
    # into the layer directly below: a uniform nonempty subset, by rejection
    near = gap == 1
    block = coins & near
    empty = np.nonzero((layer > 0) & ~block.any(axis=1))[0]
    while len(empty):
        redo = _coin_matrix(rng, n)[: len(empty)] & near[empty]
        block[empty] = redo
        empty = empty[~redo.any(axis=1)]
    return adj | block


def _coin_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    raw = np.frombuffer(rng.bytes(n * ((n + 7) // 8)), dtype=np.uint8).reshape(n, -1)
    return np.unpackbits(raw, axis=1, count=n, bitorder="little").astype(bool)


def sample_dag_matrix(h: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """Labeled adjacency matrix (0-based) of a DAG drawn uniformly among those with vector h."""
    h = _check_vector(h)
    adj = _position_matrix(h, rng)
    # label of position k is perm[k]; one shuffle realizes the multinomial split
    perm = rng.permutation(len(adj))
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return adj[np.ix_(inv, inv)]


def sample_dag_given_vector(h: Sequence[int], rng: np.random.Generator) -> Dag:
    return Dag.from_matrix(sample_dag_matrix(h, rng))


@lru_cache(maxsize=8)
def cached_layer_dp(n: int, exact: bool = False) -> LayerDp:
    return build_layer_dp(n, exact)


def sample_uniform_dag(n: int, rng: np.random.Generator, exact: bool = False,
                       dp: LayerDp | None = None) -> Dag:
    if n < 1:
        raise DagError("n must be at least 1")
    dp = dp or cached_layer_dp(n, exact)
    return sample_dag_given_vector(sample_tower_vector(dp, rng), rng)


def expected_regenerations(dp: LayerDp) -> float:
    """E[R(h)] under the DP law, by pushing state probabilities forward layer by layer."""
    n = dp.n
    mass = np.zeros((n + 1, n + 1))
    mass[n, START] = 1.0
    total = 0.0
    for m in range(n, 0, -1):
        xs = np.arange(1, m + 1)
        for p in np.nonzero(mass[m])[0]:
            probs = np.asarray(dp.choice_distribution(m, int(p)), dtype=float)
            total += mass[m, p] * probs[0]
            mass[m - xs, xs] += mass[m, p] * probs
    return total


def vector_law_from_dp(dp: LayerDp) -> dict[tuple[int, ...], Fraction]:
    """Exact law over full vectors induced by sequential sampling (exact mode only)."""
    if not dp.exact:
        raise DagError("vector_law_from_dp needs an exact-mode table")
    law: dict[tuple[int, ...], Fraction] = {}

    def walk(m: int, p: int, prefix: tuple[int, ...], prob: Fraction) -> None:
        if m == 0:
            law[prefix] = prob
            return
        for x, q in enumerate(dp.choice_distribution(m, p), 1):
            if q:
                walk(m - x, x, prefix + (x,), prob * q)

    walk(dp.n, START, (), Fraction(1))
    return law
