import itertools

import numpy as np
import pytest

from dagtower import Dag

CLASS_EDGES = [(2, 7), (2, 1), (7, 4), (1, 4), (4, 3), (3, 5), (3, 6), (1, 6), (7, 3)]
LAYERED_EDGES = [(7, 2), (7, 3), (5, 3), (2, 1), (3, 6), (1, 4), (1, 6), (7, 4)]
CHAIN_EDGES = [(10, 7), (10, 8), (3, 10), (12, 10), (6, 3), (4, 3), (4, 12), (6, 12), (6, 5), (4, 5),
              (2, 5), (7, 8), (1, 2), (11, 2), (1, 11)]


@pytest.fixture
def class_example():
    return Dag.from_edges(7, CLASS_EDGES)


@pytest.fixture
def layered_example():
    return Dag.from_edges(7, LAYERED_EDGES)


@pytest.fixture
def chain_example():
    return Dag.from_edges(12, CHAIN_EDGES)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


def has_cycle(n, edges):
    """Plain DFS cycle check, kept independent of the package's Kahn order."""
    succ = {v: [] for v in range(1, n + 1)}
    for u, v in edges:
        succ[u].append(v)
    state = {}

    def visit(v):
        state[v] = 1
        for w in succ[v]:
            if state.get(w) == 1 or (w not in state and visit(w)):
                return True
        state[v] = 2
        return False

    return any(v not in state and visit(v) for v in succ)


def brute_dags(n):
    """Every DAG on [n] as a frozenset of edges, from all 3^(n choose 2) pair states."""
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    out = []
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = [(a, b) if s == 1 else (b, a) for (a, b), s in zip(pairs, states) if s]
        if not has_cycle(n, edges):
            out.append(frozenset(edges))
    return out


def brute_vstructs(edges):
    adj = {frozenset(e) for e in edges}
    parents = {}
    for u, v in edges:
        parents.setdefault(v, []).append(u)
    found = set()
    for c, ps in parents.items():
        for a, b in itertools.combinations(sorted(ps), 2):
            if frozenset((a, b)) not in adj:
                found.add((a, b, c))
    return found
