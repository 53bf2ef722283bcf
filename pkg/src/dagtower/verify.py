"""Cross-validation of the fast algorithms against brute-force oracles."""
from __future__ import annotations

import math
import time
from collections import defaultdict
from typing import Callable

import numpy as np

from .dag import count_dags, enumerate_dags, non_collider_edges, poset_weight, reachability_poset
from .features import conditional_vector_law, feature_product_law
from .mec import cpdag, disagreement_edges, mec_brute_force, mec_size
from .montecarlo import sampler_chi_square
from .tower import compositions, tower_dag_count, tower_decompose, tower_vector_weight


def check_counts(nmax: int) -> str | None:
    for n in range(nmax + 1):
        got = sum(1 for _ in enumerate_dags(n))
        if got != count_dags(n):
            return f"n={n}: enumerated {got}, recurrence {count_dags(n)}"
    return None


def check_poset_partition(n: int) -> str | None:
    groups: dict[tuple, int] = defaultdict(int)
    weights = {}
    for g in enumerate_dags(n):
        p = reachability_poset(g)
        groups[p.below] += 1
        weights[p.below] = poset_weight(p)
    bad = [k for k in groups if groups[k] != weights[k]]
    if bad or sum(weights.values()) != count_dags(n):
        return f"n={n}: {len(bad)} poset groups disagree"
    return None


def check_tower_partition(n: int) -> str | None:
    groups: dict[tuple, int] = defaultdict(int)
    expected = {}
    for g in enumerate_dags(n):
        t, _ = tower_decompose(g)
        groups[t.key()] += 1
        expected[t.key()] = tower_dag_count(t)
    bad = [k for k in groups if groups[k] != expected[k]]
    if bad or sum(expected.values()) != count_dags(n):
        return f"n={n}: {len(bad)} tower groups disagree"
    return None


def check_normalization(nmax: int) -> str | None:
    for n in range(1, nmax + 1):
        total = sum(tower_vector_weight(h, n) for h in compositions(n))
        if total != 1:
            return f"n={n}: vector weights sum to {total}"
    return None


def check_mec(dags) -> str | None:
    for g in dags:
        members = mec_brute_force(g)
        e = cpdag(g)
        if mec_size(g, essential=e) != len(members):
            return f"{g}: mec_size {mec_size(g)} vs oracle {len(members)}"
        if set(e.undirected) != disagreement_edges(members):
            return f"{g}: reversible edges differ from oracle"
        _, verts = non_collider_edges(g)
        if len(members) > math.factorial(len(verts)):
            return f"{g}: class size exceeds |N(G)|!"
    return None


def check_feature_law(nmax: int, thetas=(0.0, 0.5)) -> str | None:
    for n in range(1, nmax + 1):
        # r = 0 is a single free-free block with no product form
        for r in range(1, n + 1):
            target = conditional_vector_law(n, r)
            if not target:
                continue
            for theta in thetas:
                if feature_product_law(n, r, theta) != target:
                    return f"n={n}, r={r}, theta={theta}: feature law differs"
    return None


def check_chi_square(n: int, samples: int, seed: int) -> str | None:
    p = sampler_chi_square(n, samples, seed)
    return None if p > 1e-3 else f"n={n}: chi-square p-value {p:.3g}"


def _random_dags(n: int, count: int, seed: int):
    from .tower import sample_uniform_dag

    rng = np.random.Generator(np.random.Philox(seed))
    return [sample_uniform_dag(n, rng) for _ in range(count)]


def suites(level: str, seed: int = 0) -> list[tuple[str, Callable[[], str | None]]]:
    out = [
        ("counts n<=4", lambda: check_counts(4)),
        ("poset partition n=4", lambda: check_poset_partition(4)),
        ("tower partition n=4", lambda: check_tower_partition(4)),
        ("vector normalization n<=8", lambda: check_normalization(8)),
        ("mec oracle n<=4", lambda: check_mec(g for n in range(5) for g in enumerate_dags(n))),
        ("feature law n<=6", lambda: check_feature_law(6)),
    ]
    if level == "full":
        out += [
            ("counts n=5", lambda: check_counts(5)),
            ("tower partition n=5", lambda: check_tower_partition(5)),
            ("vector normalization n<=12", lambda: check_normalization(12)),
            ("mec oracle n=5 sample", lambda: check_mec(_random_dags(5, 500, seed))),
            ("feature law n<=10", lambda: check_feature_law(10)),
            ("chi-square n=3", lambda: check_chi_square(3, 100_000, seed)),
            ("chi-square n=4", lambda: check_chi_square(4, 200_000, seed)),
        ]
    return out


def run_verify(level: str = "fast", seed: int = 0) -> list[dict]:
    results = []
    for name, fn in suites(level, seed):
        start = time.perf_counter()
        problem = fn()
        results.append({"check": name, "ok": problem is None, "detail": problem,
                        "seconds": round(time.perf_counter() - start, 3)})
    return results

