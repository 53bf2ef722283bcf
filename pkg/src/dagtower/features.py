"""Features of a tower vector and their weighted-composition partition function.

A feature is the run of layers (all of size >= 2) between two consecutive
single-site layers. Weights compare a feature with a path of the same size, so
a tower vector's probability factorizes over its features.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .dag import DagError
from .tower import compositions, regeneration_points, tower_vector_count

Feature = tuple[int, ...]


class DivergentTail(DagError):
    """Raised when the geometric tail bound gives no truncation certificate."""


@dataclass(frozen=True)
class FeatureSplit:
    features: tuple[Feature, ...]
    regenerations: int

    @property
    def free_free(self) -> bool:
        """True for a vector with no single-site layer: one block, both ends free."""
        return self.regenerations == 0


def extract_features(h: Sequence[int]) -> FeatureSplit:
    taus, r = regeneration_points(h)
    if r == 0:
        return FeatureSplit((tuple(h),), 0)
    bounds = (0,) + taus + (len(h) + 1,)
    feats = tuple(tuple(h[bounds[i]:bounds[i + 1] - 1]) for i in range(r + 1))
    return FeatureSplit(feats, r)


def assemble_features(split: FeatureSplit) -> tuple[int, ...]:
    if split.free_free:
        return split.features[0]
    out: list[int] = []
    for i, feat in enumerate(split.features):
        if i:
            out.append(1)
        out.extend(feat)
    return tuple(out)


def _check_feature(g: Sequence[int]) -> Feature:
    g = tuple(int(x) for x in g)
    if any(x < 2 for x in g):
        raise DagError(f"feature parts must be >= 2: {g}")
    return g


def _pow2(e: int) -> Fraction:
    return Fraction(2 ** e) if e >= 0 else Fraction(1, 2 ** -e)


def feature_weight(g: Sequence[int]) -> Fraction:
    """Wired-boundary weight, with single-site layers on both sides."""
    g = _check_feature(g)
    if not g:
        return Fraction(1)
    size = sum(g)
    parts = (1,) + g + (1,)
    w = _pow2(-math.comb(size, 2) - size)
    below = parts[0]
    for i in range(1, len(parts)):
        x = parts[i]
        w *= Fraction(_pow2(x * below), math.factorial(x))
        w *= (1 - Fraction(1, 2 ** parts[i - 1])) ** x
        below += x
    return w


def feature_weight_free_left(g: Sequence[int]) -> Fraction:
    """Weight of the block below the first single-site layer (nothing underneath).

    The first part has no layer below it and so no fill factor, but it still
    carries its own 1/g_1! from the multinomial.
    """
    g = _check_feature(g)
    if not g:
        return Fraction(1)
    size = sum(g)
    parts = g + (1,)
    w = _pow2(-math.comb(size, 2)) / math.factorial(parts[0])
    below = parts[0]
    for i in range(1, len(parts)):
        x = parts[i]
        w *= Fraction(_pow2(x * below), math.factorial(x))
        w *= (1 - Fraction(1, 2 ** parts[i - 1])) ** x
        below += x
    return w


def feature_weight_free_right(g: Sequence[int]) -> Fraction:
    """Weight of the block above the last single-site layer (nothing on top)."""
    g = _check_feature(g)
    if not g:
        return Fraction(1)
    size = sum(g)
    parts = (1,) + g
    w = _pow2(-math.comb(size, 2))
    below = parts[0]
    for i in range(1, len(parts)):
        x = parts[i]
        w *= Fraction(_pow2(x * below), math.factorial(x))
        w *= (1 - Fraction(1, 2 ** parts[i - 1])) ** x
        below += x
    return w


def enumerate_features_of_size(k: int) -> Iterator[Feature]:
    if k < 0:
        raise DagError("feature size must be non-negative")
    return compositions(k, min_part=2)


# ---------------------------------------------------------------------------
# per-size aggregates W_k and the tilted partition function

def _part_factor(x: int) -> Fraction:
    # 2^((3x - x^2)/2) / x!; the exponent is always an integer
    return _pow2((3 * x - x * x) // 2) / math.factorial(x)


def _bond(p: int, x: int) -> Fraction:
    return (1 - Fraction(1, 2 ** p)) ** x


@lru_cache(maxsize=None)
def _size_table(kmax: int) -> tuple[Fraction, ...]:
    """W_k for k = 0..kmax by a transfer recursion over the last part.

    Rewriting the wired weight gives w = 2 * prod(part factors) * prod(bonds),
    where bonds run between consecutive layers including the two boundary ones.
    """
    # ending[s][x]: sum over partial features of size s whose last part is x
    ending: list[dict[int, Fraction]] = [dict() for _ in range(kmax + 1)]
    for s in range(2, kmax + 1):
        row = ending[s]
        for x in range(2, s + 1):
            rest = s - x
            if rest == 0:
                acc = _bond(1, x)
            elif rest >= 2:
                acc = sum((v * _bond(p, x) for p, v in ending[rest].items()), Fraction(0))
            else:
                continue
            if acc:
                row[x] = acc * _part_factor(x)
    totals = [Fraction(1)]
    for k in range(1, kmax + 1):
        totals.append(2 * sum((v * _bond(x, 1) for x, v in ending[k].items()), Fraction(0)))
    return tuple(totals)


def size_aggregates(kmax: int) -> list[Fraction]:
    """Exact W_k = sum of wired weights over features of size k, for k = 0..kmax."""
    return list(_size_table(kmax))


def tail_bound(theta: float, k: int, moment: int = 0) -> float:
    """Bound on sum_{j>k} j^moment e^{-theta j} 8 (3/4)^j, for moment in {0, 1}."""
    q = 0.75 * math.exp(-theta)
    if q >= 1:
        raise DivergentTail(f"tilt {theta} gives ratio {q:.4f} >= 1; no certificate")
    head = 8 * q ** (k + 1) / (1 - q)
    if moment == 0:
        return head
    return 8 * ((k + 1) * q ** (k + 1) / (1 - q) + q ** (k + 2) / (1 - q) ** 2)


@dataclass(frozen=True)
class TiltedEnsemble:
    theta: float
    truncation: int
    z: float
    z_tail_bound: float
    mean_size: float
    mean_tail_bound: float
    size_weights: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "theta": self.theta,
            "truncation": self.truncation,
            "Z": self.z,
            "Z_tail_bound": self.z_tail_bound,
            "mean_size": self.mean_size,
            "mean_tail_bound": self.mean_tail_bound,
        }


MAX_TRUNCATION = 2000


def partition_function(theta: float, tol: float = 1e-12) -> TiltedEnsemble:
    """Z_theta with a certified truncation.

    K is the smallest size at which both tail bounds (for Z and for the size
    moment) fall below ``tol``.
    """
    if not tol > 0:
        raise DagError("tol must be positive")
    k = 2
    while tail_bound(theta, k) >= tol or tail_bound(theta, k, 1) >= tol:
        k += 1
        if k > MAX_TRUNCATION:
            raise DivergentTail(f"no certificate below tol={tol} up to size {MAX_TRUNCATION}")
    weights = _float_sizes(k)
    tilt = [math.exp(-theta * j) * w for j, w in enumerate(weights)]
    z = math.fsum(tilt)
    moment = math.fsum(j * t for j, t in enumerate(tilt))
    return TiltedEnsemble(
        theta=theta,
        truncation=k,
        z=z,
        z_tail_bound=tail_bound(theta, k),
        mean_size=moment / z,
        # Z >= 1, so the numerator bound also bounds the mean's error up to the Z tail
        mean_tail_bound=tail_bound(theta, k, 1) + moment / z * tail_bound(theta, k),
        size_weights=tuple(weights),
    )


@lru_cache(maxsize=None)
def _float_sizes(kmax: int) -> tuple[float, ...]:
    if kmax <= 60:
        return tuple(float(w) for w in _size_table(kmax))
    # float transfer recursion; parts above XMAX weigh < 2^-1900 and underflow anyway
    xmax = min(kmax, 64)
    xs_all = np.arange(xmax + 1)
    part = np.zeros(xmax + 1)
    part[2:] = [math.exp((3 * x - x * x) / 2 * math.log(2) - math.lgamma(x + 1)) for x in range(2, xmax + 1)]
    bond = (1.0 - np.exp2(-xs_all.astype(float)))[:, None] ** xs_all[None, :]
    ending = np.zeros((kmax + 1, xmax + 1))
    for s in range(2, kmax + 1):
        xs = np.arange(2, min(s, xmax) + 1)
        acc = np.einsum("ip,pi->i", ending[s - xs], bond[:, xs])
        if s <= xmax:
            acc[-1] = 0.5 ** s  # the whole block is one part, bonded to the lower boundary
        ending[s, xs] = acc * part[xs]
    totals = 2 * ending @ (1.0 - np.exp2(-xs_all.astype(float)))
    totals[0] = 1.0
    return tuple(float(t) for t in totals)


def mean_feature_size(theta: float, tol: float = 1e-12) -> float:
    return partition_function(theta, tol).mean_size


@dataclass(frozen=True)
class ThetaSolution:
    theta: float
    bracket: tuple[float, float]
    target: float
    residual: float
    ensemble: TiltedEnsemble

    def as_dict(self) -> dict:
        out = {
            "theta_star": self.theta,
            "bracket": list(self.bracket),
            "target_mean_size": self.target,
            "residual": self.residual,
        }
        out.update({f"ensemble_{k}": v for k, v in self.ensemble.as_dict().items()})
        return out


class TargetUnreachable(DagError):
    pass


def solve_theta_star(c1: float, tol: float = 1e-8, series_tol: float = 1e-14) -> ThetaSolution:
    """Bisection for the tilt whose mean feature size equals (1 - c1) / c1."""
    if not 0 < c1 < 1:
        raise DagError(f"c1 must lie in (0, 1), got {c1}")
    target = (1 - c1) / c1
    mean = lambda t: mean_feature_size(t, series_tol)  # noqa: E731
    lo, hi = 0.0, 1.0
    # push lo below zero only as far as truncation stays certifiable
    while mean(lo) < target:
        hi = lo
        lo -= 0.02
        try:
            mean(lo)
        except DivergentTail:
            raise TargetUnreachable(
                f"target mean size {target:.6g} exceeds the certifiable range at theta={lo:.3f}") from None
    while mean(hi) > target:
        lo = hi
        hi *= 2
        if hi > 1e3:
            raise TargetUnreachable(f"target mean size {target:.3g} too small")
    theta = 0.5 * (lo + hi)
    for _ in range(200):
        theta = 0.5 * (lo + hi)
        m = mean(theta)
        if abs(m - target) < tol:
            break
        if m > target:
            lo = theta
        else:
            hi = theta
    ens = partition_function(theta, series_tol)
    return ThetaSolution(theta, (lo, hi), target, abs(ens.mean_size - target), ens)


# ---------------------------------------------------------------------------
# conditional law of the vector given its number of single-site layers

def feature_product_weight(h: Sequence[int], theta: float = 0.0) -> tuple[Fraction, int]:
    """Untilted product weight of h's features and the total feature size.

    The tilt multiplies this by exp(-theta * size); it is returned separately so
    that laws can stay exact when every vector shares the same size.
    """
    split = extract_features(h)
    if split.free_free:
        raise DagError("vectors without single-site layers have no feature product")
    feats = split.features
    w = feature_weight_free_left(feats[0]) * feature_weight_free_right(feats[-1])
    for f in feats[1:-1]:
        w *= feature_weight(f)
    return w, sum(map(sum, feats))


def feature_product_law(n: int, r: int, theta: float = 0.0) -> dict[tuple[int, ...], Fraction]:
    """Normalized tilted feature-product law on vectors of size n with r regenerations."""
    weights = {}
    for h in compositions(n):
        if regeneration_points(h)[1] == r:
            weights[h] = feature_product_weight(h, theta)
    if not weights:
        return {}
    sizes = {s for _, s in weights.values()}
    smin = min(sizes)
    if len(sizes) == 1 or theta == 0:
        tilt = {s: Fraction(1) for s in sizes}
    else:
        tilt = {s: Fraction(math.exp(-theta * (s - smin))) for s in sizes}
    raw = {h: w * tilt[s] for h, (w, s) in weights.items()}
    total = sum(raw.values())
    return {h: v / total for h, v in raw.items()}


def conditional_vector_law(n: int, r: int) -> dict[tuple[int, ...], Fraction]:
    """Law of the tower vector of a uniform DAG on n vertices given r regenerations."""
    counts = {h: tower_vector_count(h) for h in compositions(n)
              if regeneration_points(h)[1] == r}
    total = sum(counts.values())
    return {h: Fraction(c, total) for h, c in counts.items()}
