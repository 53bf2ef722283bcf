"""Monte Carlo estimators over uniform random DAGs.

Randomness is organised in fixed-size blocks of samples. Block b of an
experiment at size n draws from a Philox stream keyed by (seed, n, b), so the
per-sample results do not depend on how blocks are spread over workers; they
are merged back in block order before any reduction.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .dag import Dag, DagError, enumerate_dags
from .mec import CapExceeded, DEFAULT_COMPONENT_CAP, chain_components, collider_rows_fast, cpdag, \
    component_extension_count
from .dag import collider_rows
from .tower import cached_layer_dp, regeneration_points, sample_dag_matrix, sample_tower_vector, \
    tower_decompose

RNG_NAME = "numpy.random.Philox(SeedSequence(seed, spawn_key=(n, block)))"
BLOCK_SIZE = 64

GRAPH_ESTIMATORS = ("essential_fraction", "mec_ratio", "mec_moments", "noncollider")
VECTOR_ESTIMATORS = ("regeneration", "layer_law")
ALL_ESTIMATORS = GRAPH_ESTIMATORS + VECTOR_ESTIMATORS


def block_rng(seed: int, n: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(n, block))))


@dataclass
class ExperimentConfig:
    n: int | list[int]
    samples: int
    seed: int
    workers: int = 1
    estimators: list[str] = field(default_factory=lambda: list(ALL_ESTIMATORS))
    output: str | None = None
    exact: bool = False
    enumerate: bool = False
    thresholds: list[int] = field(default_factory=lambda: [1, 2, 10, 100, 1000, 10000])
    last_k: int = 3
    probe_layers: list[str] = field(default_factory=lambda: ["1", "2", "3", "T", "T-1", "T-5"])
    component_cap: int = DEFAULT_COMPONENT_CAP
    timing: bool = False

    def __post_init__(self):
        if self.samples < 1:
            raise DagError("sample count must be at least 1")
        unknown = set(self.estimators) - set(ALL_ESTIMATORS)
        if unknown:
            raise DagError(f"unknown estimators: {sorted(unknown)}")
        if self.enumerate and max(self.sizes) > 5:
            raise DagError("enumeration mode supports n <= 5 only")

    @property
    def sizes(self) -> list[int]:
        return [self.n] if isinstance(self.n, int) else list(self.n)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise DagError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def config_hash(self) -> str:
        # output location and worker count do not change results
        body = {k: v for k, v in asdict(self).items() if k not in ("output", "workers", "timing")}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class EstimateRecord:
    statistic: str
    n: int
    estimate: float
    stderr: float | None
    samples: int
    seed: int
    wall_clock: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self, meta: dict) -> str:
        body = {"statistic": self.statistic, "n": self.n, "estimate": self.estimate,
                "stderr": self.stderr, "samples": self.samples, "seed": self.seed}
        if self.extra:
            body["extra"] = self.extra
        if self.wall_clock is not None:
            body["wall_clock"] = self.wall_clock
        body.update(meta)
        return json.dumps(body, sort_keys=True)


# ---------------------------------------------------------------------------
# per-sample analysis

@dataclass(frozen=True)
class SampleStats:
    vector: tuple[int, ...]
    noncollider: int = -1
    essential: bool = False
    mec_size: int = -1          # -1 when the component cap refused the count
    cap_refusals: int = 0


def analyze_matrix(adj: np.ndarray, h: Sequence[int], cap: int = DEFAULT_COMPONENT_CAP) -> SampleStats:
    g = Dag.from_matrix(adj)
    coll = collider_rows_fast(g, adj) if g.n >= 64 else collider_rows(g)
    noncoll = sum(bin(row & ~c).count("1") for row, c in zip(g.out_rows, coll))
    e = cpdag(g, coll)
    essential = e.num_undirected == 0
    size = 1
    refusals = 0
    for comp in chain_components(e):
        try:
            size *= component_extension_count(comp, cap)
        except CapExceeded:
            refusals += 1
    return SampleStats(tuple(h), noncoll, essential, -1 if refusals else size, refusals)


def analyze_dag(g: Dag, cap: int = DEFAULT_COMPONENT_CAP) -> SampleStats:
    _, h = tower_decompose(g)
    return analyze_matrix(g.to_matrix(), h, cap)


def _run_block(args) -> list[SampleStats]:
    seed, n, block, count, exact, graphs, cap = args
    rng = block_rng(seed, n, block)
    dp = cached_layer_dp(n, exact)
    out = []
    for _ in range(count):
        h = sample_tower_vector(dp, rng)
        if graphs:
            out.append(analyze_matrix(sample_dag_matrix(h, rng), h, cap))
        else:
            out.append(SampleStats(h))
    return out


def collect_samples(n: int, samples: int, seed: int, workers: int = 1, exact: bool = False,
                    graphs: bool = True, cap: int = DEFAULT_COMPONENT_CAP) -> list[SampleStats]:
    jobs = []
    for block, start in enumerate(range(0, samples, BLOCK_SIZE)):
        jobs.append((seed, n, block, min(BLOCK_SIZE, samples - start), exact, graphs, cap))
    if workers <= 1:
        parts = [_run_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    return [s for part in parts for s in part]


def enumerate_stats(n: int) -> list[SampleStats]:
    return [analyze_dag(g) for g in enumerate_dags(n)]


# ---------------------------------------------------------------------------
# estimators

def _mean_record(name: str, n: int, values: Sequence[float], seed: int, **extra) -> EstimateRecord:
    arr = np.asarray(values, dtype=float)
    count = len(arr)
    se = float(arr.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    return EstimateRecord(name, n, float(arr.mean()), se, count, seed, extra=extra)


def estimate_essential_fraction(data: Sequence[SampleStats], n: int, seed: int) -> EstimateRecord:
    # a refused component has at least two extensions, so it is never essential
    return _mean_record("essential_fraction", n, [s.essential for s in data], seed)


def estimate_mec_ratio(data: Sequence[SampleStats], n: int, seed: int) -> EstimateRecord:
    values = [1.0 / s.mec_size for s in data if s.mec_size > 0]
    refused = sum(1 for s in data if s.mec_size < 0)
    return _mean_record("mec_ratio", n, values, seed, cap_refusals=refused)


def mec_size_moments_and_tail(data: Sequence[SampleStats], n: int, seed: int,
                              thresholds: Iterable[int]) -> list[EstimateRecord]:
    sizes = [s.mec_size for s in data if s.mec_size > 0]
    refused = len(data) - len(sizes)
    recs = [
        _mean_record("mec_mean", n, sizes, seed, cap_refusals=refused),
        _mean_record("mec_second_moment", n, [float(x) ** 2 for x in sizes], seed, cap_refusals=refused),
    ]
    for t in thresholds:
        # refused classes exceed any threshold below the factorial of the cap
        hits = [x > t for x in sizes] + [True] * refused
        recs.append(_mean_record("mec_tail", n, hits, seed, threshold=t))
    return recs


def noncollider_distribution(data: Sequence[SampleStats], n: int, seed: int):
    counts = Counter(s.noncollider for s in data)
    total = len(data)
    hist = {k: counts[k] / total for k in sorted(counts)}
    zero = _mean_record("noncollider_zero", n, [s.noncollider == 0 for s in data], seed)
    mean = _mean_record("noncollider_mean", n, [s.noncollider for s in data], seed)
    return [zero, mean], hist


def regeneration_stats(data: Sequence[SampleStats], n: int, seed: int):
    regs = np.array([regeneration_points(s.vector)[1] for s in data], dtype=float)
    c1 = _mean_record("c1_hat", n, regs / n, seed)
    count = len(regs)
    var = float(regs.var(ddof=1)) if count > 1 else 0.0
    # SE of a sample variance: sqrt((m4 - var^2) / count)
    m4 = float(np.mean((regs - regs.mean()) ** 4))
    var_se = math.sqrt(max(m4 - var * var, 0.0) / count) if count > 1 else 0.0
    var_rec = EstimateRecord("regeneration_var_over_n", n, var / n, var_se / n, count, seed)
    skew = float(stats.skew(regs)) if var > 0 else 0.0
    kurt = float(stats.kurtosis(regs, fisher=False)) if var > 0 else 3.0
    skew_rec = EstimateRecord("regeneration_skew", n, skew, math.sqrt(6 / count), count, seed)
    kurt_rec = EstimateRecord("regeneration_kurtosis", n, kurt, math.sqrt(24 / count), count, seed)
    gaps = Counter()
    for s in data:
        taus, _ = regeneration_points(s.vector)
        prev = 0
        for t in taus:
            gaps[t - prev] += 1
            prev = t
    total = sum(gaps.values())
    tail = []
    remaining = total
    for g in range(1, max(gaps, default=0) + 1):
        tail.append((g, remaining / total if total else 0.0, gaps[g]))
        remaining -= gaps[g]
    return [c1, var_rec, skew_rec, kurt_rec], tail


def _probe_index(label: str, height: int) -> int:
    if label.startswith("T"):
        return height - int(label[2:] or 0) if len(label) > 1 else height
    return int(label)


def _layer(h: Sequence[int], i: int) -> int:
    return h[i - 1] if 1 <= i <= len(h) else 0


def layer_law_diagnostics(data: Sequence[SampleStats], n: int, seed: int, k: int = 3,
                          probes: Iterable[str] = ("1", "T")):
    probes = list(probes)
    recs = []
    tail_rows = []
    for label in probes:
        values = [_layer(s.vector, _probe_index(label, len(s.vector))) for s in data]
        recs.append(_mean_record("layer_single", n, [v <= 1 for v in values], seed, layer=label))
        arr = np.asarray(values)
        for x in range(5, 11):
            p = float(np.mean(arr >= x))
            se = math.sqrt(max(p * (1 - p), 1.0 / len(arr)) / len(arr))
            tail_rows.append((label, x, p, se, 4 * 2.0 ** (-x * x / 4)))
    law = last_layers_law(data, k)
    return recs, tail_rows, law


def last_layers_law(data: Sequence[SampleStats], k: int) -> dict[tuple[int, ...], float]:
    counts = Counter()
    for s in data:
        top = tuple(reversed(s.vector))[:k]
        counts[top + (0,) * (k - len(top))] += 1
    total = len(data)
    return {key: c / total for key, c in sorted(counts.items())}


def tv_distance(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(x, 0.0) - q.get(x, 0.0)) for x in keys)


def sampler_chi_square(n: int, samples: int, seed: int, exact: bool = False) -> float:
    """p-value of the uniform-frequency test over all DAGs on n <= 4 vertices."""
    if n > 4:
        raise DagError("sampler_chi_square supports n <= 4")
    cells = {g.out_rows: i for i, g in enumerate(enumerate_dags(n))}
    if len(cells) == 1:
        return 1.0
    observed = np.zeros(len(cells), dtype=np.int64)
    dp = cached_layer_dp(n, exact)
    for block, start in enumerate(range(0, samples, 4096)):
        rng = block_rng(seed, n, block)
        for _ in range(min(4096, samples - start)):
            h = sample_tower_vector(dp, rng)
            adj = sample_dag_matrix(h, rng)
            key = tuple(int(x) for x in np.packbits(adj, axis=1, bitorder="little")[:, 0])
            observed[cells[key]] += 1
    return float(stats.chisquare(observed).pvalue)


# ---------------------------------------------------------------------------
# experiment driver

def _csv_text(header: Sequence[str], rows: Iterable[Sequence], meta: dict) -> str:
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


@dataclass
class ExperimentResult:
    records: list[EstimateRecord]
    tables: dict[str, str]
    meta: dict

    def jsonl(self) -> str:
        return "".join(r.to_json(self.meta) + "\n" for r in self.records)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    meta = {"tool_version": __version__, "config_hash": cfg.config_hash(), "rng": RNG_NAME}
    csv_meta = {**meta, "seed": cfg.seed}
    records: list[EstimateRecord] = []
    tables: dict[str, str] = {}
    want = set(cfg.estimators)
    graphs = bool(want & set(GRAPH_ESTIMATORS))
    for n in cfg.sizes:
        start = time.perf_counter()
        if cfg.enumerate:
            data = enumerate_stats(n)
        else:
            data = collect_samples(n, cfg.samples, cfg.seed, cfg.workers, cfg.exact, graphs,
                                   cfg.component_cap)
        batch: list[EstimateRecord] = []
        if "essential_fraction" in want:
            batch.append(estimate_essential_fraction(data, n, cfg.seed))
        if "mec_ratio" in want:
            batch.append(estimate_mec_ratio(data, n, cfg.seed))
        if "mec_moments" in want:
            batch.extend(mec_size_moments_and_tail(data, n, cfg.seed, cfg.thresholds))
        if "noncollider" in want:
            recs, hist = noncollider_distribution(data, n, cfg.seed)
            batch.extend(recs)
            tables[f"noncollider_hist_n{n}.csv"] = _csv_text(
                ["num_noncollider_edges", "frequency"], hist.items(), csv_meta)
        if "regeneration" in want:
            recs, tail = regeneration_stats(data, n, cfg.seed)
            batch.extend(recs)
            tables[f"regeneration_gaps_n{n}.csv"] = _csv_text(
                ["gap", "tail_probability", "count"], tail, csv_meta)
        if "layer_law" in want:
            recs, tail_rows, law = layer_law_diagnostics(data, n, cfg.seed, cfg.last_k, cfg.probe_layers)
            batch.extend(recs)
            tables[f"layer_tails_n{n}.csv"] = _csv_text(
                ["layer", "x", "tail_probability", "stderr", "bound"], tail_rows, csv_meta)
            tables[f"last_layers_law_n{n}.csv"] = _csv_text(
                [f"h_T-{i}" for i in range(cfg.last_k)] + ["frequency"],
                [key + (p,) for key, p in law.items()], csv_meta)
        if cfg.timing:
            elapsed = time.perf_counter() - start
            for r in batch:
                r.wall_clock = elapsed
        records.extend(batch)
    return ExperimentResult(records, tables, meta)


def write_result(result: ExperimentResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "estimates.jsonl").write_text(result.jsonl())
    for name, text in result.tables.items():
        (out / name).write_text(text)
    return out
