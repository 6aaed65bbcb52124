"""End-to-end ranking experiments.

For every (exponent, train size) cell and replication: build a fresh world, rank
a training stream by the proxy and log simulated clicks, compute per-document
features from that log, then rank one shared test stream by each feature and
count clicks.

Randomness: each job draws from ``SeedSequence(master_seed, spawn_key=(round(exponent * 1e6),
train_size, replication))``. Its four children seed, in order, the world, the
training phase, the test stream and the feature phases; the feature phases are
children of the last one indexed by ``FeatureKind`` declaration order, so a
cell's numbers do not depend on which other cells or features are configured.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .behavior import RankedList, simulate_batch
from .clicklog import ClickLog, position_histograms
from .errors import ConfigError
from .estimators import CLICK_FEATURES, DEFAULT_CLIP_FLOOR, FeatureKind, feature_matrix
from .position import PositionBiasCurve, PropensityVector, empirical_propensities
from .synthworld import GenConfig, SearchRequest, SearchStream, World, generate_search_stream, generate_world

log = logging.getLogger(__name__)

FEATURE_ORDER = list(FeatureKind)


class ColdStartPolicy(str, enum.Enum):
    ZERO = "ZERO"
    PROXY_FALLBACK = "PROXY_FALLBACK"


@dataclass(frozen=True)
class ExperimentConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    train_sizes: tuple = (1_000, 3_000, 10_000, 30_000, 100_000)
    test_size: int = 100_000
    exponents: tuple = (0.25, 0.5, 1.0, 2.0)
    replications: int = 10
    features: tuple = tuple(FeatureKind)
    cold_start_policy: ColdStartPolicy = ColdStartPolicy.ZERO
    master_seed: int = 0
    clip_floor: float = DEFAULT_CLIP_FLOOR
    export_feature_pairs: bool = False

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if isinstance(self.gen, Mapping):
            set_("gen", _build(GenConfig, self.gen, "gen"))
        set_("train_sizes", tuple(int(t) for t in self.train_sizes))
        set_("exponents", tuple(float(x) for x in self.exponents))
        set_("features", tuple(FeatureKind(f) for f in self.features))
        set_("cold_start_policy", ColdStartPolicy(self.cold_start_policy))
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.test_size < 1:
            raise ConfigError("test_size must be >= 1")
        if not self.features:
            raise ConfigError("features must be nonempty")
        if not self.train_sizes or any(t < 0 for t in self.train_sizes):
            raise ConfigError("train_sizes must be nonempty and nonnegative")
        if not self.exponents or any(x < 0 for x in self.exponents):
            raise ConfigError("exponents must be nonempty and nonnegative")
        if not 0 < self.clip_floor <= 1:
            raise ConfigError("clip_floor must be in (0, 1]")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0")

    def to_dict(self) -> dict:
        return {
            "gen": dataclasses.asdict(self.gen),
            "train_sizes": list(self.train_sizes),
            "test_size": self.test_size,
            "exponents": list(self.exponents),
            "replications": self.replications,
            "features": [f.value for f in self.features],
            "cold_start_policy": self.cold_start_policy.value,
            "master_seed": self.master_seed,
            "clip_floor": self.clip_floor,
            "export_feature_pairs": self.export_feature_pairs,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        return _build(cls, data, "config")


def _build(klass, data: Mapping, where: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(klass)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(repr, unknown))}", )
    try:
        return klass(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path, klass=None):
    """Parse a JSON config file; errors carry the offending line where possible."""
    klass = klass or ExperimentConfig
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    try:
        if hasattr(klass, "from_dict"):
            return klass.from_dict(data)
        return _build(klass, data, "config")
    except ConfigError as exc:
        raise ConfigError(_locate(str(exc), text, path)) from exc


def _locate(msg: str, text: str, path) -> str:
    import re

    m = re.search(r"'([^']+)'", msg)
    if m:
        for lineno, line in enumerate(text.splitlines(), 1):
            if f'"{m.group(1)}"' in line:
                return f"{path}:{lineno}: {msg}"
    return f"{path}: {msg}"


@dataclass
class FeatureTable:
    """Per-document feature values (NaN = no training impressions)."""

    values: dict
    impressions: np.ndarray
    theta_hat: Optional[PropensityVector] = None
    filled_positions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    records_at_filled_positions: int = 0

    def __getitem__(self, kind) -> np.ndarray:
        return self.values[FeatureKind(kind)]


def compute_feature_table(log_: ClickLog, world: World, curve: PositionBiasCurve,
                          features: Sequence = tuple(FeatureKind),
                          clip_floor: float = DEFAULT_CLIP_FLOOR) -> FeatureTable:
    k = curve.max_position
    shown, clicked = position_histograms(log_.doc_id, log_.position, log_.click, world.n_docs, k)
    theta = curve.vector().values
    if len(log_):
        raw_hat = empirical_propensities(log_, k)
    else:
        raw_hat = PropensityVector(np.full(k, np.nan))
    theta_hat, filled = raw_hat.filled()
    n_filled = int(shown[:, filled].sum())
    if n_filled:
        log.warning("%d training records at positions without a usable observed click rate; "
                    "using the nearest shallower rate", n_filled)
    values = {}
    for kind in map(FeatureKind, features):
        if kind is FeatureKind.PROXY:
            values[kind] = world.proxy
        elif kind is FeatureKind.TRUE_RELEVANCE:
            values[kind] = world.relevance
        else:
            values[kind] = feature_matrix(kind, shown, clicked, theta, theta_hat.values, clip_floor)
    return FeatureTable(values, shown.sum(axis=1), raw_hat, filled, n_filled)


def resolve_values(table: FeatureTable, kind, world: World,
                   policy: ColdStartPolicy = ColdStartPolicy.ZERO) -> np.ndarray:
    """Feature values with MISSING replaced per the cold-start policy."""
    vals = np.asarray(table[kind], dtype=np.float64)
    missing = np.isnan(vals)
    if missing.any():
        fallback = 0.0 if ColdStartPolicy(policy) is ColdStartPolicy.ZERO else world.proxy
        vals = np.where(missing, fallback, vals)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"non-finite {kind} values would enter a ranking")
    return vals


def rank_batch(candidates: np.ndarray, values: np.ndarray, rng) -> np.ndarray:
    """Sort each row of ``candidates`` (``-1`` padded) by ``values[doc]`` descending.

    Ties break uniformly at random; padding stays at the end.
    """
    rng = np.random.default_rng(rng)
    filled = candidates >= 0
    v = np.where(filled, np.asarray(values)[np.where(filled, candidates, 0)], -np.inf)
    tie = rng.random(candidates.shape)
    order = np.lexsort((tie, -v), axis=-1)
    return np.take_along_axis(candidates, order, axis=1)


def rank_by_feature(request: SearchRequest, values, tie_seed=None,
                    policy: ColdStartPolicy = ColdStartPolicy.ZERO, proxy=None) -> RankedList:
    """Rank one request. ``values`` maps doc id to value (array or mapping); NaN/None is MISSING."""
    docs = list(request.candidate_doc_ids)
    raw = []
    for d in docs:
        v = values[d] if not isinstance(values, Mapping) else values.get(d)
        v = np.nan if v is None else float(v)
        if np.isnan(v):
            if ColdStartPolicy(policy) is ColdStartPolicy.ZERO:
                v = 0.0
            else:
                if proxy is None:
                    raise ValueError("PROXY_FALLBACK needs proxy values")
                v = float(proxy[d])
        raw.append(v)
    if not docs:
        return RankedList(request.search_id, ())
    cand = np.array([docs])
    vals = np.zeros(max(docs) + 1)
    vals[docs] = raw
    ordered = rank_batch(cand, vals, tie_seed)[0]
    return RankedList.from_order(request.search_id, [int(d) for d in ordered])


def _log_from_matrix(stream: SearchStream, ordered: np.ndarray, clicks: np.ndarray, theta: np.ndarray) -> ClickLog:
    filled = ordered >= 0
    rows, cols = np.nonzero(filled)
    return ClickLog.from_arrays(
        stream.search_ids[rows], ordered[rows, cols], cols + 1, theta[cols], clicks[rows, cols],
        validate=False,
    )


def run_training_phase(world: World, n_train: int, curve: PositionBiasCurve, seed=None) -> ClickLog:
    """Rank ``n_train`` fresh searches by the proxy and log simulated clicks."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_stream, s_rank, s_click = ss.spawn(3)
    stream = generate_search_stream(world, n_train, s_stream)
    theta = curve.vector().values
    ordered = rank_batch(stream.candidates, world.proxy, s_rank)
    clicks = simulate_batch(ordered, world, theta, s_click)
    return _log_from_matrix(stream, ordered, clicks, theta)


def run_test_phase(world: World, feature, table: FeatureTable, test_stream: SearchStream,
                   curve: PositionBiasCurve, seed=None,
                   policy: ColdStartPolicy = ColdStartPolicy.ZERO) -> float:
    """Clicks per search when the test stream is ranked by ``feature``."""
    if len(test_stream) == 0:
        raise ValueError("empty test stream")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_rank, s_click = ss.spawn(2)
    values = resolve_values(table, feature, world, policy)
    ordered = rank_batch(test_stream.candidates, values, s_rank)
    clicks = simulate_batch(ordered, world, curve.vector().values, s_click)
    return float(clicks.sum(dtype=np.int64)) / len(test_stream)


def _job_seed(master_seed: int, exponent: float, train_size: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(int(round(exponent * 1_000_000)), train_size, rep))


@dataclass
class ReplicationResult:
    exponent: float
    train_size: int
    replication: int
    clicks_per_search: dict
    corr_ipwctr_ipwcoec: float
    feature_pairs: Optional[np.ndarray] = None
    records_at_filled_positions: int = 0


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def run_replication(config: ExperimentConfig, exponent: float, train_size: int, rep: int) -> ReplicationResult:
    ss = _job_seed(config.master_seed, exponent, train_size, rep)
    s_world, s_train, s_test, s_feat = ss.spawn(4)
    curve = PositionBiasCurve(exponent, config.gen.max_results)
    world = generate_world(config.gen, s_world)
    train_log = run_training_phase(world, train_size, curve, s_train)
    needed = set(config.features) | {FeatureKind.IPW_CTR, FeatureKind.IPW_COEC}
    table = compute_feature_table(train_log, world, curve, [f for f in FEATURE_ORDER if f in needed],
                                  config.clip_floor)
    test_stream = generate_search_stream(world, config.test_size, s_test)
    feat_seeds = s_feat.spawn(len(FEATURE_ORDER))
    perf = {}
    for kind in config.features:
        perf[kind] = run_test_phase(world, kind, table, test_stream, curve,
                                    feat_seeds[FEATURE_ORDER.index(kind)], config.cold_start_policy)
    seen = table.impressions > 0
    a, b = table[FeatureKind.IPW_CTR][seen], table[FeatureKind.IPW_COEC][seen]
    pairs = np.column_stack([np.nonzero(seen)[0], a, b]) if config.export_feature_pairs else None
    return ReplicationResult(exponent, train_size, rep, perf, _pearson(a, b), pairs,
                             table.records_at_filled_positions)


def _run_job(args):
    return run_replication(*args)


@dataclass
class PerformanceReport:
    config: ExperimentConfig
    results: list  # ReplicationResult, in job order

    def cells(self) -> list[tuple[float, int]]:
        return [(x, t) for x in self.config.exponents for t in self.config.train_sizes]

    def values(self, exponent: float, train_size: int, feature) -> np.ndarray:
        feature = FeatureKind(feature)
        return np.array([r.clicks_per_search[feature] for r in self.results
                         if r.exponent == exponent and r.train_size == train_size])

    def mean(self, exponent, train_size, feature) -> float:
        return float(self.values(exponent, train_size, feature).mean())

    def sd(self, exponent, train_size, feature) -> float:
        v = self.values(exponent, train_size, feature)
        return float(v.std(ddof=1)) if len(v) > 1 else 0.0

    def stderr(self, exponent, train_size, feature) -> float:
        return self.sd(exponent, train_size, feature) / np.sqrt(len(self.values(exponent, train_size, feature)))

    def correlations(self, exponent, train_size) -> np.ndarray:
        return np.array([r.corr_ipwctr_ipwcoec for r in self.results
                         if r.exponent == exponent and r.train_size == train_size])

    def write_results_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["exponent", "train_size", "feature", "replication", "clicks_per_search"])
            for r in self.results:
                for kind in self.config.features:
                    w.writerow([repr(r.exponent), r.train_size, kind.value, r.replication,
                                repr(r.clicks_per_search[kind])])

    def write_summary_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["exponent", "train_size", "feature", "mean", "sd", "replications"])
            for x, t in self.cells():
                for kind in self.config.features:
                    w.writerow([repr(x), t, kind.value, repr(self.mean(x, t, kind)), repr(self.sd(x, t, kind)),
                                len(self.values(x, t, kind))])

    def write_diagnostics_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["exponent", "train_size", "replication", "corr_ipwctr_ipwcoec"])
            for r in self.results:
                w.writerow([repr(r.exponent), r.train_size, r.replication, repr(r.corr_ipwctr_ipwcoec)])

    def write_feature_pairs_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["exponent", "train_size", "replication", "doc_id", "ipw_ctr", "ipw_coec"])
            for r in self.results:
                if r.feature_pairs is None:
                    continue
                for d, a, b in r.feature_pairs.tolist():
                    w.writerow([repr(r.exponent), r.train_size, r.replication, int(d), repr(a), repr(b)])


def run_experiment(config: ExperimentConfig, threads: int = 1, progress: bool = False) -> PerformanceReport:
    """Run every (exponent, train size, replication) job; ``threads > 1`` uses worker processes.

    Output is identical for any worker count.
    """
    jobs = [(config, x, t, rep) for x in config.exponents for t in config.train_sizes
            for rep in range(config.replications)]
    workers = (os.cpu_count() or 1) if threads == 0 else threads
    results = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(_run_job, jobs)):
                results.append(res)
                if progress:
                    log.info("job %d/%d done (x=%s, train=%d, rep=%d)", i + 1, len(jobs),
                             res.exponent, res.train_size, res.replication)
    else:
        for i, job in enumerate(jobs):
            res = _run_job(job)
            results.append(res)
            if progress:
                log.info("job %d/%d done (x=%s, train=%d, rep=%d)", i + 1, len(jobs),
                         res.exponent, res.train_size, res.replication)
    return PerformanceReport(config, results)
