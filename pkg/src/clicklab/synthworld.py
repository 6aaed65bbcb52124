"""Synthetic search worlds: clusters of documents and streams of searches.

Documents are numbered ``0..n_docs-1`` and stored contiguously by cluster, so
cluster ``c`` owns ids ``offsets[c]`` up to ``offsets[c + 1] - 1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError


@dataclass(frozen=True)
class GenConfig:
    n_clusters: int = 100
    mean_cluster_size: float = 100.0
    max_results: int = 10
    proxy_noise_sd: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.mean_cluster_size < 1:
            raise ValueError("mean_cluster_size must be >= 1")
        if self.max_results < 1:
            raise ValueError("max_results must be >= 1")
        if self.proxy_noise_sd < 0:
            raise ValueError("proxy_noise_sd must be >= 0")


@dataclass(frozen=True)
class Document:
    doc_id: int
    cluster_id: int
    relevance: float
    proxy: float


@dataclass(frozen=True)
class Cluster:
    cluster_id: int
    doc_ids: tuple


@dataclass(frozen=True, eq=False)
class World:
    relevance: np.ndarray
    proxy: np.ndarray
    cluster_offsets: np.ndarray
    max_results: int = 10

    @property
    def n_docs(self) -> int:
        return len(self.relevance)

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_offsets) - 1

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.diff(self.cluster_offsets)

    @cached_property
    def cluster_of(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_clusters), self.cluster_sizes)

    @property
    def clusters(self) -> list[Cluster]:
        o = self.cluster_offsets
        return [Cluster(c, tuple(range(o[c], o[c + 1]))) for c in range(self.n_clusters)]

    @property
    def documents(self) -> dict[int, Document]:
        cl = self.cluster_of
        return {i: Document(i, int(cl[i]), float(self.relevance[i]), float(self.proxy[i]))
                for i in range(self.n_docs)}

    def document(self, doc_id: int) -> Document:
        if not 0 <= doc_id < self.n_docs:
            raise KeyError(doc_id)
        return Document(int(doc_id), int(self.cluster_of[doc_id]),
                        float(self.relevance[doc_id]), float(self.proxy[doc_id]))

    def same_as(self, other: "World") -> bool:
        return (self.max_results == other.max_results
                and np.array_equal(self.relevance, other.relevance)
                and np.array_equal(self.proxy, other.proxy)
                and np.array_equal(self.cluster_offsets, other.cluster_offsets))

    def to_csv(self, path) -> None:
        cl = self.cluster_of
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["doc_id", "cluster_id", "relevance", "proxy"])
            for i in range(self.n_docs):
                w.writerow([i, int(cl[i]), repr(float(self.relevance[i])), repr(float(self.proxy[i]))])


def generate_world(config: GenConfig, seed=None) -> World:
    """Exponential cluster sizes (rounded to nearest, floored at 1), uniform relevance,
    proxy = relevance + Gaussian noise.

    ``seed`` overrides ``config.seed`` and may be an int, SeedSequence or Generator.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    sizes = np.maximum(1, np.rint(rng.exponential(config.mean_cluster_size, config.n_clusters))).astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n_docs = int(offsets[-1])
    # open interval: uniform on [0, 1) with 0 redrawn
    relevance = rng.random(n_docs)
    while np.any(relevance == 0.0):
        zero = relevance == 0.0
        relevance[zero] = rng.random(int(zero.sum()))
    proxy = relevance + rng.normal(0.0, config.proxy_noise_sd, n_docs) if config.proxy_noise_sd > 0 else relevance.copy()
    return World(relevance, proxy, offsets, config.max_results)


@dataclass(frozen=True)
class SearchRequest:
    search_id: int
    cluster_id: int
    candidate_doc_ids: tuple


@dataclass(frozen=True, eq=False)
class SearchStream(Sequence):
    """Columnar stream of searches; indexing yields ``SearchRequest``.

    ``candidates`` is ``(n_searches, max_results)`` with ``-1`` padding after the
    first ``lengths[i]`` entries of row ``i``.
    """

    cluster_id: np.ndarray
    candidates: np.ndarray
    lengths: np.ndarray
    first_search_id: int = 0

    def __len__(self):
        return len(self.cluster_id)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        m = int(self.lengths[i])
        return SearchRequest(self.first_search_id + i, int(self.cluster_id[i]),
                             tuple(self.candidates[i, :m].tolist()))

    @property
    def search_ids(self) -> np.ndarray:
        return np.arange(self.first_search_id, self.first_search_id + len(self), dtype=np.int64)

    def same_as(self, other: "SearchStream") -> bool:
        return (self.first_search_id == other.first_search_id
                and np.array_equal(self.cluster_id, other.cluster_id)
                and np.array_equal(self.candidates, other.candidates)
                and np.array_equal(self.lengths, other.lengths))


def _sample_without_replacement(rng, population: np.ndarray, m: int) -> np.ndarray:
    """Uniform ``m``-subsets of ``range(population[i])`` per row, ``-1`` padded.

    Rows with ``population[i] >= m`` use Floyd's algorithm; smaller rows take every
    index in a random order.
    """
    rows = len(population)
    out = np.full((rows, m), -1, dtype=np.int64)
    big = np.nonzero(population >= m)[0]
    small = np.nonzero(population < m)[0]
    if len(big):
        n = population[big]
        chosen = np.empty((len(big), m), dtype=np.int64)
        for step in range(m):
            j = n - m + step
            t = rng.integers(0, j + 1)
            seen = (chosen[:, :step] == t[:, None]).any(axis=1)
            chosen[:, step] = np.where(seen, j, t)
        out[big] = chosen
    if len(small):
        n = population[small]
        keys = rng.random((len(small), m))
        cols = np.arange(m)
        keys[cols[None, :] >= n[:, None]] = np.inf
        perm = np.argsort(keys, axis=1, kind="stable")
        out[small] = np.where(cols[None, :] < n[:, None], perm, -1)
    return out


def generate_search_stream(world: World, n_searches: int, seed=None, first_search_id: int = 0) -> SearchStream:
    """Each search picks a cluster uniformly, then ``min(max_results, size)`` distinct docs uniformly."""
    rng = np.random.default_rng(seed)
    m = world.max_results
    clusters = rng.integers(0, world.n_clusters, size=n_searches)
    sizes = world.cluster_sizes[clusters]
    local = _sample_without_replacement(rng, sizes, m)
    lengths = np.minimum(sizes, m)
    cand = np.where(local >= 0, local + world.cluster_offsets[clusters][:, None], -1)
    return SearchStream(clusters, cand, lengths, first_search_id)


def proxy_relevance_correlation(world: World) -> float:
    if world.n_docs < 2:
        raise InsufficientDataError("need at least two documents")
    return float(np.corrcoef(world.proxy, world.relevance)[0, 1])
