"""Position-based click model: click iff examined and relevant, drawn independently."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clicklog import Record
from .errors import PositionRangeError, ValidationError
from .position import PositionBiasCurve
from .synthworld import World


@dataclass(frozen=True)
class RankedList:
    search_id: object
    entries: tuple  # ((doc_id, position), ...)

    def __post_init__(self):
        positions = sorted(p for _, p in self.entries)
        if positions != list(range(1, len(self.entries) + 1)):
            raise ValidationError(f"positions must be exactly 1..{len(self.entries)}, got {positions}")
        docs = [d for d, _ in self.entries]
        if len(set(docs)) != len(docs):
            raise ValidationError("duplicate document in ranked list")

    @classmethod
    def from_order(cls, search_id, doc_ids) -> "RankedList":
        return cls(search_id, tuple((d, i + 1) for i, d in enumerate(doc_ids)))

    @property
    def doc_ids(self) -> list:
        return [d for d, _ in sorted(self.entries, key=lambda e: e[1])]


def simulate_batch(ordered: np.ndarray, world: World, theta: np.ndarray, rng) -> np.ndarray:
    """Clicks for a ``(n_searches, width)`` matrix of doc ids in rank order (``-1`` = empty slot).

    Returns an int8 matrix of the same shape; empty slots never click. The number
    of random draws depends only on the matrix shape.
    """
    rng = np.random.default_rng(rng)
    ordered = np.asarray(ordered, dtype=np.int64)
    if ordered.ndim != 2:
        raise ValueError("ordered must be 2-D")
    width = ordered.shape[1]
    if width > len(theta):
        raise PositionRangeError(f"list width {width} exceeds curve length {len(theta)}")
    filled = ordered >= 0
    if np.any(ordered >= world.n_docs):
        raise KeyError(int(ordered.max()))
    examined = rng.random(ordered.shape) < np.asarray(theta)[None, :width]
    relevant = rng.random(ordered.shape) < np.where(filled, world.relevance[np.where(filled, ordered, 0)], 0.0)
    return (examined & relevant & filled).astype(np.int8)


def simulate_clicks(ranked: RankedList, world: World, curve: PositionBiasCurve, seed=None) -> list[Record]:
    docs = ranked.doc_ids
    if len(docs) > curve.max_position:
        raise PositionRangeError(f"list of {len(docs)} exceeds max_position {curve.max_position}")
    for d in docs:
        if not (isinstance(d, (int, np.integer)) and 0 <= d < world.n_docs):
            raise KeyError(d)
    theta = curve.vector().values
    if not docs:
        return []
    clicks = simulate_batch(np.array([docs]), world, theta, seed)[0]
    return [Record(ranked.search_id, int(d), k + 1, float(theta[k]), int(clicks[k]))
            for k, d in enumerate(docs)]
