"""Logged search records and per-document aggregation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ValidationError
from .position import PositionBiasCurve, propensity_at

CSV_HEADER = ("search_id", "doc_id", "position", "propensity", "click")


@dataclass(frozen=True)
class Record:
    search_id: object
    doc_id: object
    position: int
    propensity: float
    click: int

    def __post_init__(self):
        if int(self.position) != self.position or self.position < 1:
            raise ValidationError(f"position must be a positive integer, got {self.position!r}")
        if not 0 < self.propensity <= 1:
            raise ValidationError(f"propensity must be in (0, 1], got {self.propensity!r}")
        if self.click not in (0, 1):
            raise ValidationError(f"click must be 0 or 1, got {self.click!r}")

    def check_propensity(self, curve: PositionBiasCurve) -> None:
        expected = propensity_at(curve, self.position)
        if self.propensity != expected:
            raise ValidationError(
                f"record propensity {self.propensity} != curve value {expected} at position {self.position}"
            )


def _validate_searches(search_id: np.ndarray, doc_id: np.ndarray, position: np.ndarray) -> None:
    if len(search_id) < 2:
        return
    for col, what in ((doc_id, "doc_id"), (position, "position")):
        order = np.lexsort((col, search_id))
        s, c = search_id[order], col[order]
        dup = (s[1:] == s[:-1]) & (c[1:] == c[:-1])
        if dup.any():
            i = int(np.argmax(dup))
            raise ValidationError(f"duplicate {what} {c[i]!r} within search {s[i]!r}")


@dataclass(frozen=True, eq=False)
class ClickLog:
    """Columnar, immutable store of records.

    Columns are parallel numpy arrays; ``records()`` yields ``Record`` objects for
    callers who want them one at a time.
    """

    search_id: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    doc_id: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    position: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    propensity: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))
    click: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int8))

    def __post_init__(self):
        cols = {
            "search_id": np.asarray(self.search_id),
            "doc_id": np.asarray(self.doc_id),
            "position": np.asarray(self.position, dtype=np.int64),
            "propensity": np.asarray(self.propensity, dtype=np.float64),
            "click": np.asarray(self.click, dtype=np.int8),
        }
        lengths = {len(v) for v in cols.values()}
        if len(lengths) != 1:
            raise ValidationError("log columns differ in length")
        for name, arr in cols.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_arrays(cls, search_id, doc_id, position, propensity, click, validate: bool = True) -> "ClickLog":
        log = cls(search_id, doc_id, position, propensity, click)
        if validate:
            log.validate()
        return log

    @classmethod
    def from_records(cls, records: Iterable[Record]) -> "ClickLog":
        recs = list(records)
        if not recs:
            return cls()
        return cls.from_arrays(
            np.array([r.search_id for r in recs]),
            np.array([r.doc_id for r in recs]),
            [r.position for r in recs],
            [r.propensity for r in recs],
            [r.click for r in recs],
        )

    def validate(self) -> None:
        if len(self) == 0:
            return
        if self.position.min() < 1:
            raise ValidationError("positions must be >= 1")
        if not ((self.propensity > 0) & (self.propensity <= 1)).all():
            raise ValidationError("propensities must lie in (0, 1]")
        if not np.isin(self.click, (0, 1)).all():
            raise ValidationError("clicks must be 0 or 1")
        _validate_searches(self.search_id, self.doc_id, self.position)

    def check_propensities(self, curve: PositionBiasCurve) -> None:
        """Raise unless every record carries the curve's propensity for its position."""
        if len(self) == 0:
            return
        if self.position.max() > curve.max_position:
            raise ValidationError("log has positions beyond the curve")
        expected = curve.vector().values[self.position - 1]
        if not np.array_equal(expected, self.propensity):
            raise ValidationError("record propensities disagree with the curve")

    def __len__(self) -> int:
        return len(self.position)

    @property
    def total_clicks(self) -> int:
        return int(self.click.sum())

    def records(self) -> Iterator[Record]:
        for s, d, p, w, c in zip(self.search_id.tolist(), self.doc_id.tolist(), self.position.tolist(),
                                 self.propensity.tolist(), self.click.tolist()):
            yield Record(s, d, p, w, c)

    def append_search(self, records: Sequence[Record]) -> "ClickLog":
        return append_search(self, records)

    def to_csv(self, path) -> None:
        write_log_csv(self, path)


def append_search(log: ClickLog, records: Sequence[Record]) -> ClickLog:
    """Return a new log extended by one search worth of records."""
    records = list(records)
    if not records:
        return log
    sids = {r.search_id for r in records}
    if len(sids) != 1:
        raise ValidationError(f"records span several searches: {sorted(map(str, sids))}")
    docs = [r.doc_id for r in records]
    positions = [r.position for r in records]
    if len(set(docs)) != len(docs):
        raise ValidationError("duplicate doc_id within a search")
    if len(set(positions)) != len(positions):
        raise ValidationError("duplicate position within a search")
    (sid,) = sids
    if len(log) and np.any(log.search_id == sid):
        raise ValidationError(f"search {sid!r} already logged")
    batch = ClickLog.from_records(records)
    if len(log) == 0:
        return batch
    return ClickLog(
        np.concatenate([log.search_id, batch.search_id]),
        np.concatenate([log.doc_id, batch.doc_id]),
        np.concatenate([log.position, batch.position]),
        np.concatenate([log.propensity, batch.propensity]),
        np.concatenate([log.click, batch.click]),
    )


@dataclass(frozen=True, eq=False)
class DocumentStats:
    """Impression and click histograms of one document, indexed by position ``1..K``."""

    doc_id: object
    impressions_by_position: np.ndarray
    clicks_by_position: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.impressions_by_position, dtype=np.int64)
        c = np.asarray(self.clicks_by_position, dtype=np.int64)
        if n.shape != c.shape or n.ndim != 1:
            raise ValidationError("impression and click histograms must be 1-D and equal length")
        if (n < 0).any() or (c < 0).any() or (c > n).any():
            raise ValidationError("need 0 <= clicks <= impressions at every position")
        n.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "impressions_by_position", n)
        object.__setattr__(self, "clicks_by_position", c)

    @classmethod
    def from_positions(cls, positions, clicks, max_position: int, doc_id=None) -> "DocumentStats":
        """Build from a document's raw position and click vectors."""
        positions = np.asarray(positions, dtype=np.int64)
        clicks = np.asarray(clicks, dtype=np.float64)
        n = np.bincount(positions - 1, minlength=max_position)
        c = np.bincount(positions - 1, weights=clicks, minlength=max_position).astype(np.int64)
        return cls(doc_id, n, c)

    @property
    def total_impressions(self) -> int:
        return int(self.impressions_by_position.sum())

    @property
    def total_clicks(self) -> int:
        return int(self.clicks_by_position.sum())

    def __eq__(self, other):
        if not isinstance(other, DocumentStats):
            return NotImplemented
        return (self.doc_id == other.doc_id
                and np.array_equal(self.impressions_by_position, other.impressions_by_position)
                and np.array_equal(self.clicks_by_position, other.clicks_by_position))

    def with_impression(self, k: int, click: int) -> "DocumentStats":
        n = self.impressions_by_position.copy()
        c = self.clicks_by_position.copy()
        n[k - 1] += 1
        c[k - 1] += click
        return DocumentStats(self.doc_id, n, c)


def position_histograms(doc_index: np.ndarray, position: np.ndarray, click: np.ndarray,
                        n_docs: int, max_position: int) -> tuple[np.ndarray, np.ndarray]:
    """Impression and click counts as ``(n_docs, max_position)`` matrices.

    ``doc_index`` must already be dense integers in ``[0, n_docs)``.
    """
    flat = np.asarray(doc_index, dtype=np.int64) * max_position + (np.asarray(position, dtype=np.int64) - 1)
    size = n_docs * max_position
    shown = np.bincount(flat, minlength=size).reshape(n_docs, max_position)
    clicked = np.bincount(flat, weights=np.asarray(click, dtype=np.float64), minlength=size)
    return shown, clicked.astype(np.int64).reshape(n_docs, max_position)


def aggregate(log: ClickLog, max_position: int | None = None) -> dict:
    if len(log) == 0:
        return {}
    k = int(log.position.max()) if max_position is None else int(max_position)
    if log.position.max() > k:
        raise ValidationError(f"log has positions beyond {k}")
    docs, dense = np.unique(log.doc_id, return_inverse=True)
    shown, clicked = position_histograms(dense, log.position, log.click, len(docs), k)
    return {d: DocumentStats(d, shown[i], clicked[i]) for i, d in enumerate(docs.tolist())}


def write_log_csv(log: ClickLog, path) -> None:
    """Rows sorted by search (first-appearance order), then by position."""
    if len(log):
        _, first = np.unique(log.search_id, return_index=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        _, inv = np.unique(log.search_id, return_inverse=True)
        order = np.lexsort((log.position, rank[inv]))
    else:
        order = np.empty(0, dtype=np.int64)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in order.tolist():
            w.writerow([log.search_id[i], log.doc_id[i], int(log.position[i]),
                        repr(float(log.propensity[i])), int(log.click[i])])


def read_log_csv(path) -> ClickLog:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValidationError(f"{path}: expected header {','.join(CSV_HEADER)}")
    body = rows[1:]
    if not body:
        return ClickLog()

    def _col(i):
        vals = [r[i] for r in body]
        try:
            return np.array([int(v) for v in vals])
        except ValueError:
            return np.array(vals)

    return ClickLog.from_arrays(
        _col(0), _col(1),
        [int(r[2]) for r in body], [float(r[3]) for r in body], [int(r[4]) for r in body],
    )
