"""Position bias curves and propensity vectors.

Examination probability at (1-indexed) position ``k`` is ``k ** -exponent``, so the
top slot is always examined and deeper slots are examined less.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, PositionRangeError


@dataclass(frozen=True)
class PositionBiasCurve:
    exponent: float = 0.5
    max_position: int = 10

    def __post_init__(self):
        if not (self.exponent >= 0 and np.isfinite(self.exponent)):
            raise ValueError(f"exponent must be finite and >= 0, got {self.exponent}")
        if int(self.max_position) != self.max_position or self.max_position < 1:
            raise ValueError(f"max_position must be a positive integer, got {self.max_position}")

    def propensity(self, k: int) -> float:
        return propensity_at(self, k)

    def vector(self) -> "PropensityVector":
        return true_propensity_vector(self)


@dataclass(frozen=True, eq=False)
class PropensityVector:
    """Propensities for positions ``1..len(values)``; NaN marks a missing position."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("propensity vector must be one-dimensional")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k: int) -> float:
        """Propensity at 1-indexed position ``k``."""
        if not 1 <= k <= len(self.values):
            raise PositionRangeError(f"position {k} outside 1..{len(self.values)}")
        return float(self.values[k - 1])

    def __eq__(self, other):
        if not isinstance(other, PropensityVector):
            return NotImplemented
        return np.array_equal(self.values, other.values, equal_nan=True)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def filled(self) -> tuple["PropensityVector", np.ndarray]:
        """Replace missing or zero entries by the nearest shallower usable value.

        Positions with no usable shallower neighbour take the nearest deeper one;
        a vector with no usable entry at all becomes all ones. Returns the filled
        vector and the boolean mask of positions that were replaced.
        """
        vals = self.values.copy()
        bad = ~(vals > 0)
        if bad.all():
            return PropensityVector(np.ones_like(vals)), bad
        idx = np.where(~bad, np.arange(len(vals)), -1)
        idx = np.maximum.accumulate(idx)
        first_good = int(np.argmax(~bad))
        idx[idx < 0] = first_good
        return PropensityVector(vals[idx]), bad


def propensity_at(curve: PositionBiasCurve, k: int) -> float:
    if not 1 <= k <= curve.max_position:
        raise PositionRangeError(f"position {k} outside 1..{curve.max_position}")
    return float(np.float64(k) ** -np.float64(curve.exponent))


def true_propensity_vector(curve: PositionBiasCurve) -> PropensityVector:
    k = np.arange(1, curve.max_position + 1, dtype=np.float64)
    return PropensityVector(k ** -np.float64(curve.exponent))


def empirical_propensities(log, max_position: int | None = None) -> PropensityVector:
    """Observed click rate at each position over a whole click log.

    Positions that never appear in the log are NaN (missing), never 0.
    """
    if len(log) == 0:
        raise EmptyInputError("cannot estimate propensities from an empty log")
    pos = np.asarray(log.position, dtype=np.int64)
    size = int(pos.max()) if max_position is None else int(max_position)
    if pos.min() < 1 or pos.max() > size:
        raise PositionRangeError(f"log positions outside 1..{size}")
    shown = np.bincount(pos - 1, minlength=size).astype(np.float64)
    clicked = np.bincount(pos - 1, weights=np.asarray(log.click, dtype=np.float64), minlength=size)
    with np.errstate(invalid="ignore", divide="ignore"):
        rates = np.where(shown > 0, clicked / np.where(shown > 0, shown, 1.0), np.nan)
    return PropensityVector(rates)
