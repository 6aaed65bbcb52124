"""Historical click-through features computed from position histograms.

Every estimator is a function of the per-position impression counts ``n_k`` and
click counts ``chi_k`` of a document plus a weight vector indexed by position.
The ``*_matrix`` functions take ``(..., K)`` arrays and return NaN where a
document has no impressions; the scalar wrappers take a ``DocumentStats`` and
return ``None`` for that case.
"""
from __future__ import annotations

import enum
from typing import Optional

import numpy as np

from .clicklog import DocumentStats
from .errors import DegenerateDenominatorError, DivisionHazardError, PropensityCoverageError
from .position import PropensityVector

DEFAULT_CLIP_FLOOR = 0.1


class FeatureKind(str, enum.Enum):
    CTR = "CTR"
    IPW_CTR = "IPW_CTR"
    EMPIRICAL_CTR = "EMPIRICAL_CTR"
    SNIPS = "SNIPS"
    COEC = "COEC"
    IPW_COEC = "IPW_COEC"
    CLIPPED_IPW_CTR = "CLIPPED_IPW_CTR"
    PROXY = "PROXY"
    TRUE_RELEVANCE = "TRUE_RELEVANCE"

    @property
    def from_clicks(self) -> bool:
        return self not in (FeatureKind.PROXY, FeatureKind.TRUE_RELEVANCE)

    def __str__(self):
        return self.value


CLICK_FEATURES = tuple(f for f in FeatureKind if f.from_clicks)


def _weights(theta) -> np.ndarray:
    if isinstance(theta, PropensityVector):
        return theta.values
    return np.asarray(theta, dtype=np.float64)


def _prepare(shown, clicked, theta):
    shown = np.asarray(shown, dtype=np.float64)
    clicked = np.asarray(clicked, dtype=np.float64)
    w = _weights(theta)
    if shown.shape[-1] != len(w) or clicked.shape != shown.shape:
        raise ValueError(f"histogram width {shown.shape[-1]} does not match {len(w)} weights")
    return shown, clicked, w


def _occupied(shown) -> np.ndarray:
    return (shown > 0).reshape(-1, shown.shape[-1]).any(axis=0)


def _check_true(shown, w):
    bad = _occupied(shown) & ~(w > 0)
    if bad.any():
        k = int(np.argmax(bad)) + 1
        raise DivisionHazardError(f"propensity {w[k - 1]} at occupied position {k}")


def _check_estimated(shown, w):
    bad = _occupied(shown) & ~(w > 0)
    if bad.any():
        k = int(np.argmax(bad)) + 1
        raise PropensityCoverageError(f"estimated propensity missing or zero at occupied position {k}")


def _check_present(shown, w):
    bad = _occupied(shown) & np.isnan(w)
    if bad.any():
        k = int(np.argmax(bad)) + 1
        raise PropensityCoverageError(f"estimated propensity missing at occupied position {k}")


def _safe(w):
    # weights at unoccupied positions never contribute; keep them finite
    return np.where(w > 0, w, 1.0)


def _ratio(num, den, n):
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / np.where(n > 0, den, 1.0)
    return np.where(n > 0, out, np.nan)


def ctr_matrix(shown, clicked):
    shown = np.asarray(shown, dtype=np.float64)
    clicked = np.asarray(clicked, dtype=np.float64)
    n = shown.sum(axis=-1)
    return _ratio(clicked.sum(axis=-1), n, n)


def ipw_ctr_matrix(shown, clicked, theta):
    shown, clicked, w = _prepare(shown, clicked, theta)
    _check_true(shown, w)
    n = shown.sum(axis=-1)
    return _ratio((clicked / _safe(w)).sum(axis=-1), n, n)


def empirical_ctr_matrix(shown, clicked, theta_hat):
    shown, clicked, w = _prepare(shown, clicked, theta_hat)
    _check_estimated(shown, w)
    n = shown.sum(axis=-1)
    return _ratio((clicked / _safe(w)).sum(axis=-1), n, n)


def snips_matrix(shown, clicked, theta):
    shown, clicked, w = _prepare(shown, clicked, theta)
    _check_true(shown, w)
    inv = 1.0 / _safe(w)
    return _ratio((clicked * inv).sum(axis=-1), (shown * inv).sum(axis=-1), shown.sum(axis=-1))


def coec_matrix(shown, clicked, weights):
    """Clicks over expected clicks, expected clicks being ``sum_k n_k * w_k``.

    With observed position click rates as ``weights`` this is COEC; with the true
    propensities it is IPW-COEC.
    """
    shown, clicked, w = _prepare(shown, clicked, weights)
    _check_present(shown, w)
    n = shown.sum(axis=-1)
    expected = (shown * np.where(np.isnan(w), 0.0, w)).sum(axis=-1)
    if np.any((n > 0) & (expected <= 0)):
        raise DegenerateDenominatorError("zero expected clicks for a document with impressions")
    return _ratio(clicked.sum(axis=-1), expected, n)


def ipw_coec_matrix(shown, clicked, theta):
    shown, clicked, w = _prepare(shown, clicked, theta)
    _check_true(shown, w)
    return coec_matrix(shown, clicked, w)


def clipped_ipw_ctr_matrix(shown, clicked, theta, clip_floor=DEFAULT_CLIP_FLOOR):
    if not 0 < clip_floor <= 1:
        raise ValueError(f"clip_floor must be in (0, 1], got {clip_floor}")
    w = _weights(theta)
    return ipw_ctr_matrix(shown, clicked, np.maximum(w, clip_floor))


def feature_matrix(kind: FeatureKind, shown, clicked, theta, theta_hat=None,
                   clip_floor: float = DEFAULT_CLIP_FLOOR) -> np.ndarray:
    kind = FeatureKind(kind)
    if kind in (FeatureKind.EMPIRICAL_CTR, FeatureKind.COEC) and theta_hat is None:
        raise ValueError(f"{kind} needs estimated propensities")
    if kind is FeatureKind.CTR:
        return ctr_matrix(shown, clicked)
    if kind is FeatureKind.IPW_CTR:
        return ipw_ctr_matrix(shown, clicked, theta)
    if kind is FeatureKind.EMPIRICAL_CTR:
        return empirical_ctr_matrix(shown, clicked, theta_hat)
    if kind is FeatureKind.SNIPS:
        return snips_matrix(shown, clicked, theta)
    if kind is FeatureKind.COEC:
        return coec_matrix(shown, clicked, theta_hat)
    if kind is FeatureKind.IPW_COEC:
        return ipw_coec_matrix(shown, clicked, theta)
    if kind is FeatureKind.CLIPPED_IPW_CTR:
        return clipped_ipw_ctr_matrix(shown, clicked, theta, clip_floor)
    raise ValueError(f"{kind} is not computed from clicks")


def _scalar(values) -> Optional[float]:
    v = float(np.asarray(values).reshape(()))
    return None if np.isnan(v) else v


def ctr(stats: DocumentStats) -> Optional[float]:
    return _scalar(ctr_matrix(stats.impressions_by_position, stats.clicks_by_position))


def ipw_ctr(stats: DocumentStats, theta) -> Optional[float]:
    """Mean of click / propensity over the document's impressions."""
    return _scalar(ipw_ctr_matrix(stats.impressions_by_position, stats.clicks_by_position, theta))


def empirical_ctr(stats: DocumentStats, theta_hat) -> Optional[float]:
    return _scalar(empirical_ctr_matrix(stats.impressions_by_position, stats.clicks_by_position, theta_hat))


def snips(stats: DocumentStats, theta) -> Optional[float]:
    return _scalar(snips_matrix(stats.impressions_by_position, stats.clicks_by_position, theta))


def coec(stats: DocumentStats, theta_hat) -> Optional[float]:
    return _scalar(coec_matrix(stats.impressions_by_position, stats.clicks_by_position, theta_hat))


def ipw_coec(stats: DocumentStats, theta) -> Optional[float]:
    return _scalar(ipw_coec_matrix(stats.impressions_by_position, stats.clicks_by_position, theta))


def clipped_ipw_ctr(stats: DocumentStats, theta, clip_floor: float = DEFAULT_CLIP_FLOOR) -> Optional[float]:
    return _scalar(clipped_ipw_ctr_matrix(stats.impressions_by_position, stats.clicks_by_position,
                                          theta, clip_floor))


def click_sensitivity(stats: DocumentStats, theta, k: int) -> tuple[float, float]:
    """Change in IPW-CTR and IPW-COEC if one more impression at ``k`` is clicked rather than not."""
    clicked = stats.with_impression(k, 1)
    skipped = stats.with_impression(k, 0)
    return (ipw_ctr(clicked, theta) - ipw_ctr(skipped, theta),
            ipw_coec(clicked, theta) - ipw_coec(skipped, theta))
