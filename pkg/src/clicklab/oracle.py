"""Brute-force Monte Carlo checks of the estimators' analytical properties.

Feature values here are computed straight from simulated per-record click
vectors, independently of ``clicklab.estimators``, so agreement between the two
is itself evidence of correctness.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .estimators import DEFAULT_CLIP_FLOOR, FeatureKind
from .position import PositionBiasCurve

BATCH_ROWS = 50_000


class Status(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"
    SKIPPED = "SKIPPED"


@dataclass(frozen=True)
class OracleScenario:
    relevance: float
    position_schedule: tuple
    curve: PositionBiasCurve = field(default_factory=PositionBiasCurve)
    replications: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.relevance < 1:
            raise ValueError("relevance must be in (0, 1)")
        object.__setattr__(self, "position_schedule", tuple(int(p) for p in self.position_schedule))
        if not self.position_schedule:
            raise ValueError("empty position schedule")
        if min(self.position_schedule) < 1 or max(self.position_schedule) > self.curve.max_position:
            raise ValueError("schedule positions outside the curve")
        if self.replications < 2:
            raise ValueError("need at least 2 replications")


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    count: int

    @property
    def stderr(self) -> float:
        return float(np.sqrt(self.variance / self.count))

    def merge(self, other: "Moments") -> "Moments":
        """Combine two batches (Chan et al. parallel update, on unbiased variances)."""
        n = self.count + other.count
        delta = other.mean - self.mean
        m2 = self.variance * (self.count - 1) + other.variance * (other.count - 1)
        m2 += delta * delta * self.count * other.count / n
        return Moments(self.mean + delta * other.count / n, m2 / (n - 1), n)

    @classmethod
    def of(cls, x: np.ndarray) -> "Moments":
        return cls(float(x.mean()), float(x.var(ddof=1)), len(x))


def simulate_click_vectors(relevance: float, positions: np.ndarray, theta: np.ndarray,
                           rows: int, rng) -> np.ndarray:
    """``(rows, n)`` 0/1 clicks: examined with prob theta[position], relevant with prob relevance."""
    examined = rng.random((rows, len(positions))) < theta[positions - 1]
    relevant = rng.random((rows, len(positions))) < relevance
    return (examined & relevant).astype(np.float64)


def feature_from_clicks(feature, positions, clicks, weights, clip_floor: float = DEFAULT_CLIP_FLOOR) -> np.ndarray:
    """Feature value per row of raw click vectors, straight from the record-level definitions.

    ``weights`` holds the propensity used by the feature (true or estimated),
    indexed by position ``1..K``.
    """
    feature = FeatureKind(feature)
    positions = np.asarray(positions, dtype=np.int64)
    clicks = np.atleast_2d(np.asarray(clicks, dtype=np.float64))
    per_record = np.asarray(weights, dtype=np.float64)[positions - 1]
    if feature is FeatureKind.CTR:
        return clicks.mean(axis=1)
    if feature in (FeatureKind.IPW_CTR, FeatureKind.EMPIRICAL_CTR):
        return (clicks / per_record).mean(axis=1)
    if feature is FeatureKind.CLIPPED_IPW_CTR:
        return (clicks / np.maximum(per_record, clip_floor)).mean(axis=1)
    if feature is FeatureKind.SNIPS:
        return (clicks / per_record).sum(axis=1) / (1.0 / per_record).sum()
    if feature in (FeatureKind.COEC, FeatureKind.IPW_COEC):
        return clicks.sum(axis=1) / per_record.sum()
    raise ValueError(f"{feature} is not a click feature")


def mc_feature_moments(scenario: OracleScenario, feature, weights=None, rng=None) -> Moments:
    """Sample moments of a feature over ``scenario.replications`` simulated click vectors.

    ``weights`` defaults to the scenario's true propensities.
    """
    theta = scenario.curve.vector().values
    weights = theta if weights is None else np.asarray(getattr(weights, "values", weights), dtype=np.float64)
    rng = np.random.default_rng(scenario.seed if rng is None else rng)
    positions = np.array(scenario.position_schedule)
    total = None
    left = scenario.replications
    while left > 0:
        rows = min(BATCH_ROWS, left)
        clicks = simulate_click_vectors(scenario.relevance, positions, theta, rows, rng)
        batch = Moments.of(feature_from_clicks(feature, positions, clicks, weights))
        total = batch if total is None else total.merge(batch)
        left -= rows
    return total


@dataclass(frozen=True)
class ClaimResult:
    claim: str
    expected: float
    measured: float
    stderr: float
    status: Status
    note: str = ""


def _z_status(measured: float, expected: float, stderr: float, direction: int, z: float = 3.0) -> Status:
    """``direction`` +1: measured above expected; -1: below; 0: equal within z standard errors."""
    if stderr == 0:
        diff = measured - expected
        if direction == 0:
            return Status.PASS if diff == 0 else Status.FAIL
        return Status.PASS if diff * direction > 0 else Status.FAIL
    score = (measured - expected) / stderr
    if direction == 0:
        return Status.PASS if abs(score) <= z else Status.FAIL
    score *= direction
    if score > z:
        return Status.PASS
    if score < -z:
        return Status.FAIL
    return Status.INCONCLUSIVE


def check_unbiased(scenario: OracleScenario, feature, max_stderr: float = 0.01, rng=None) -> ClaimResult:
    m = mc_feature_moments(scenario, feature, rng=rng)
    status = _z_status(m.mean, scenario.relevance, m.stderr, 0)
    note = ""
    if m.stderr >= max_stderr:
        status, note = Status.INCONCLUSIVE, f"stderr {m.stderr:.4g} >= {max_stderr}"
    name = f"unbiased:{FeatureKind(feature).value}:r={scenario.relevance}:schedule={_sched(scenario)}"
    return ClaimResult(name, scenario.relevance, m.mean, m.stderr, status, note)


def _sched(s: OracleScenario) -> str:
    return "-".join(map(str, s.position_schedule))


@dataclass(frozen=True)
class VarianceCheck:
    position: int
    expected_ratio: float
    measured_ratio: float
    passed: bool


def verify_variance_law(r: float, k: int, curve: PositionBiasCurve, replications: int = 200_000,
                        seed=0, tolerance: float = 0.10) -> VarianceCheck:
    """Var(single-record IPW-CTR) / Var(single-record CTR) at a fixed position ``k``.

    The two variances come from independent click draws.
    """
    rng = np.random.default_rng(seed)
    theta = curve.vector().values
    pos = np.array([k])
    ipw = feature_from_clicks(FeatureKind.IPW_CTR, pos, simulate_click_vectors(r, pos, theta, replications, rng), theta)
    raw = feature_from_clicks(FeatureKind.CTR, pos, simulate_click_vectors(r, pos, theta, replications, rng), theta)
    expected = 1.0 / theta[k - 1] ** 2
    measured = float(ipw.var(ddof=1) / raw.var(ddof=1))
    return VarianceCheck(k, expected, measured, bool(abs(measured / expected - 1.0) <= tolerance))


@dataclass(frozen=True)
class TwoPointCheck:
    position: int
    values_ok: bool
    expected_freq: float
    measured_freq: float
    stderr: float
    status: Status


def verify_single_impression_law(r: float, k: int, curve: PositionBiasCurve, replications: int = 200_000,
                                 seed=0) -> TwoPointCheck:
    """With one impression at ``k`` IPW-CTR is 1/theta_k with probability r*theta_k, else 0."""
    rng = np.random.default_rng(seed)
    theta = curve.vector().values
    pos = np.array([k])
    vals = feature_from_clicks(FeatureKind.IPW_CTR, pos, simulate_click_vectors(r, pos, theta, replications, rng), theta)
    high = 1.0 / theta[k - 1]
    values_ok = bool(np.all((vals == 0.0) | (vals == high)))
    p = r * theta[k - 1]
    freq = float(np.mean(vals == high))
    se = float(np.sqrt(p * (1 - p) / replications))
    status = _z_status(freq, p, se, 0) if values_ok else Status.FAIL
    return TwoPointCheck(k, values_ok, p, freq, se, status)


def verify_bias_orderings(scenario: OracleScenario, theta_hat) -> dict:
    """Check E[Empirical-CTR] > r, E[CTR] < r and E[SNIPS] < r by simulation.

    Each check needs 3 standard errors of separation; weaker separation is
    INCONCLUSIVE. Checks whose premise fails for this scenario are SKIPPED.
    """
    theta = scenario.curve.vector().values
    theta_hat = np.asarray(getattr(theta_hat, "values", theta_hat), dtype=np.float64)
    occupied = np.unique(np.array(scenario.position_schedule)) - 1
    r = scenario.relevance
    out = {}
    rng = np.random.default_rng(scenario.seed)

    premise = (theta_hat[0] == theta[0] and np.all(theta_hat <= theta)
               and np.any(theta_hat[occupied] < theta[occupied]))
    if premise:
        m = mc_feature_moments(scenario, FeatureKind.EMPIRICAL_CTR, theta_hat, rng)
        out["empirical_ctr_above_relevance"] = ClaimResult(
            "empirical_ctr_above_relevance", r, m.mean, m.stderr, _z_status(m.mean, r, m.stderr, +1))
    else:
        out["empirical_ctr_above_relevance"] = ClaimResult(
            "empirical_ctr_above_relevance", r, float("nan"), float("nan"), Status.SKIPPED,
            "estimated propensities do not understate the true ones")

    biased = bool(np.any(theta[occupied] < 1))
    for name, feature in (("ctr_below_relevance", FeatureKind.CTR), ("snips_below_relevance", FeatureKind.SNIPS)):
        if biased:
            m = mc_feature_moments(scenario, feature, rng=rng)
            out[name] = ClaimResult(name, r, m.mean, m.stderr, _z_status(m.mean, r, m.stderr, -1))
        else:
            out[name] = ClaimResult(name, r, float("nan"), float("nan"), Status.SKIPPED,
                                    "no occupied position has propensity below 1")
    return out


@dataclass(frozen=True)
class OracleConfig:
    replications: int = 200_000
    seed: int = 0
    exponent: float = 0.5
    max_position: int = 10
    relevances: tuple = (0.1, 0.5, 0.9)
    mixed_schedule: tuple = (1, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    fixed_position: int = 4
    fixed_count: int = 5
    variance_positions: tuple = (2, 4, 9)
    variance_relevance: float = 0.5
    theta_hat_scale: float = 0.8

    def __post_init__(self):
        if self.replications < 2:
            raise ValueError("replications must be >= 2")
        object.__setattr__(self, "relevances", tuple(float(r) for r in self.relevances))
        object.__setattr__(self, "mixed_schedule", tuple(int(p) for p in self.mixed_schedule))
        object.__setattr__(self, "variance_positions", tuple(int(p) for p in self.variance_positions))
        if not 0 < self.theta_hat_scale <= 1:
            raise ValueError("theta_hat_scale must be in (0, 1]")


def run_oracle_suite(config: OracleConfig) -> list[ClaimResult]:
    curve = PositionBiasCurve(config.exponent, config.max_position)
    theta = curve.vector().values
    root = np.random.SeedSequence(config.seed)
    seeds = iter(root.spawn(64))
    claims = []
    fixed = (config.fixed_position,) * config.fixed_count
    for r in config.relevances:
        for sched in (config.mixed_schedule, fixed):
            sc = OracleScenario(r, sched, curve, config.replications, 0)
            claims.append(check_unbiased(sc, FeatureKind.IPW_CTR, rng=np.random.default_rng(next(seeds))))
            claims.append(check_unbiased(sc, FeatureKind.IPW_COEC, rng=np.random.default_rng(next(seeds))))
    for k in config.variance_positions:
        v = verify_variance_law(config.variance_relevance, k, curve, config.replications, next(seeds))
        claims.append(ClaimResult(f"variance_ratio:k={k}", v.expected_ratio, v.measured_ratio, float("nan"),
                                  Status.PASS if v.passed else Status.FAIL, "tolerance 10% relative"))
        t = verify_single_impression_law(config.variance_relevance, k, curve, config.replications, next(seeds))
        claims.append(ClaimResult(f"single_impression_freq:k={k}", t.expected_freq, t.measured_freq,
                                  t.stderr, t.status, "" if t.values_ok else "values outside {0, 1/theta_k}"))
    theta_hat = theta.copy()
    theta_hat[1:] *= config.theta_hat_scale
    for r in config.relevances:
        sc = OracleScenario(r, config.mixed_schedule, curve, config.replications,
                            int(next(seeds).generate_state(1)[0]))
        for res in verify_bias_orderings(sc, theta_hat).values():
            claims.append(ClaimResult(f"{res.claim}:r={r}", res.expected, res.measured, res.stderr,
                                      res.status, res.note))
    return claims


def write_oracle_csv(claims: Sequence[ClaimResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["claim", "expected", "measured", "stderr", "status"])
        for c in claims:
            w.writerow([c.claim, repr(float(c.expected)), repr(float(c.measured)), repr(float(c.stderr)),
                        c.status.value])
