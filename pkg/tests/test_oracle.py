import numpy as np
import pytest

from clicklab.estimators import FeatureKind as F
from clicklab.oracle import (
    Moments, OracleConfig, OracleScenario, Status, check_unbiased, mc_feature_moments, run_oracle_suite,
    verify_bias_orderings, verify_single_impression_law, verify_variance_law,
)
from clicklab.position import PositionBiasCurve

CURVE = PositionBiasCurve(0.5, 10)
MIXED = (1, 2, 3, 5, 8, 10)


def test_moments_merge_matches_direct():
    x = np.random.default_rng(0).normal(size=1001)
    merged = Moments.of(x[:300]).merge(Moments.of(x[300:]))
    assert merged.mean == pytest.approx(x.mean(), abs=1e-12)
    assert merged.variance == pytest.approx(x.var(ddof=1), rel=1e-12)
    assert merged.count == 1001


def test_ipw_ctr_unbiased_any_schedule():
    m = mc_feature_moments(OracleScenario(0.3, MIXED, CURVE, 200_000, 1), F.IPW_CTR)
    assert m.stderr < 0.01
    assert abs(m.mean - 0.3) < 3 * m.stderr


def test_ipw_coec_unbiased_fixed_schedule():
    m = mc_feature_moments(OracleScenario(0.3, MIXED, CURVE, 200_000, 2), F.IPW_COEC)
    assert abs(m.mean - 0.3) < 3 * m.stderr


def test_ctr_mean_at_fixed_position():
    m = mc_feature_moments(OracleScenario(0.4, (4, 4, 4), CURVE, 200_000, 3), F.CTR)
    assert abs(m.mean - 0.2) < 3 * m.stderr


def test_reproducible():
    sc = OracleScenario(0.3, MIXED, CURVE, 10_000, 9)
    assert mc_feature_moments(sc, F.SNIPS) == mc_feature_moments(sc, F.SNIPS)


def test_batches_do_not_change_scale(monkeypatch):
    from clicklab import oracle
    monkeypatch.setattr(oracle, "BATCH_ROWS", 997)
    m = mc_feature_moments(OracleScenario(0.5, (4,), CURVE, 20_000, 4), F.IPW_CTR)
    assert m.count == 20_000
    assert abs(m.mean - 0.5) < 3 * m.stderr


@pytest.mark.parametrize("k, ratio", [(1, 1.0), (4, 4.0), (9, 9.0)])
def test_variance_law(k, ratio):
    v = verify_variance_law(0.5, k, CURVE, 200_000, seed=k)
    assert v.expected_ratio == pytest.approx(ratio)
    assert v.passed, v


def test_single_impression_law():
    t = verify_single_impression_law(0.5, 4, CURVE, 100_000, 5)
    assert t.values_ok and t.status is Status.PASS
    assert t.expected_freq == pytest.approx(0.25)


def test_bias_orderings_mixed():
    theta = CURVE.vector().values
    theta_hat = theta.copy()
    theta_hat[1:] *= 0.8
    res = verify_bias_orderings(OracleScenario(0.5, MIXED, CURVE, 200_000, 6), theta_hat)
    assert {r.status for r in res.values()} == {Status.PASS}


def test_bias_orderings_skips():
    theta = CURVE.vector().values
    res = verify_bias_orderings(OracleScenario(0.5, MIXED, CURVE, 20_000, 7), theta)
    assert res["empirical_ctr_above_relevance"].status is Status.SKIPPED
    top = verify_bias_orderings(OracleScenario(0.5, (1, 1, 1), CURVE, 200_000, 8), theta)
    assert top["ctr_below_relevance"].status is Status.SKIPPED
    assert top["snips_below_relevance"].status is Status.SKIPPED
    m = mc_feature_moments(OracleScenario(0.5, (1, 1, 1), CURVE, 200_000, 8), F.CTR)
    assert abs(m.mean - 0.5) < 3 * m.stderr


def test_inconclusive_when_underpowered():
    theta_hat = CURVE.vector().values.copy()
    theta_hat[1:] *= 0.999
    res = verify_bias_orderings(OracleScenario(0.5, MIXED, CURVE, 1_000, 1), theta_hat)
    assert res["empirical_ctr_above_relevance"].status is Status.INCONCLUSIVE


def test_unbiased_check_flags_large_stderr():
    res = check_unbiased(OracleScenario(0.5, (10,), PositionBiasCurve(2.0), 100, 0), F.IPW_CTR)
    assert res.status is Status.INCONCLUSIVE


def test_suite_statuses_stable_across_seeds():
    # each 3-sigma check has a 0.27% false-alarm rate: a real defect fails on every seed,
    # noise fails on at most one seed and rarely more than a handful of checks in total
    runs = [run_oracle_suite(OracleConfig(replications=50_000, seed=s)) for s in range(5)]
    names = [c.claim for c in runs[0]]
    assert all([c.claim for c in r] == names for r in runs)
    off = [(i, c.claim) for i, r in enumerate(runs) for c in r if c.status is not Status.PASS]
    per_claim = {n: sum(1 for _, c in off if c == n) for n in names}
    assert max(per_claim.values()) <= 1, off
    assert len(off) <= 3, off
