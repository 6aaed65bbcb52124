import numpy as np
import pytest
from hypothesis import given, strategies as st

from clicklab.clicklog import ClickLog
from clicklab.errors import EmptyInputError, PositionRangeError
from clicklab.harness import run_training_phase
from clicklab.position import (
    PositionBiasCurve, PropensityVector, empirical_propensities, propensity_at, true_propensity_vector,
)
from clicklab.synthworld import GenConfig, generate_world


@pytest.mark.parametrize("k, expected", [(1, 1.0), (4, 0.5), (9, 1 / 3)])
def test_propensity_at_examples(k, expected):
    assert propensity_at(PositionBiasCurve(0.5, 10), k) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("k", [0, 11, -1])
def test_propensity_at_out_of_range(k):
    with pytest.raises(PositionRangeError):
        propensity_at(PositionBiasCurve(0.5, 10), k)


def test_true_vector_examples():
    assert true_propensity_vector(PositionBiasCurve(0, 3)).values.tolist() == [1, 1, 1]
    v = true_propensity_vector(PositionBiasCurve(0.5, 4)).values
    np.testing.assert_allclose(v, [1, 0.70710678, 0.57735027, 0.5], rtol=1e-8)
    assert true_propensity_vector(PositionBiasCurve(1, 2)).values.tolist() == [1, 0.5]


def test_repeated_calls_bit_identical():
    c = PositionBiasCurve(0.37, 10)
    assert true_propensity_vector(c).values.tobytes() == true_propensity_vector(c).values.tobytes()
    assert [propensity_at(c, k) for k in range(1, 11)] == true_propensity_vector(c).values.tolist()


@given(x=st.floats(0, 5, allow_nan=False), m=st.integers(1, 30))
def test_curve_invariants(x, m):
    v = true_propensity_vector(PositionBiasCurve(x, m)).values
    assert v[0] == 1.0
    assert np.all(v > 0) and np.all(v <= 1)
    assert np.all(np.diff(v) <= 0)
    if x == 0:
        assert np.all(v == 1.0)


def test_curve_rejects_negative_exponent():
    with pytest.raises(ValueError):
        PositionBiasCurve(-0.1, 10)


def _log(positions, clicks):
    n = len(positions)
    return ClickLog.from_arrays(np.arange(n), np.arange(n), positions, np.ones(n), clicks)


def test_empirical_simple_ratio():
    log = _log([1, 1, 1, 1, 2, 2, 2, 2], [1, 1, 0, 0, 1, 0, 0, 0])
    assert empirical_propensities(log).values.tolist() == [0.5, 0.25]


def test_empirical_missing_position_flagged():
    log = _log([1, 2, 4], [1, 0, 1])
    v = empirical_propensities(log, 5)
    assert v.missing.tolist() == [False, False, True, False, True]
    assert v[2] == 0.0  # observed, never clicked: zero, not missing


def test_empirical_empty_log():
    with pytest.raises(EmptyInputError):
        empirical_propensities(ClickLog())


def test_filled_uses_nearest_shallower():
    v, mask = PropensityVector([0.5, np.nan, 0.2, 0.0, np.nan]).filled()
    assert v.values.tolist() == [0.5, 0.5, 0.2, 0.2, 0.2]
    assert mask.tolist() == [False, True, False, True, True]
    v, _ = PropensityVector([np.nan, 0.3]).filled()
    assert v.values.tolist() == [0.3, 0.3]
    v, _ = PropensityVector([np.nan, 0.0]).filled()
    assert v.values.tolist() == [1.0, 1.0]


def test_empirical_separability_uniform_ranking():
    # every doc has relevance r, lists ranked at random: observed rate at k -> r * theta_k
    r, curve = 0.6, PositionBiasCurve(0.5, 10)
    rng = np.random.default_rng(7)
    n_searches = 40_000
    theta = curve.vector().values
    pos = np.tile(np.arange(1, 11), n_searches)
    clicks = (rng.random(len(pos)) < theta[pos - 1]) & (rng.random(len(pos)) < r)
    log = ClickLog.from_arrays(np.repeat(np.arange(n_searches), 10), np.tile(np.arange(10), n_searches),
                               pos, theta[pos - 1], clicks, validate=False)
    est = empirical_propensities(log, 10).values
    p = r * theta
    se = np.sqrt(p * (1 - p) / n_searches)
    assert np.all(np.abs(est - p) < 3 * se)


def test_empirical_overstates_bias_under_proxy_ranking():
    curve = PositionBiasCurve(0.5, 10)
    world = generate_world(GenConfig(seed=3))
    log = run_training_phase(world, 20_000, curve, seed=4)
    est = empirical_propensities(log, 10).values
    theta = curve.vector().values
    assert np.all(est[1:] / est[0] < theta[1:] / theta[0])
