import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clicklab.clicklog import (
    ClickLog, DocumentStats, Record, aggregate, append_search, read_log_csv, write_log_csv,
)
from clicklab.errors import ValidationError
from clicklab.harness import run_training_phase
from clicklab.position import PositionBiasCurve, propensity_at
from clicklab.synthworld import GenConfig, generate_world


def rec(s, d, k, c, curve=PositionBiasCurve()):
    return Record(s, d, k, propensity_at(curve, k), c)


def test_append_three_records():
    log = append_search(ClickLog(), [rec("s1", "a", 1, 1), rec("s1", "b", 2, 0), rec("s1", "c", 3, 0)])
    assert len(log) == 3


def test_append_rejects_duplicate_doc():
    with pytest.raises(ValidationError):
        append_search(ClickLog(), [rec("s1", "a", 1, 1), rec("s1", "a", 2, 0)])


def test_append_rejects_duplicate_position():
    with pytest.raises(ValidationError):
        append_search(ClickLog(), [rec("s1", "a", 1, 1), rec("s1", "b", 1, 0)])


def test_append_rejects_mixed_searches():
    with pytest.raises(ValidationError):
        append_search(ClickLog(), [rec("s1", "a", 1, 1), rec("s2", "b", 2, 0)])


def test_doc_recurs_across_searches():
    log = append_search(ClickLog(), [rec("s1", "a", 1, 1)])
    log = log.append_search([rec("s2", "a", 3, 0)])
    assert len(log) == 2
    assert aggregate(log)["a"].total_impressions == 2


def test_record_validation():
    with pytest.raises(ValidationError):
        Record("s", "d", 1, 0.5, 2)
    with pytest.raises(ValidationError):
        Record("s", "d", 0, 0.5, 1)
    with pytest.raises(ValidationError):
        Record("s", "d", 1, 0.0, 1)


def test_record_propensity_round_trip():
    curve = PositionBiasCurve(0.5, 10)
    r = rec("s", "d", 4, 1, curve)
    r.check_propensity(curve)
    with pytest.raises(ValidationError):
        r.check_propensity(PositionBiasCurve(1.0, 10))


def test_aggregate_example():
    log = ClickLog.from_records([rec("s1", "A", 1, 1), rec("s2", "A", 2, 0)])
    stats = aggregate(log, 10)["A"]
    assert stats.total_impressions == 2
    assert stats.clicks_by_position.tolist()[:3] == [1, 0, 0]
    assert stats.impressions_by_position.tolist()[:3] == [1, 1, 0]


def test_aggregate_empty():
    assert aggregate(ClickLog()) == {}


def test_generated_log_conservation():
    world = generate_world(GenConfig(n_clusters=20, mean_cluster_size=30, seed=1))
    curve = PositionBiasCurve(0.5, 10)
    log = run_training_phase(world, 2_000, curve, seed=2)
    log.validate()
    log.check_propensities(curve)
    stats = aggregate(log, 10)
    assert sum(s.total_impressions for s in stats.values()) == len(log)
    assert sum(s.total_clicks for s in stats.values()) == log.total_clicks
    for s in stats.values():
        assert s.impressions_by_position.sum() == s.total_impressions
        assert np.all(s.clicks_by_position <= s.impressions_by_position)


@st.composite
def logs(draw):
    n_searches = draw(st.integers(1, 8))
    rows = []
    for s in range(n_searches):
        docs = draw(st.lists(st.integers(0, 12), min_size=1, max_size=5, unique=True))
        for k, d in enumerate(docs, 1):
            rows.append((s, d, k, draw(st.integers(0, 1))))
    return rows


@settings(max_examples=60, deadline=None)
@given(rows=logs(), data=st.data())
def test_aggregate_order_invariant(rows, data):
    perm = data.draw(st.permutations(rows))
    curve = PositionBiasCurve()

    def build(rs):
        a = np.array(rs)
        return ClickLog.from_arrays(a[:, 0], a[:, 1], a[:, 2], curve.vector().values[a[:, 2] - 1], a[:, 3])

    assert aggregate(build(rows), 10) == aggregate(build(perm), 10)


def test_document_stats_invariants():
    with pytest.raises(ValidationError):
        DocumentStats("d", [1, 0], [2, 0])


def test_csv_round_trip(tmp_path):
    curve = PositionBiasCurve()
    log = ClickLog.from_records([rec(7, 3, 2, 0), rec(7, 5, 1, 1), rec(2, 3, 1, 1)])
    path = tmp_path / "log.csv"
    write_log_csv(log, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "search_id,doc_id,position,propensity,click"
    # search order of first appearance, then position
    assert [l.split(",")[:3] for l in lines[1:]] == [["7", "5", "1"], ["7", "3", "2"], ["2", "3", "1"]]
    back = read_log_csv(path)
    assert aggregate(back) == aggregate(log)
    back.check_propensities(curve)
