import numpy as np
import pytest

from oracles import sampled_min_distance, sampled_min_distance_batch
from swarm_impc.engine import EngineConfig, RunResult
from swarm_impc.model import ModelParams
from swarm_impc.verification import (
    SegmentPair, check_positions_collision_free, check_run_collision_free, collinearity_check,
    endpoint_clearance_condition, min_distance_offsets, run_metrics, segment_pair_min_distance,
)


def _pair(p1, q1, p2, q2):
    return SegmentPair(*(np.asarray(x, dtype=float) for x in (p1, q1, p2, q2)))


def test_segment_distance_examples():
    d, _ = segment_pair_min_distance(_pair([0, 0], [1, 0], [0.4, 0], [1.4, 0]))
    assert d == pytest.approx(0.4)
    d, t = segment_pair_min_distance(_pair([0, 0], [1, 0], [1, 0.3], [0, 0.3]))
    assert d == pytest.approx(0.3) and t == pytest.approx(0.5)
    d, t = segment_pair_min_distance(_pair([0, 0], [0, 0], [1, 0], [0.5, 0]))
    assert d == pytest.approx(0.5) and t == pytest.approx(1.0)
    p = _pair([0, 0], [1, 0], [1, 0.3], [0, 0.3])
    assert sampled_min_distance(p.p1, p.q1, p.p2, p.q2) == pytest.approx(0.3, abs=1e-9)


def test_closed_form_matches_sampling_10k_pairs():
    rng = np.random.default_rng(5)
    worst = 0.0
    for chunk in range(20):
        B = 500
        d = 2 if chunk % 2 else 3
        p1, q1, p2, q2 = rng.uniform(-1, 1, (4, B, d))
        ref = sampled_min_distance_batch(p1, q1, p2, q2)
        got, _ = min_distance_offsets(p2 - p1, q2 - q1)
        worst = max(worst, float(np.abs(got - ref).max()))
        assert np.all(got <= ref + 1e-12)  # closed form can only be lower than any sample
    assert worst <= 1e-4


def test_endpoint_clearance_examples():
    # r1 = r2 = (0.4, 0): threshold is r_min itself
    assert endpoint_clearance_condition(_pair([0, 0], [1, 0], [0.4, 0], [1.4, 0]), 0.3)
    # |r1| = |r2| = 0.4 with r2 = -r1, so |l2 - l1| = 0.8 and the threshold is 0.5
    s = _pair([0, 0], [0.4, 0], [0.4, 0], [0, 0])
    assert np.linalg.norm(s.r1) == pytest.approx(0.4) and np.linalg.norm(s.r2) == pytest.approx(0.4)
    assert np.linalg.norm(s.l2 - s.l1) == pytest.approx(0.8)
    assert not endpoint_clearance_condition(s, 0.3)


def test_endpoint_clearance_soundness_1e6_pairs():
    rng = np.random.default_rng(9)
    r_min = 0.3
    hits = 0
    for _ in range(10):
        B = 100_000
        d = 2
        p1 = rng.uniform(-1, 1, (B, d))
        ang = rng.uniform(0, 2 * np.pi, B)
        r1 = rng.uniform(0.25, 0.9, B)[:, None] * np.c_[np.cos(ang), np.sin(ang)]
        p2 = p1 + r1
        l1 = rng.uniform(-0.4, 0.4, (B, d))
        l2 = rng.uniform(-0.4, 0.4, (B, d))
        q1, q2 = p1 + l1, p2 + l2
        thr = np.sqrt(r_min**2 + 0.25 * np.sum((l2 - l1) ** 2, axis=1))
        cond = (np.linalg.norm(p2 - p1, axis=1) >= thr) & (np.linalg.norm(q2 - q1, axis=1) >= thr)
        dmin, _ = min_distance_offsets(p2 - p1, q2 - q1)
        hits += int(cond.sum())
        assert not np.any(cond & (dmin < r_min - 1e-12))
    assert hits > 100_000
    # the scalar helper agrees with the vectorized condition
    pr = _pair(p1[0], q1[0], p2[0], q2[0])
    assert endpoint_clearance_condition(pr, r_min) == bool(cond[0])


def _params():
    return ModelParams()


def _result(X, status="arrived", completion=2.0):
    X = np.asarray(X, dtype=float)
    return RunResult("impc_dr", _params(), EngineConfig(), X[0], X[-1], X, np.zeros_like(X), [],
                     status, completion)


def test_collision_report_and_negative_control():
    X = np.array([[[0, 0], [1, 0]], [[0, 0.5], [1, 0.5]], [[0, 1], [1, 1]]], dtype=float)
    rep = check_run_collision_free(_result(X))
    assert rep.passed and rep.min_distance == pytest.approx(1.0)
    # two robots crossing through each other between samples
    Y = np.array([[[0, 0], [1, 0]], [[1, 0.05], [0, 0]], [[1, 1], [0, 1]]], dtype=float)
    rep = check_positions_collision_free(Y, 0.3)
    assert not rep.passed
    i, j, step, dist = rep.violations[0]
    assert (i, j, step) == (0, 1, 0) and dist < 0.3
    assert rep.to_dict()["worst_pair"] == [0, 1]


def test_collinearity():
    assert ("targets", 0, 1, 2) in collinearity_check(targets=[[0, 0], [1, 0], [2, 0]])
    assert collinearity_check(targets=[[0, 0], [1, 0], [0.5, 0.8]]) == []
    # two robots swapping along one line
    flags = collinearity_check(positions=[[0, 0], [1, 0]], targets=[[1, 0], [0, 0]])
    assert ("pair", 0, 1) in flags
    assert not any(f[0] == "pair" for f in
                   collinearity_check(positions=[[0, 0], [1, 0]], targets=[[1, 0.2], [0, 0]]))


def test_metrics():
    X = np.array([[[0, 0], [1, 0]], [[0.5, 0], [1, 0.5]], [[1, 0], [1, 1]]], dtype=float)
    m = run_metrics(_result(X, completion=2.0))
    assert m.success and m.completion_time == 2.0
    np.testing.assert_allclose(m.path_length, [1.0, 1.0])
    m2 = run_metrics(_result(X, "deadline", None), deadline=50.0)
    assert not m2.success and m2.completion_time == 50.0
    assert run_metrics(_result(X)) == run_metrics(_result(X))
