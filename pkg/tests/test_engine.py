import math

import numpy as np
import pytest

from swarm_impc.engine import (
    BVC, EngineConfig, comm_range, execute, exchange, init_world, plan_step, run,
)
from swarm_impc.model import ModelParams, RobotState, step_dynamics
from swarm_impc.optimizer import assemble, solve, warm_start
from swarm_impc.scenarios import gen_scenario, preset
from swarm_impc.separation import build_constraints


def test_comm_range_examples():
    assert comm_range(preset("2d_crowded")[0]) == pytest.approx(4.135410, abs=1e-6)
    assert comm_range(preset("3d_highspeed")[0]) == pytest.approx(13.566190, abs=1e-6)
    p = ModelParams(v_max=1e-9)
    assert comm_range(p) == pytest.approx(p.r_min + 2 * p.eps, abs=1e-8)


def test_exchange():
    p = preset("2d_crowded")[0]
    w = init_world([[0, 0], [10, 0]], [[0, 1], [10, 1]], p)
    assert exchange(w, 4.14) == [{}, {}]
    w = init_world([[0, 0], [1, 0]], [[0, 1], [1, 1]], p)
    box = exchange(w, 4.14)
    assert list(box[0]) == [1] and list(box[1]) == [0]
    w = init_world([[0, 0], [10, 0], [0, 30]], [[0, 1], [10, 1], [0, 31]], p)
    assert [sorted(b) for b in exchange(w, math.inf)] == [[1, 2], [0, 2], [0, 1]]


def test_single_robot_plan_matches_standalone_solve():
    p = ModelParams()
    w = init_world([[0, 0]], [[1, 0.5]], p)
    sols, recs = plan_step(w, p, EngineConfig())
    inst = assemble(w.states[0], build_constraints(w.predetermined[0], {}, p), [1, 0.5], None, p)
    ref = solve(inst, warm_start(None, inst))
    np.testing.assert_array_equal(sols[0].inputs, ref.inputs)
    assert recs[0].w == {} and not recs[0].b_to


def test_execute_follows_dynamics():
    p, ws = preset("2d_crowded")
    sc = gen_scenario("random_transition", 4, p, ws, seed=3)
    w = init_world(sc.starts, sc.targets, p)
    for _ in range(3):
        sols, _ = plan_step(w, p, EngineConfig())
        nw = execute(w, sols, p)
        for i in range(w.n):
            ref = step_dynamics(w.states[i], sols[i].inputs[0], p.h)
            np.testing.assert_array_equal(nw.states[i].position, ref.position)
            np.testing.assert_array_equal(nw.states[i].velocity, ref.velocity)
            np.testing.assert_array_equal(nw.predetermined[i].positions[:-1], sols[i].positions[1:])
        assert nw.t == pytest.approx(w.t + p.h)
        w = nw


def test_converged_robot_stays_put():
    p = ModelParams()
    w = init_world([[0.3, 0.3]], [[0.3, 0.3]], p)
    sols, _ = plan_step(w, p, EngineConfig())
    nw = execute(w, sols, p)
    np.testing.assert_allclose(nw.states[0].position, [0.3, 0.3], atol=1e-12)
    assert run([[0.3, 0.3]], [[0.3, 0.3]], p).completion_time == 0.0


def test_single_robot_transit_near_min_time():
    p = preset("2d_typical")[0]
    r = run([[0, 0]], [[1, 0]], p)
    assert r.success
    # bang-coast-bang lower bound over the 0.95 m that must be covered
    bound = 0.95 / p.v_max + p.v_max / p.a_max
    assert bound - 1e-9 <= r.completion_time <= 1.5 * (1 / p.v_max + p.v_max / p.a_max)


@pytest.fixture(scope="module")
def square_run():
    p, ws = preset("2d_typical")
    sc = gen_scenario("symmetric_square", 4, p, ws)
    return sc, run(sc.starts, sc.targets, p)


def test_square_overlap_flags_fire_together(square_run):
    _, r = square_run
    first = [next(k for k, s in enumerate(r.steps) if s.robots[i].b_to) for i in range(4)]
    assert max(first) - min(first) <= 2
    assert r.success


def test_executed_path_matches_logged_inputs(square_run):
    _, r = square_run
    h = r.params.h
    for k, st in enumerate(r.steps):
        for i, rec in enumerate(st.robots):
            ref = step_dynamics(RobotState(r.positions[k, i], r.velocities[k, i]), rec.u, h)
            np.testing.assert_array_equal(r.positions[k + 1, i], ref.position)


def test_determinism(square_run):
    sc, r = square_run
    r2 = run(sc.starts, sc.targets, sc.params)
    np.testing.assert_array_equal(r.positions, r2.positions)
    np.testing.assert_array_equal(r.velocities, r2.velocities)
    assert [[x.w for x in s.robots] for s in r.steps] == [[x.w for x in s.robots] for s in r2.steps]


def test_head_on_pair_reaches_force_balance():
    p = preset("2d_typical")[0]
    r = run([[-0.8, 0], [0.8, 0]], [[0.8, 0], [-0.8, 0]], p,
            EngineConfig(resolution=False, deadline=10))
    assert r.status == "deadline"
    last = r.steps[-1].robots
    assert all(x.residual < 1e-4 for x in last)
    assert last[0].w[1] == pytest.approx(last[1].w[0], abs=1e-6)


def test_filtered_range_is_bitwise_identical_to_full_graph():
    p, ws = preset("2d_crowded")
    sc = gen_scenario("random_transition", 4, p, ws, seed=42)
    a = run(sc.starts, sc.targets, p, EngineConfig(record_plans=False))
    b = run(sc.starts, sc.targets, p, EngineConfig(comm_radius=math.inf, record_plans=False))
    assert a.positions.tobytes() == b.positions.tobytes()


def test_bvc_single_robot_goes_straight():
    p = preset("2d_typical")[0]
    r = run([[0, 0]], [[0.8, 0.6]], p, method=BVC)
    assert r.success
    X = r.positions[:, 0]
    off_line = np.abs(X[:, 0] * 0.6 - X[:, 1] * 0.8)
    assert off_line.max() < 1e-9


def test_unknown_method():
    with pytest.raises(ValueError):
        run([[0, 0]], [[1, 0]], ModelParams(), method="orca")
