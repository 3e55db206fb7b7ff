import numpy as np
import pytest

from swarmform.costs import NeighborTrajectories, control_effort
from swarmform.esdf import Sphere, rasterize, signed_distance
from swarmform.formation import FormationSpec, similarity
from swarmform.minco import construct
from swarmform.planner import (AgentState, Objective, PlanContext, Planner, PlannerConfig, initial_guess, local_goal,
                               optimize, replace_weights, trapezoid_times)

SQUARE = np.array([[0.0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]])


def rest(p, goal, vertex=0):
    return AgentState(np.asarray(p, float), np.zeros(3), np.zeros(3), np.asarray(goal, float), vertex)


def rest_tail(p):
    return np.vstack([p, np.zeros((2, 3))])


def test_local_goal_projection():
    assert np.array_equal(local_goal([0, 0, 0], [1, 2, 0], 7.5), [1, 2, 0])
    assert np.allclose(local_goal([0, 0, 0], [30, 40, 0], 10.0), [6, 8, 0])


def test_trapezoid_five_metres():
    cfg = PlannerConfig(horizon=50)
    st = rest([0, 0, 0], [5, 0, 0])
    q, T = initial_guess(st, st.goal, None, cfg)
    # cruise 10 s plus v/a for the two ramps
    assert T.sum() == pytest.approx(10.0 + 0.5 / 6.0, rel=1e-12)
    assert q.shape == (4, 3) and np.allclose(q[:, 0], [1, 2, 3, 4])


def test_trapezoid_short_segment_never_cruises():
    t = trapezoid_times([0.0, 0.01, 0.02], 0.0, 0.5, 6.0)
    assert np.all(np.diff(t) > 0) and t[-1] == pytest.approx(2 * np.sqrt(0.02 / 6.0))


def test_start_equals_goal():
    cfg = PlannerConfig()
    st = rest([1, 1, 1], [1, 1, 1])
    q, T = initial_guess(st, st.goal, None, cfg)
    assert q.shape == (0, 3) and np.array_equal(T, [cfg.t_floor])
    res = optimize(q, T, st.head(), rest_tail(st.position), PlanContext(), cfg)
    assert np.allclose(res.trajectory.evaluate(res.trajectory.total_time), [1, 1, 1])
    assert res.report.total == pytest.approx(cfg.weights.time * cfg.t_floor, rel=1e-6)


def test_empty_map_single_agent_reaches_min_jerk():
    # limits and uniformity off: with them on, the optimum is velocity-limited and not min-jerk
    cfg = replace_weights(PlannerConfig(horizon=50, max_iterations=500), formation=0, reciprocal=0, feasibility=0,
                          uniformity=0)
    st = rest([0, 0, 0], [5, 0, 0])
    q, T = initial_guess(st, st.goal, None, cfg)
    res = optimize(q, T, st.head(), rest_tail(st.goal), PlanContext(), cfg)
    assert res.status == "converged"
    assert res.report.values["obstacle"] == 0.0
    single = construct(np.zeros((0, 3)), [res.trajectory.total_time], st.head(), rest_tail(st.goal))
    assert res.report.values["energy"] == pytest.approx(control_effort(single)[0], rel=0.05)


def _square_neighbors(v, travel_time, offset=np.zeros(3)):
    out = []
    for k in range(1, 4):
        a = SQUARE[k] + offset
        out.append((k, 0.0, construct(np.zeros((0, 3)), [travel_time], rest_tail(a),
                                      rest_tail(a + v * travel_time))))
    return NeighborTrajectories.pack(out)


def test_square_formation_converges_from_perturbed_guesses(rng):
    # every agent re-optimizes against the others in turn, as replanning does
    square = SQUARE * [2, 2, 1]
    spec = FormationSpec.from_positions(square)
    shift = np.array([4.0, 0, 0])
    cfg = PlannerConfig(horizon=50, max_iterations=200)
    trajs = []
    for k in range(4):
        st = rest(square[k], square[k] + shift, k)
        q, T = initial_guess(st, st.goal, None, cfg)
        trajs.append(construct(q + rng.normal(0, 0.3, q.shape), T, st.head(), rest_tail(st.goal)))
    for _ in range(3):
        for k in range(4):
            nb = NeighborTrajectories.pack([(j, 0.0, trajs[j]) for j in range(4) if j != k])
            res = optimize(trajs[k].waypoints, trajs[k].durations, rest_tail(square[k]),
                           rest_tail(square[k] + shift), PlanContext(None, nb, spec, k, 0.0), cfg)
            trajs[k] = res.trajectory
    everyone = NeighborTrajectories.pack([(j, 0.0, trajs[j]) for j in range(4)])
    end = max(t.total_time for t in trajs)
    for t in np.arange(0.0, end + 0.1, 0.1):
        assert similarity(np.vstack([everyone.state(j, t)[0] for j in range(4)]), spec) < 1e-3


def test_formation_weight_trade_off():
    # agent starts off its vertex; a stronger formation weight must not leave it further off
    spec = FormationSpec.from_positions(SQUARE)
    v = np.array([0.4, 0.0, 0.0])
    nb = _square_neighbors(v, 10.0)
    start = SQUARE[0] + [0.0, -0.6, 0.3]
    goal = start + v * 10.0
    st = rest(start, goal)
    means = []
    for lam in (1e2, 1e4, 1e6):
        cfg = replace_weights(PlannerConfig(horizon=50, max_iterations=200), formation=lam)
        q, T = initial_guess(st, goal, None, cfg)
        res = optimize(q, T, st.head(), rest_tail(goal), PlanContext(None, nb, spec, 0, 0.0), cfg)
        traj = res.trajectory
        vals = [similarity(np.vstack([traj.evaluate(t)] + [nb.state(k, t)[0] for k in range(3)]), spec)
                for t in np.arange(0.0, traj.total_time, 0.1)]
        means.append(np.mean(vals))
    assert means[0] >= means[1] >= means[2]


def test_durations_stay_positive(rng):
    cfg = PlannerConfig(horizon=8, max_iterations=40)
    obs = [Sphere((3.0, 0.2, 1.0), 0.6)]
    grid = rasterize(obs, (-2, -4, 0), (12, 8, 2.5), 0.1, inflate=0.15)
    for _ in range(5):
        start = rng.uniform([-1, -1, 0.8], [0, 1, 1.2])
        st = rest(start, start + [7, rng.uniform(-1, 1), 0])
        pl = Planner(0, 0, st.goal, None, cfg, seed=int(rng.integers(1 << 30)))
        pl.replan(0.0, st, NeighborTrajectories.empty(), grid)
        entry = pl.logs[-1]
        assert not entry.fallback
        stamp, traj = pl.previous
        assert np.all(traj.durations > 0)


def test_reported_cost_never_exceeds_initial(rng):
    cfg = PlannerConfig(horizon=8, max_iterations=30)
    grid = rasterize([Sphere((3.0, 0.0, 1.0), 0.6)], (-2, -4, 0), (12, 8, 2.5), 0.1, inflate=0.15)
    pl = Planner(0, 0, [7, 0, 1], None, cfg, seed=1)
    st = rest([0, 0, 1], [7, 0, 1])
    esdf = pl.local_esdf(grid, np.array([[0, 0, 1], [7, 0, 1.0]]))
    for _ in range(5):
        q, T = initial_guess(st, st.goal, esdf, cfg, rng=rng)
        q = q + rng.normal(0, 0.2, q.shape)
        res = optimize(q, T, st.head(), rest_tail(st.goal), PlanContext(esdf), cfg)
        assert res.report.total <= res.initial_cost
        assert np.all(res.trajectory.durations >= cfg.t_floor * (1 - 1e-12))


def test_new_obstacle_is_avoided():
    cfg = PlannerConfig(horizon=7.5)
    goal = np.array([7.5, 5.0, 1.0])
    st = rest([0.0, 5.0, 1.0], goal)
    pl = Planner(0, 0, goal, None, cfg, seed=0)
    pl.replan(0.0, st, NeighborTrajectories.empty(), None)
    old = pl.previous[1]
    obs = [Sphere((3.5, 5.0, 1.0), 0.5)]
    mid = old.evaluate(old.total_time / 2)
    assert signed_distance(obs, mid[None])[0] < 0  # the old plan runs through it
    grid = rasterize(obs, (-2, 0, 0), (12, 10, 2.5), 0.1, inflate=0.15)
    pl.replan(0.0, st, NeighborTrajectories.empty(), grid)
    assert not pl.logs[-1].fallback
    traj = pl.previous[1]
    pts = np.array([traj.evaluate(t) for t in np.linspace(0, traj.total_time, 2000)])
    assert signed_distance(obs, pts).min() >= 0.0


def test_max_iterations_fallback():
    cfg = PlannerConfig(horizon=7.5, max_iterations=1, fail_on_max_iterations=True)
    st = rest([0, 0, 1], [5, 0, 1])
    pl = Planner(0, 0, st.goal, None, cfg)
    boot = pl.bootstrap(0.0, st)
    out = pl.replan(0.0, st, NeighborTrajectories.empty(), None)
    assert out is boot and pl.logs[-1].fallback and pl.logs[-1].status == "OptimizerFailure"


def test_replan_is_deterministic():
    def run():
        cfg = PlannerConfig()
        st = rest([0, 0, 1], [9, 1, 1])
        pl = Planner(3, 0, st.goal, None, cfg, seed=42)
        grid = rasterize([Sphere((3.0, 0.3, 1.0), 0.5)], (-2, -4, 0), (14, 8, 2.5), 0.1, inflate=0.15)
        return pl.replan(0.0, st, NeighborTrajectories.empty(), grid)[1]
    a, b = run(), run()
    assert np.array_equal(a.coeffs, b.coeffs) and np.array_equal(a.durations, b.durations)


def test_warm_start_is_stable():
    cfg = PlannerConfig(horizon=50, max_iterations=200)
    st = rest([0, 0, 1], [5, 0, 1])
    pl = Planner(0, 0, st.goal, None, cfg)
    pl.replan(0.0, st, NeighborTrajectories.empty(), None)
    first = pl.logs[-1].costs["total"]
    pl.replan(0.0, st, NeighborTrajectories.empty(), None)
    second = pl.logs[-1].costs["total"]
    assert abs(second - first) / first < 0.01


def test_invalid_config():
    with pytest.raises(ValueError):
        PlannerConfig(front_end="rrt")
    with pytest.raises(ValueError):
        PlannerConfig(goal_mode="leader")
    with pytest.raises(ValueError):
        optimize(np.zeros((0, 3)), [0.0], rest_tail(np.zeros(3)), rest_tail(np.ones(3)), PlanContext())
