import numpy as np
import pytest

from swarmform import minco
from swarmform.esdf import Box, Cylinder
from swarmform.minco import construct
from swarmform.scenario import ArenaConfig, ConfigError, MapConfig, ScenarioConfig, SimConfig
from swarmform.sim import (BroadcastBus, GroundTruth, Sensing, World, collision_check, hold, read_trace,
                           run_scenario, write_trace)
from swarmform.esdf import rasterize


def single(start, goal, obstacles=(), time_limit=40.0, **sim):
    return ScenarioConfig("one", [start], [0], [[0, 0, 0]], goal, obstacles=list(obstacles),
                          map=MapConfig((-1, -3, -0.2), (12, 6, 2.8), 0.1), arena=ArenaConfig(0.0, 2.6),
                          sim=SimConfig(time_limit=time_limit, **sim))


def trio(**sim):
    desired = np.array([[0, 0, 0], [1.5, 0, 0], [0.75, 1.3, 0]])
    start = desired + [0, 1, 1.2]
    return ScenarioConfig("trio", start, [0, 1, 2], desired, [7, 1.4, 1.2],
                          obstacles=[Cylinder((3.5, 1.2, 1.3), 0.15, 2.6)],
                          map=MapConfig((-1, -2, -0.2), (11, 6, 2.8), 0.1), arena=ArenaConfig(0.0, 2.6),
                          sim=SimConfig(time_limit=40.0, **sim), seed=5)


# bus

def test_bus_delay():
    bus = BroadcastBus(3, 0.01, delay=0.2)
    bus.publish(10, 0, "hello")
    for step in range(11, 30):
        bus.deliver(step)
        assert bus.snapshot(1) == {}
    bus.deliver(30)
    assert bus.snapshot(1) == {0: "hello"} and bus.snapshot(2) == {0: "hello"} and bus.snapshot(0) == {}


def test_bus_zero_delay_is_next_step_and_latest_wins():
    bus = BroadcastBus(2, 0.01)
    bus.publish(5, 0, "a")
    bus.publish(5, 0, "b")
    bus.deliver(5)
    assert bus.snapshot(1) == {}
    bus.deliver(6)
    assert bus.snapshot(1) == {0: "b"}


def test_bus_drop_and_jitter_are_seeded():
    def run(seed):
        bus = BroadcastBus(5, 0.01, delay=0.05, jitter=0.1, drop=0.3, seed=seed)
        for s in range(50):
            bus.publish(s, s % 5, str(s))
        return bus.dropped, sorted((k, sorted(v)) for k, v in bus.queue.items())
    assert run(1) == run(1)
    assert run(1) != run(2)
    with pytest.raises(ValueError):
        BroadcastBus(2, 0.01, drop=1.5)


# motion

def test_min_jerk_position_at_half_second():
    world = World(single([0, 0, 1], [5, 0, 1]))
    traj = construct(np.zeros((0, 3)), [1.0], [0, 0, 1], [1, 0, 1])
    world.committed[0] = (0.0, traj)
    world.clock.step = 50
    world.move()
    assert np.allclose(world.positions[0], [0.5, 0, 1], atol=1e-12)


def test_hold_after_end():
    traj = construct(np.zeros((0, 3)), [1.0], [0, 0, 1], [1, 0, 1])
    assert np.allclose(hold(traj, 5.0), [1, 0, 1]) and np.all(hold(traj, 5.0, 1) == 0)
    hov = minco.hover([2, 2, 2], 0.01)
    assert np.allclose(hold(hov, 100.0), [2, 2, 2])


# collisions

def test_collision_checks():
    truth = GroundTruth([Cylinder((0, 0, 1), 0.5, 2.0)])
    assert collision_check(0.0, [[5, 5, 1], [15, 5, 1]], truth, 0.15, 0.3) == []
    v = collision_check(0.0, [[0.1, 0, 1], [5, 5, 1]], truth, 0.15, 0.3)
    assert [x.kind for x in v] == ["obstacle"] and v[0].a == 0
    # exactly at the collision radius is not a violation
    assert collision_check(0.0, [[3, 3, 1], [3.25, 3, 1]], truth, 0.15, 0.25) == []
    v = collision_check(0.0, [[3, 3, 1], [3.2, 3, 1]], truth, 0.15, 0.25)
    assert [(x.kind, x.a, x.b) for x in v] == [("agent", 0, 1)]


def test_sensing_reveals_monotonically():
    grid = rasterize([Box((4, -1, 0), (4.5, 1, 2))], (0, -2, 0), (10, 4, 2), 0.1)
    s = Sensing(grid, 1, 2.0)
    assert s.update(0, [0, 0, 1]) == 0
    n1 = s.update(0, [2.5, 0, 1])
    assert n1 > 0 and s.known[0].sum() == n1
    assert s.update(0, [0, 0, 1]) == 0 and s.known[0].sum() == n1
    assert s.update(0, [4.2, 0, 1]) > 0


# scenarios

def test_single_agent_empty_map():
    res = run_scenario(single([0, 0, 1.2], [8, 0, 1.2]))
    assert res.success and res.reason == "goal"
    assert np.max(np.abs(res.positions[:, 0, 1])) < 0.05
    assert np.max(np.abs(res.positions[:, 0, 2] - 1.2)) < 0.05


def test_sealed_wall_times_out():
    cfg = single([0, 0, 1.2], [8, 0, 1.2], [Box((4, -10, -1), (4.4, 10, 5))], time_limit=15.0)
    res = run_scenario(cfg)
    assert not res.success and res.reason == "timeout" and res.violations == []
    assert np.all(res.positions[:, 0, 0] < 4.0)


def test_trio_succeeds_and_is_reproducible(tmp_path):
    a, b = run_scenario(trio()), run_scenario(trio())
    assert a.success, a.summary()
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.times, b.times)
    write_trace(a, tmp_path / "trace.csv")
    times, pos, vertices = read_trace(tmp_path / "trace.csv")
    assert np.array_equal(pos, a.positions) and vertices == [0, 1, 2]


def test_bus_causality_in_world():
    cfg = trio(bus_delay=0.35)
    world = World(cfg)
    delay_steps = cfg.sim.steps(0.35)
    for _ in range(cfg.sim.steps(6.0)):
        world.step()
        for k in range(cfg.n):
            for msg in world.bus.snapshot(k).values():
                _, stamp, _ = minco.loads(msg)
                if stamp > 0:
                    assert round(stamp / cfg.sim.dt) + delay_steps <= world.clock.step


def test_positions_follow_commitments():
    world = World(trio())
    for _ in range(250):
        world.step()
        for k, (stamp, traj) in enumerate(world.committed):
            assert np.array_equal(world.positions[k], hold(traj, world.clock.t - stamp))


def test_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig("x", [[0, 0, 0]], [1], [[0, 0, 0]], [1, 0, 0])
    with pytest.raises(ConfigError):
        ScenarioConfig("x", [[0, 0, 0]], [0], [[0, 0, 0]], [1, 0, 0], sim=SimConfig(dt=0.03))
    with pytest.raises(ConfigError):
        ScenarioConfig("x", [[0, 0, np.nan]], [0], [[0, 0, 0]], [1, 0, 0])
