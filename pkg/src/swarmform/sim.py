"""Discrete-time swarm simulation with ideal tracking.

Everything happens on an integer step counter (``dt`` = 10 ms by default):
bus deliveries at the start of a step, then the planner ticks due on that
step, then agent motion, collision checks, and tracing.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import minco
from .costs import NeighborTrajectories
from .esdf import Box, Cylinder, GridMap, Sphere, rasterize
from .minco import Trajectory
from .planner import AgentState, Planner
from .scenario import ScenarioConfig

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# communication


class BroadcastBus:
    """Seeded broadcast channel delivering serialized trajectories.

    A message published on step ``n`` with delay ``d`` reaches a subscriber at
    the start of step ``n + max(1, ceil(d / dt))``; each subscriber gets an
    independent delay draw and drop decision.
    """

    def __init__(self, n_agents: int, dt: float, delay: float = 0.0, jitter: float = 0.0, drop: float = 0.0,
                 seed: int = 0):
        if not 0.0 <= drop <= 1.0:
            raise ValueError("drop probability must be in [0, 1]")
        if delay < 0 or jitter < 0:
            raise ValueError("delay and jitter must be non-negative")
        self.n = n_agents
        self.dt = dt
        self.delay = delay
        self.jitter = jitter
        self.drop = drop
        self.rng = np.random.default_rng([seed, 7])
        self.queue: dict[int, list] = {}
        self.inbox: list[dict[int, str]] = [dict() for _ in range(n_agents)]
        self.published = 0
        self.dropped = 0

    def publish(self, step: int, sender: int, message: str) -> None:
        self.published += 1
        for r in range(self.n):
            if r == sender:
                continue
            if self.drop > 0.0 and self.rng.random() < self.drop:
                self.dropped += 1
                continue
            d = self.delay + (self.rng.uniform(0.0, self.jitter) if self.jitter > 0 else 0.0)
            due = step + max(1, int(math.ceil(d / self.dt - 1e-9)))
            self.queue.setdefault(due, []).append((sender, r, message))

    def deliver(self, step: int) -> int:
        due = self.queue.pop(step, [])
        # sender id breaks ties; later publications from one sender overwrite earlier ones
        for sender, r, message in sorted(due, key=lambda m: m[0]):
            self.inbox[r][sender] = message
        return len(due)

    def snapshot(self, receiver: int) -> dict[int, str]:
        return dict(self.inbox[receiver])


# ---------------------------------------------------------------------------
# sensing


class Sensing:
    """Per-agent known occupancy: inflated ground-truth cells revealed within the sensing radius.

    Cells in ``prior`` (arena bounds) are known to every agent from the start.
    """

    def __init__(self, truth: GridMap, n_agents: int, radius: float, prior: np.ndarray | None = None):
        self.truth = truth
        self.radius = radius
        prior = np.zeros(truth.dims, dtype=bool) if prior is None else prior
        idx = np.argwhere(truth.occupancy & ~prior)
        self.cells = idx
        self.centers = truth.origin + (idx + 0.5) * truth.resolution
        self.revealed = np.zeros((n_agents, idx.shape[0]), dtype=bool)
        self.known = [prior.copy() for _ in range(n_agents)]

    def update(self, agent: int, position) -> int:
        if self.cells.shape[0] == 0:
            return 0
        d2 = np.sum((self.centers - np.asarray(position)) ** 2, axis=1)
        new = (d2 <= self.radius * self.radius) & ~self.revealed[agent]
        if np.any(new):
            self.revealed[agent] |= new
            c = self.cells[new]
            self.known[agent][c[:, 0], c[:, 1], c[:, 2]] = True
        return int(new.sum())

    def grid(self, agent: int) -> GridMap:
        return GridMap(self.truth.origin, self.truth.resolution, self.known[agent])


# ---------------------------------------------------------------------------
# collisions


class GroundTruth:
    """Vectorized exact signed distance to the scenario's primitives."""

    def __init__(self, obstacles):
        cyl = [o for o in obstacles if isinstance(o, Cylinder)]
        self.cyl_c = np.array([o.center for o in cyl], dtype=float).reshape(-1, 3)
        self.cyl_r = np.array([o.radius for o in cyl], dtype=float)
        self.cyl_h = np.array([0.5 * o.height for o in cyl], dtype=float)
        self.others = [o for o in obstacles if isinstance(o, (Sphere, Box))]

    def distance(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        out = np.full(p.shape[0], np.inf)
        if self.cyl_r.size:
            d = p[:, None, :] - self.cyl_c[None]
            radial = np.hypot(d[..., 0], d[..., 1]) - self.cyl_r
            axial = np.abs(d[..., 2]) - self.cyl_h
            sd = np.hypot(np.maximum(radial, 0.0), np.maximum(axial, 0.0)) + np.minimum(np.maximum(radial, axial), 0.0)
            out = np.minimum(out, sd.min(axis=1))
        for o in self.others:
            out = np.minimum(out, o.signed_distance(p))
        return out


@dataclass(frozen=True)
class Violation:
    t: float
    kind: str
    a: int
    b: int
    distance: float

    def row(self) -> list:
        return [f"{self.t:.2f}", self.kind, self.a, self.b, repr(float(self.distance))]


def collision_check(t: float, positions, truth: GroundTruth, agent_radius: float,
                    collision_radius: float) -> list[Violation]:
    """Agent-obstacle (distance < agent radius) and agent-agent (distance < collision radius) violations."""
    P = np.asarray(positions, dtype=float)
    out = []
    d = truth.distance(P)
    for i in np.flatnonzero(d < agent_radius):
        out.append(Violation(t, "obstacle", int(i), -1, float(d[i])))
    diff = P[:, None, :] - P[None, :, :]
    dd = np.sqrt(np.sum(diff * diff, axis=-1))
    ii, jj = np.nonzero(np.triu(dd < collision_radius, k=1))
    for i, j in zip(ii, jj):
        out.append(Violation(t, "agent", int(i), int(j), float(dd[i, j])))
    return out


# ---------------------------------------------------------------------------
# world


@dataclass
class SimClock:
    dt: float = 0.01
    step: int = 0

    @property
    def t(self) -> float:
        return self.step * self.dt


@dataclass
class RunResult:
    name: str
    success: bool
    reason: str
    end_time: float
    violations: list
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    vertices: list
    goals: np.ndarray
    desired: np.ndarray
    planner_logs: list = field(default_factory=list)
    messages: int = 0
    dropped: int = 0

    @property
    def first_violation(self) -> float | None:
        return self.violations[0].t if self.violations else None

    def summary(self) -> dict:
        iters = [c.iterations for c in self.planner_logs if not c.fallback]
        return {
            "name": self.name,
            "success": bool(self.success),
            "reason": self.reason,
            "end_time": round(self.end_time, 6),
            "violations": len(self.violations),
            "first_violation": self.first_violation,
            "replans": len(self.planner_logs),
            "fallbacks": sum(1 for c in self.planner_logs if c.fallback),
            "mean_iterations": float(np.mean(iters)) if iters else 0.0,
            "messages": self.messages,
            "dropped": self.dropped,
            "final_goal_error": [float(x) for x in np.linalg.norm(self.positions[-1] - self.goals, axis=1)],
        }

    def solve_times(self) -> np.ndarray:
        return np.array([c.wall_ms for c in self.planner_logs if not c.fallback])


def hold(traj: Trajectory, t: float, order: int = 0) -> np.ndarray:
    """Evaluate ``traj``, holding its terminal position at rest once it has ended."""
    end = traj.total_time
    if t < end:
        return traj.evaluate(max(t, 0.0), order)
    return traj.evaluate(end, 0) if order == 0 else np.zeros(3)


class World:
    """Simulation state for one scenario."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        s = config.sim
        self.clock = SimClock(s.dt)
        m = config.map
        arena = config.arena.obstacles(m)
        self.obstacles = config.resolved_obstacles() + arena
        self.truth = GroundTruth(self.obstacles)
        self.grid = rasterize(self.obstacles, m.origin, m.size, m.resolution, inflate=s.inflate)
        prior = rasterize(arena, m.origin, m.size, m.resolution, inflate=s.inflate).occupancy
        self.sensing = Sensing(self.grid, config.n, s.sensing_radius, prior)
        self.bus = BroadcastBus(config.n, s.dt, s.bus_delay, s.bus_jitter, s.bus_drop, seed=config.seed)
        spec = config.spec()
        goals = config.goals()
        self.goals = goals
        self.planners = [Planner(k, config.vertices[k], goals[k], spec, config.planner, seed=config.seed)
                         for k in range(config.n)]
        self.committed: list[tuple[float, Trajectory]] = []
        for k in range(config.n):
            rest = AgentState(config.agents[k], np.zeros(3), np.zeros(3), goals[k], config.vertices[k])
            plan = self.planners[k].bootstrap(0.0, rest)
            self.committed.append(plan)
            self.bus.publish(-1, k, minco.dumps(plan[1], k, plan[0]))
        self.positions = config.agents.copy()
        self.snapshots = [dict() for _ in range(config.n)]
        self.period = s.steps(config.planner.replan_period)
        self.offset = [min(s.steps(k * s.stagger), self.period - 1) for k in range(config.n)]

    def state_of(self, k: int) -> AgentState:
        stamp, traj = self.committed[k]
        t = self.clock.t - stamp
        return AgentState(hold(traj, t, 0), hold(traj, t, 1), hold(traj, t, 2), self.goals[k],
                          self.config.vertices[k])

    def neighbors_of(self, k: int) -> NeighborTrajectories:
        entries = []
        for sender, msg in sorted(self.snapshots[k].items()):
            _, stamp, traj = minco.loads(msg)
            entries.append((self.config.vertices[sender], stamp, traj))
        return NeighborTrajectories.pack(entries)

    def plan(self, k: int) -> None:
        now = self.clock.t
        state = self.state_of(k)
        self.sensing.update(k, state.position)
        stamp, traj = self.planners[k].replan(now, state, self.neighbors_of(k), self.sensing.grid(k))
        self.committed[k] = (stamp, traj)
        self.bus.publish(self.clock.step, k, minco.dumps(traj, k, stamp))

    def step(self) -> None:
        """Deliver and plan at the current step, then advance the clock and move."""
        n = self.clock.step
        self.bus.deliver(n)
        if n % self.period == 0:
            # every plan in a cycle sees what had arrived by the cycle start
            self.snapshots = [self.bus.snapshot(k) for k in range(self.config.n)]
        for k in range(self.config.n):
            if n % self.period == self.offset[k]:
                self.plan(k)
        self.clock.step += 1
        self.move()

    def move(self) -> None:
        t = self.clock.t
        for k, (stamp, traj) in enumerate(self.committed):
            self.positions[k] = hold(traj, t - stamp)

    def velocities(self) -> np.ndarray:
        t = self.clock.t
        return np.array([hold(traj, t - stamp, 1) for stamp, traj in self.committed])

    def at_goal(self) -> bool:
        err = np.linalg.norm(self.positions - self.goals, axis=1)
        return bool(np.all(err <= self.config.sim.goal_tolerance))


def run_scenario(config: ScenarioConfig) -> RunResult:
    """Simulate until every agent is within goal tolerance or the time limit passes."""
    s = config.sim
    world = World(config)
    limit = s.steps(s.time_limit)
    trace_every = max(1, s.steps(s.trace_period))
    times, pos, vel = [0.0], [world.positions.copy()], [world.velocities()]
    violations = collision_check(0.0, world.positions, world.truth, s.agent_radius, s.collision_radius)
    reason = "timeout"
    while world.clock.step < limit:
        world.step()
        n = world.clock.step
        v = collision_check(world.clock.t, world.positions, world.truth, s.agent_radius, s.collision_radius)
        violations.extend(v)
        done = world.at_goal()
        if n % trace_every == 0 or done:
            times.append(world.clock.t)
            pos.append(world.positions.copy())
            vel.append(world.velocities())
        if violations and s.stop_on_violation:
            reason = "collision"
            break
        if done:
            reason = "goal"
            break
    if violations and reason == "goal":
        reason = "collision"
    success = reason == "goal" and not violations
    logs = [c for p in world.planners for c in p.logs]
    logs.sort(key=lambda c: (c.cycle, c.agent))
    return RunResult(config.name, success, reason, world.clock.t, violations, np.array(times), np.array(pos),
                     np.array(vel), list(config.vertices), world.goals, config.desired, logs,
                     world.bus.published, world.bus.dropped)


# ---------------------------------------------------------------------------
# outputs


TRACE_HEADER = ["t", "agent", "vertex", "x", "y", "z", "vx", "vy", "vz"]
VIOLATION_HEADER = ["t", "kind", "a", "b", "distance"]


def write_trace(result: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for s, t in enumerate(result.times):
            for k in range(result.positions.shape[1]):
                p = result.positions[s, k]
                v = result.velocities[s, k]
                w.writerow([f"{t:.2f}", k, result.vertices[k]] + [repr(float(x)) for x in p]
                           + [repr(float(x)) for x in v])


def read_trace(path) -> tuple[np.ndarray, np.ndarray, list]:
    """Inverse of :func:`write_trace`: (times, positions (S, N, 3), vertices)."""
    rows = list(csv.DictReader(open(path)))
    n = 1 + max(int(r["agent"]) for r in rows)
    times = np.array([float(r["t"]) for r in rows[::n]])
    pos = np.array([[float(r[c]) for c in "xyz"] for r in rows]).reshape(len(times), n, 3)
    vertices = [int(r["vertex"]) for r in rows[:n]]
    return times, pos, vertices


def write_violations(result: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(VIOLATION_HEADER)
        for v in result.violations:
            w.writerow(v.row())


def write_planner_log(result: RunResult, path) -> None:
    from .planner import CycleLog

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CycleLog.header())
        for c in result.planner_logs:
            w.writerow(c.row())


def write_timing(result: RunResult, path) -> None:
    ms = result.solve_times()
    data = {"optimize_ms": {"count": int(ms.size),
                            "median": float(np.median(ms)) if ms.size else None,
                            "p95": float(np.percentile(ms, 95)) if ms.size else None,
                            "max": float(ms.max()) if ms.size else None}}
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
