"""Per-agent receding-horizon planner.

Each cycle: pick a local goal on the horizon sphere, seed waypoints and
durations (straight line, or the previous plan's tail when available), then
minimize the weighted objective over (q, tau) with T = exp(tau).
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from . import minco
from .costs import (TERMS, CostReport, CostWeights, NeighborTrajectories, PenaltyParams, esdf_arrays,
                    total_cost, total_kernel)
from .esdf import Esdf, GridMap, build_esdf
from .formation import FormationSpec
from .lbfgs import CODE, LbfgsParams, LbfgsResult, NonFiniteCost, tell, workspace
from .minco import Trajectory, adjoint, construct, solve_coeffs
from .search import push_free, repair_polyline

log = logging.getLogger(__name__)


class OptimizerFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    replan_period: float = 1.0
    horizon: float = 3.0
    pieces: int = 5
    memory: int = 16
    max_iterations: int = 60
    g_epsilon: float = 1e-5
    f_dec_coeff: float = 1e-4
    s_curv_coeff: float = 0.9
    t_floor: float = 0.01
    map_margin: float = 2.0
    jitter: float = 1e-9
    goal_mode: str = "swarm"
    front_end: str = "search"
    search_clearance: float = 0.2
    fail_on_max_iterations: bool = False
    weights: CostWeights = field(default_factory=CostWeights)
    params: PenaltyParams = field(default_factory=PenaltyParams)

    def __post_init__(self):
        if self.replan_period <= 0:
            raise ValueError("replan_period must be positive")
        if self.pieces < 1:
            raise ValueError("need at least one piece")
        if self.goal_mode not in ("agent", "swarm"):
            raise ValueError(f"goal_mode must be 'agent' or 'swarm', got {self.goal_mode!r}")
        if self.front_end not in ("straight", "search"):
            raise ValueError(f"front_end must be 'straight' or 'search', got {self.front_end!r}")

    @property
    def lbfgs(self) -> LbfgsParams:
        return LbfgsParams(memory=self.memory, max_iterations=self.max_iterations, g_epsilon=self.g_epsilon,
                           f_dec_coeff=self.f_dec_coeff, s_curv_coeff=self.s_curv_coeff)


@dataclass
class AgentState:
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    goal: np.ndarray
    vertex: int

    def head(self) -> np.ndarray:
        return np.vstack([self.position, self.velocity, self.acceleration])


@dataclass
class PlanContext:
    esdf: Esdf | None = None
    neighbors: NeighborTrajectories | None = None
    spec: FormationSpec | None = None
    own_vertex: int = 0
    t0: float = 0.0


@dataclass
class OptimizeResult:
    trajectory: Trajectory
    report: CostReport
    initial_cost: float
    iterations: int
    evaluations: int
    status: str
    wall_ms: float


# ---------------------------------------------------------------------------
# initial guess


def trapezoid_times(s, v0: float, v_max: float, a_max: float) -> np.ndarray:
    """Arrival times at arc lengths ``s`` (increasing, s[0] = 0) for an accelerate-cruise-brake profile."""
    s = np.asarray(s, dtype=float)
    L = float(s[-1])
    v0 = min(max(v0, 0.0), v_max)
    # peak speed reachable when braking to rest at L
    vp = min(v_max, math.sqrt(max((2.0 * a_max * L + v0 * v0) / 2.0, 0.0)))
    vp = max(vp, v0)
    s_acc = (vp * vp - v0 * v0) / (2.0 * a_max)
    s_dec = vp * vp / (2.0 * a_max)
    if s_acc + s_dec > L:
        # cannot stop from v0 within L at a_max: brake as hard as needed
        s_acc, vp = 0.0, v0
        s_dec = L
    t_acc = (vp - v0) / a_max
    t_cru = (L - s_acc - s_dec) / vp if vp > 0 else 0.0
    out = np.empty_like(s)
    for k, x in enumerate(s):
        if x <= s_acc:
            out[k] = (-v0 + math.sqrt(v0 * v0 + 2.0 * a_max * x)) / a_max
        elif x <= s_acc + (L - s_acc - s_dec):
            out[k] = t_acc + (x - s_acc) / vp
        else:
            rem = L - x
            dec = vp * vp / (2.0 * s_dec) if s_dec > 0 else a_max
            t_dec = vp / dec
            out[k] = t_acc + t_cru + t_dec - math.sqrt(max(2.0 * rem / dec, 0.0))
    return out


def local_goal(position, goal, horizon: float) -> np.ndarray:
    p = np.asarray(position, dtype=float)
    g = np.asarray(goal, dtype=float)
    d = g - p
    n = np.linalg.norm(d)
    if n <= horizon:
        return g.copy()
    return p + d * (horizon / n)


def swarm_local_goal(positions, vertices, spec: FormationSpec, own_vertex: int, goal, horizon: float) -> np.ndarray:
    """Local goal anchored to the formation's virtual center rather than the agent itself.

    ``positions``/``vertices`` are the agents currently known (own included);
    ``goal`` is this agent's global goal. The virtual center is the mean of
    position minus desired offset, moved toward the goal centroid by at most
    ``horizon``, and the agent's offset is added back.
    """
    off = spec.offsets()
    P = np.asarray(positions, dtype=float).reshape(-1, 3)
    center = np.mean(P - off[np.asarray(vertices, dtype=int)], axis=0)
    target = np.asarray(goal, dtype=float) - off[own_vertex]
    return local_goal(center, target, horizon) + off[own_vertex]


def _resample_polyline(pts: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    """``count`` + 1 points evenly spaced by arc length, and their arc lengths."""
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, cum[-1], count + 1)
    out = np.empty((count + 1, 3))
    for a in range(3):
        out[:, a] = np.interp(targets, cum, pts[:, a])
    return out, targets


def initial_guess(state: AgentState, goal, esdf: Esdf | None, config: PlannerConfig = PlannerConfig(),
                  previous: tuple[float, Trajectory] | None = None, now: float = 0.0,
                  rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Interior waypoints (M-1, 3) and durations (M,) seeding the optimizer."""
    q, T, _ = _guess(state, goal, esdf, config, previous, now, rng)
    return q, T


def _guess(state, goal, esdf, config, previous, now, rng, lg=None):
    p = np.asarray(state.position, dtype=float)
    if lg is None:
        lg = local_goal(p, goal, config.horizon)
    search = esdf is not None and config.front_end == "search"
    if search:
        lg = push_free(esdf, lg, config.search_clearance)
    elif esdf is not None:
        lg = _retreat_from_obstacles(p, lg, esdf)
    speed = float(np.linalg.norm(state.velocity))
    if np.linalg.norm(lg - p) < 1e-6 and speed < 1e-6:
        return np.zeros((0, 3)), np.array([config.t_floor]), lg
    M = config.pieces
    pts = [p]
    if previous is not None:
        stamp, traj = previous
        t_rel = now - stamp
        if 0.0 <= t_rel < traj.total_time:
            for t in np.linspace(t_rel, traj.total_time, 12)[1:]:
                pts.append(traj.evaluate(t))
    pts.append(lg)
    poly = np.asarray(pts)
    keep = np.concatenate([[True], np.linalg.norm(np.diff(poly, axis=0), axis=1) > 1e-9])
    poly = poly[keep]
    if poly.shape[0] < 2:
        poly = np.vstack([p, lg])
    if search:
        poly = repair_polyline(esdf, poly, config.search_clearance)
        lg = poly[-1]
        keep = np.concatenate([[True], np.linalg.norm(np.diff(poly, axis=0), axis=1) > 1e-9])
        poly = poly[keep]
        if poly.shape[0] < 2:
            if speed < 1e-6:
                return np.zeros((0, 3)), np.array([config.t_floor]), p
            poly = np.vstack([p, p + 1e-3 * state.velocity / speed])
            lg = poly[-1]
    wp, arc = _resample_polyline(poly, M)
    v_along = float(state.velocity @ (wp[1] - wp[0]) / max(np.linalg.norm(wp[1] - wp[0]), 1e-12))
    times = trapezoid_times(arc, max(v_along, 0.0), config.params.v_max, config.params.a_max)
    T = np.maximum(np.diff(times), config.t_floor)
    q = wp[1:-1].copy()
    if rng is not None and config.jitter > 0 and q.size:
        q += rng.uniform(-config.jitter, config.jitter, q.shape)
    return q, T, lg


def _retreat_from_obstacles(p, lg, esdf: Esdf) -> np.ndarray:
    """Pull a local goal that lands inside known occupied space back toward the agent."""
    d, _ = esdf.query(lg)
    if d > 0.0:
        return lg
    seg = lg - p
    n = np.linalg.norm(seg)
    steps = int(n / esdf.resolution)
    for k in range(1, steps + 1):
        cand = lg - seg * (k * esdf.resolution / n)
        if esdf.query(cand)[0] > 0.0:
            return cand
    return lg


# ---------------------------------------------------------------------------
# optimization


@numba.njit(cache=True)
def objective_kernel(x, M, head, tail, t0, log_floor, kappa, dist, origin, res, dmax, nb_c, nb_T, nb_M,
                     nb_t0, nb_vertex, own_vertex, Ldes, weights, params, gx, terms):
    nq = 3 * (M - 1)
    q = np.empty((M - 1, 3))
    for i in range(M - 1):
        for d in range(3):
            q[i, d] = x[3 * i + d]
    T = np.empty(M)
    for i in range(M):
        T[i] = math.exp(max(x[nq + i], log_floor))
    ab = np.zeros((19, 6 * M))
    ipiv = np.zeros(6 * M, dtype=np.int64)
    coeffs = np.empty((M, 6, 3))
    if solve_coeffs(q, T, head, tail, ab, ipiv, coeffs) != 0:
        return np.nan
    gc = np.empty((M, 6, 3))
    gT = np.empty(M)
    total = total_kernel(coeffs, T, kappa, t0, dist, origin, res, dmax, nb_c, nb_T, nb_M, nb_t0, nb_vertex,
                         own_vertex, Ldes, weights, params, gc, gT, terms)
    gq = np.empty((M - 1, 3))
    gTt = np.empty(M)
    adjoint(ab, ipiv, coeffs, T, gc, gT, gq, gTt)
    for i in range(M - 1):
        for d in range(3):
            gx[3 * i + d] = gq[i, d]
    for i in range(M):
        gx[nq + i] = gTt[i] * T[i] if x[nq + i] > log_floor else 0.0
    return total


@numba.njit(cache=True)
def planner_objective(x, gx, args):
    (M, head, tail, t0, log_floor, kappa, dist, origin, res, dmax, nb_c, nb_T, nb_M, nb_t0, nb_vertex,
     own_vertex, Ldes, weights, params, terms) = args
    return objective_kernel(x, M, head, tail, t0, log_floor, kappa, dist, origin, res, dmax, nb_c, nb_T, nb_M,
                            nb_t0, nb_vertex, own_vertex, Ldes, weights, params, gx, terms)


@numba.njit(cache=True)
def solve(x0, args, p):
    """L-BFGS on :func:`planner_objective`, fully compiled."""
    x, g, xt, gt, d, S, Y, rho, st = workspace(x0, p)
    while True:
        ft = planner_objective(xt, gt, args)
        if tell(ft, x, g, xt, gt, d, S, Y, rho, st, p):
            break
    return x, g, st


class Objective:
    """J(q, tau) and its gradient for one agent's planning problem."""

    def __init__(self, head, tail, pieces: int, context: PlanContext, weights: CostWeights,
                 params: PenaltyParams, t_floor: float):
        self.M = pieces
        self.head = np.ascontiguousarray(head, dtype=float)
        self.tail = np.ascontiguousarray(tail, dtype=float)
        self.context = context
        self.weights = weights
        self.params = params
        self.t_floor = t_floor
        self.log_floor = math.log(t_floor)
        self.kappa = np.full(pieces, params.kappa, dtype=np.int64)
        self.map = esdf_arrays(context.esdf)
        nb = context.neighbors if context.neighbors is not None else NeighborTrajectories.empty()
        self.nb = nb
        w = weights.as_array()
        if context.spec is None or len(nb) == 0:
            w[3] = 0.0
            self.ldes = np.zeros((1, 1))
        else:
            self.ldes = np.ascontiguousarray(context.spec.desired_laplacian)
        self.w = w
        self.pa = params.as_array()
        self.terms = np.zeros(7)

    def pack(self, q, T) -> np.ndarray:
        T = np.maximum(np.asarray(T, dtype=float), self.t_floor)
        return np.concatenate([np.asarray(q, dtype=float).reshape(-1), np.log(T)])

    def unpack(self, x) -> tuple[np.ndarray, np.ndarray]:
        nq = 3 * (self.M - 1)
        q = x[:nq].reshape(self.M - 1, 3)
        T = np.exp(np.maximum(x[nq:], self.log_floor))
        return q, T

    def args(self) -> tuple:
        dist, origin, res, dmax = self.map
        nb = self.nb
        return (self.M, self.head, self.tail, float(self.context.t0), self.log_floor, self.kappa, dist, origin,
                float(res), float(dmax), nb.coeffs, nb.durations, nb.pieces, nb.t0, nb.vertex,
                int(self.context.own_vertex), self.ldes, self.w, self.pa, self.terms)

    def __call__(self, x):
        """(J, dJ/dx) at ``x``; convenience for checks outside the solver."""
        gx = np.empty_like(x)
        f = planner_objective(np.asarray(x, dtype=float), gx, self.args())
        return f, gx

    def trajectory(self, x) -> Trajectory:
        q, T = self.unpack(x)
        return construct(q, T, self.head, self.tail)


def optimize(q0, T0, head, tail, context: PlanContext, config: PlannerConfig = PlannerConfig()) -> OptimizeResult:
    T0 = np.asarray(T0, dtype=float)
    if np.any(T0 <= 0):
        raise ValueError("initial durations must be positive")
    start = time.perf_counter()
    obj = Objective(head, tail, T0.size, context, config.weights, config.params, config.t_floor)
    x0 = obj.pack(q0, T0)
    x, g, st = solve(x0, obj.args(), config.lbfgs.as_array())
    if st[CODE] == 3:
        raise NonFiniteCost(f"planning objective is not finite at the initial guess (f={st[0]})")
    res = LbfgsResult.from_state(x, g, st)
    if not math.isfinite(res.f):
        raise NonFiniteCost("optimizer ended on a non-finite cost")
    if config.fail_on_max_iterations and res.status == "max_iterations":
        raise OptimizerFailure(f"no convergence within {config.max_iterations} iterations")
    traj = obj.trajectory(res.x)
    report = total_cost(traj, context.esdf, context.neighbors, context.spec, config.weights, config.params,
                        context.own_vertex, context.t0)
    wall = (time.perf_counter() - start) * 1e3
    return OptimizeResult(traj, report, res.f0, res.iterations, res.evaluations, res.status, wall)


# ---------------------------------------------------------------------------
# replanning


@dataclass
class CycleLog:
    agent: int
    cycle: int
    iterations: int
    status: str
    costs: dict
    wall_ms: float
    fallback: bool

    @staticmethod
    def header() -> list:
        return ["agent", "cycle", "iterations", "status"] + list(TERMS) + ["total", "wall_ms", "fallback"]

    def row(self) -> list:
        return ([self.agent, self.cycle, self.iterations, self.status]
                + [self.costs.get(t, float("nan")) for t in TERMS]
                + [self.costs.get("total", float("nan")), round(self.wall_ms, 3), int(self.fallback)])


class Planner:
    """Planning state of one agent across cycles."""

    def __init__(self, agent: int, vertex: int, goal, spec: FormationSpec | None,
                 config: PlannerConfig = PlannerConfig(), seed: int = 0):
        self.agent = agent
        self.vertex = vertex
        self.goal = np.asarray(goal, dtype=float)
        self.spec = spec
        self.config = config
        self.rng = np.random.default_rng([seed, agent])
        self.cycle = 0
        self.previous: tuple[float, Trajectory] | None = None
        self.logs: list[CycleLog] = []

    def bootstrap(self, now: float, state: AgentState) -> tuple[float, Trajectory]:
        """Unoptimized straight-line guess, announced before the first planning cycle."""
        q0, T0, lg = _guess(state, self.goal, None, self.config, None, now, None)
        tail = np.vstack([lg, np.zeros(3), np.zeros(3)])
        self.previous = (now, construct(q0, T0, state.head(), tail))
        return self.previous

    def local_esdf(self, known: GridMap, pts: np.ndarray) -> Esdf:
        lo = pts.min(axis=0) - self.config.map_margin
        hi = pts.max(axis=0) + self.config.map_margin
        return build_esdf(known.crop(lo, hi))

    def replan(self, now: float, state: AgentState, neighbors: NeighborTrajectories,
               known: GridMap | None) -> tuple[float, Trajectory]:
        """One planning cycle; returns the (stamp, trajectory) to publish."""
        cfg = self.config
        self.cycle += 1
        anchor = None
        if cfg.goal_mode == "swarm" and self.spec is not None:
            pos = [state.position] + [neighbors.state(k, now)[0] for k in range(len(neighbors))]
            vtx = [self.vertex] + [int(v) for v in neighbors.vertex]
            anchor = swarm_local_goal(pos, vtx, self.spec, self.vertex, self.goal, cfg.horizon)
        # first pass without a map to place the window, then guess again with it
        q0, T0, lg = _guess(state, self.goal, None, cfg, self.previous, now, self.rng, anchor)
        esdf = None
        if known is not None:
            window = np.vstack([state.position, q0.reshape(-1, 3), lg])
            esdf = self.local_esdf(known, window)
            q0, T0, lg = _guess(state, self.goal, esdf, cfg, self.previous, now, self.rng, anchor)
        tail = np.vstack([lg, np.zeros(3), np.zeros(3)])
        ctx = PlanContext(esdf, neighbors, self.spec if len(neighbors) else None, self.vertex, now)
        try:
            result = optimize(q0, T0, state.head(), tail, ctx, cfg)
        except (NonFiniteCost, OptimizerFailure, minco.SingularSystem, ValueError) as exc:
            log.warning("agent %d cycle %d: optimizer failed (%s); keeping previous plan", self.agent,
                        self.cycle, exc)
            self.logs.append(CycleLog(self.agent, self.cycle, 0, type(exc).__name__, {}, 0.0, True))
            if self.previous is None:
                self.previous = (now, minco.hover(state.position, cfg.t_floor))
            return self.previous
        costs = dict(result.report.values, total=result.report.total)
        self.logs.append(CycleLog(self.agent, self.cycle, result.iterations, result.status, costs,
                                  result.wall_ms, False))
        self.previous = (now, result.trajectory)
        return self.previous


def replace_weights(config: PlannerConfig, **kw) -> PlannerConfig:
    return replace(config, weights=config.weights.replace(**kw))
