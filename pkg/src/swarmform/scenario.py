"""Scenario configuration: map, obstacles, agents, formation, goal, and knobs.

Configs are plain JSON. Obstacles are either listed as primitives or produced
by a seeded cylinder-field generator referenced from the config.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from .costs import CostWeights, PenaltyParams
from .esdf import Box, Cylinder, InvalidPrimitive, primitive_from_dict
from .formation import FormationSpec, hexagon
from .planner import PlannerConfig

REGIMES = {"sparse": 25, "medium": 45, "dense": 70}
CYLINDER_DIAMETER = 0.3
CYLINDER_HEIGHT = 4.0


class ConfigError(ValueError):
    pass


class GenerationFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class MapConfig:
    origin: tuple = (-3.0, 0.0, -0.2)
    size: tuple = (36.0, 15.0, 2.4)
    resolution: float = 0.1


@dataclass(frozen=True)
class ArenaConfig:
    """Known flight-volume bounds: horizontal floor and ceiling planes (None disables)."""

    floor: float | None = None
    ceiling: float | None = None

    def obstacles(self, m: MapConfig) -> list:
        lo = np.asarray(m.origin, dtype=float) - 1.0
        hi = np.asarray(m.origin, dtype=float) + np.asarray(m.size, dtype=float) + 1.0
        out = []
        if self.floor is not None:
            out.append(Box((lo[0], lo[1], self.floor - 1.0), (hi[0], hi[1], self.floor)))
        if self.ceiling is not None:
            out.append(Box((lo[0], lo[1], self.ceiling), (hi[0], hi[1], self.ceiling + 1.0)))
        return out


@dataclass(frozen=True)
class FieldSpec:
    """Seeded cylinder field: ``count`` cylinders uniformly in the xy box ``lo``..``hi``."""

    regime: str = "sparse"
    seed: int = 0
    count: int | None = None
    lo: tuple = (1.0, 0.0)
    hi: tuple = (29.0, 15.0)
    corridor: float = 0.8
    max_retries: int = 200

    def resolved_count(self) -> int:
        if self.count is not None:
            return int(self.count)
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}; expected one of {sorted(REGIMES)}")
        return REGIMES[self.regime]


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    sensing_radius: float = 5.0
    agent_radius: float = 0.15
    collision_radius: float = 0.3
    inflate: float = 0.15
    goal_tolerance: float = 0.5
    time_limit: float = 150.0
    stagger: float = 0.01
    trace_period: float = 0.1
    bus_delay: float = 0.0
    bus_jitter: float = 0.0
    bus_drop: float = 0.0
    stop_on_violation: bool = False

    def steps(self, seconds: float) -> int:
        return int(round(seconds / self.dt))


@dataclass
class ScenarioConfig:
    name: str
    agents: np.ndarray
    vertices: list
    desired: np.ndarray
    goal: np.ndarray
    obstacles: list = field(default_factory=list)
    generator: FieldSpec | None = None
    map: MapConfig = field(default_factory=MapConfig)
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    seed: int = 0

    def __post_init__(self):
        self.agents = np.asarray(self.agents, dtype=float).reshape(-1, 3)
        self.desired = np.asarray(self.desired, dtype=float).reshape(-1, 3)
        self.goal = np.asarray(self.goal, dtype=float).reshape(3)
        self.vertices = [int(v) for v in self.vertices]
        n = self.agents.shape[0]
        if n < 1:
            raise ConfigError("scenario needs at least one agent")
        if self.desired.shape[0] != n:
            raise ConfigError(f"{n} agents but {self.desired.shape[0]} desired positions")
        if sorted(self.vertices) != list(range(n)):
            raise ConfigError("agent vertices must be a permutation of 0..N-1")
        for arr in (self.agents, self.desired, self.goal):
            if not np.all(np.isfinite(arr)):
                raise ConfigError("non-finite coordinates in scenario")
        if self.sim.dt <= 0 or self.sim.time_limit <= 0:
            raise ConfigError("dt and time_limit must be positive")
        period = self.planner.replan_period / self.sim.dt
        if abs(period - round(period)) > 1e-9:
            raise ConfigError("replan_period must be an integer multiple of dt")

    @property
    def n(self) -> int:
        return self.agents.shape[0]

    def spec(self) -> FormationSpec | None:
        """The formation, or None for a lone agent."""
        return FormationSpec.from_positions(self.desired) if self.n > 1 else None

    def goals(self) -> np.ndarray:
        """Per-agent goals: goal centroid plus each agent's desired offset."""
        off = self.desired - self.desired.mean(axis=0)
        return np.array([self.goal + off[v] for v in self.vertices])

    def resolved_obstacles(self) -> list:
        """Scene obstacles (listed plus generated), excluding the arena bounds."""
        obs = list(self.obstacles)
        if self.generator is not None:
            obs += cylinder_field(self.generator)
        return obs

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        p = self.planner
        planner = {f.name: getattr(p, f.name) for f in fields(p) if f.name not in ("weights", "params")}
        return {
            "name": self.name,
            "seed": self.seed,
            "map": _plain(asdict(self.map)),
            "arena": asdict(self.arena),
            "obstacles": [o.to_dict() for o in self.obstacles],
            "generator": None if self.generator is None else _plain(asdict(self.generator)),
            "agents": [{"start": list(map(float, a)), "vertex": v} for a, v in zip(self.agents, self.vertices)],
            "formation": {"desired_positions": self.desired.tolist()},
            "goal": {"centroid": self.goal.tolist()},
            "weights": asdict(p.weights),
            "params": asdict(p.params),
            "planner": planner,
            "sim": asdict(self.sim),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        try:
            weights = CostWeights(**d.get("weights", {}))
            params = PenaltyParams(**d.get("params", {}))
            planner = PlannerConfig(weights=weights, params=params, **d.get("planner", {}))
            gen = d.get("generator")
            agents = d["agents"]
            return cls(
                name=str(d.get("name", "scenario")),
                seed=int(d.get("seed", 0)),
                map=MapConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.get("map", {}).items()}),
                arena=ArenaConfig(**d.get("arena", {})),
                obstacles=[primitive_from_dict(o) for o in d.get("obstacles", [])],
                generator=None if gen is None else FieldSpec(**{k: tuple(v) if isinstance(v, list) else v
                                                               for k, v in gen.items()}),
                agents=[a["start"] for a in agents],
                vertices=[a.get("vertex", k) for k, a in enumerate(agents)],
                desired=d["formation"]["desired_positions"],
                goal=d["goal"]["centroid"],
                planner=planner,
                sim=SimConfig(**d.get("sim", {})),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, InvalidPrimitive) as exc:
            raise ConfigError(f"invalid scenario config: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ScenarioConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config root must be an object")
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        return cls.loads(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")


def _plain(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# ---------------------------------------------------------------------------
# cylinder fields


def corridor_exists(obstacles, lo, hi, width: float, resolution: float = 0.1) -> bool:
    """Whether a path of clear ``width`` crosses the xy box from its -x side to its +x side.

    Free cells are those whose center is more than width/2 from every cylinder
    surface; connectivity is 4-neighbour flood fill on that grid.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    xs = np.arange(lo[0] - 1.0, hi[0] + 1.0, resolution) + 0.5 * resolution
    ys = np.arange(lo[1], hi[1], resolution) + 0.5 * resolution
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    free = np.ones(X.shape, dtype=bool)
    for ob in obstacles:
        r = ob.radius + 0.5 * width
        free &= (X - ob.center[0]) ** 2 + (Y - ob.center[1]) ** 2 > r * r
    labels, _ = ndimage.label(free)
    left = set(labels[0][labels[0] > 0].tolist())
    right = set(labels[-1][labels[-1] > 0].tolist())
    return bool(left & right)


def cylinder_field(gen: FieldSpec) -> list:
    """Seeded placement of ground-standing cylinders with a guaranteed crossing corridor."""
    count = gen.resolved_count()
    rng = np.random.default_rng([gen.seed, count])
    lo = np.asarray(gen.lo, dtype=float)
    hi = np.asarray(gen.hi, dtype=float)
    zc = 0.5 * CYLINDER_HEIGHT
    for _ in range(gen.max_retries):
        xy = rng.uniform(lo, hi, size=(count, 2))
        obs = [Cylinder((float(x), float(y), zc), 0.5 * CYLINDER_DIAMETER, CYLINDER_HEIGHT) for x, y in xy]
        if corridor_exists(obs, lo, hi, gen.corridor):
            return obs
    raise GenerationFailure(f"no connected {gen.regime} field after {gen.max_retries} attempts")


def benchmark_scenario(regime: str, seed: int, planner: PlannerConfig | None = None,
                       sim: SimConfig | None = None) -> ScenarioConfig:
    """Seven-agent hexagon crossing a 30 x 15 m cylinder field."""
    if regime not in REGIMES:
        raise ConfigError(f"unknown regime {regime!r}; expected one of {sorted(REGIMES)}")
    desired = hexagon(1.2)
    start = np.array([-1.5, 7.5, 1.0])
    goal = np.array([31.5, 7.5, 1.0])
    return ScenarioConfig(
        name=f"{regime}-{seed:03d}",
        seed=seed,
        agents=desired + start,
        vertices=list(range(desired.shape[0])),
        desired=desired,
        goal=goal,
        generator=FieldSpec(regime=regime, seed=seed),
        map=MapConfig(origin=(-3.0, 0.0, -0.2), size=(36.0, 15.0, 2.4)),
        arena=ArenaConfig(floor=0.0, ceiling=2.0),
        planner=planner or PlannerConfig(),
        sim=sim or SimConfig(),
    )


def corridor_scenario(width: float = 1.6, height: float | None = None, length: float = 3.0, edge: float = 2.0,
                      planner: PlannerConfig | None = None, sim: SimConfig | None = None) -> ScenarioConfig:
    """Four-agent tetrahedron flying through an opening in a wall that spans the arena.

    The default opening is a full-height slot narrower than the formation's
    narrowest body width (edge / sqrt 2 plus one agent diameter), so the swarm
    has to shrink to pass. ``height`` turns the slot into a rectangular tunnel.
    """
    from .formation import tetrahedron

    yc, zc = 5.0, 1.3
    top = 2.6
    x0, x1 = 5.0, 5.0 + length
    y0, y1 = yc - 0.5 * width, yc + 0.5 * width
    z0, z1 = (0.0, top) if height is None else (zc - 0.5 * height, zc + 0.5 * height)
    wall = [Box((x0, 0.0, 0.0), (x1, y0, top)), Box((x0, y1, 0.0), (x1, 10.0, top))]
    if z0 > 0.0:
        wall.append(Box((x0, y0, 0.0), (x1, y1, z0)))
    if z1 < top:
        wall.append(Box((x0, y0, z1), (x1, y1, top)))
    desired = tetrahedron(edge)
    start = np.array([0.0, yc, zc])
    return ScenarioConfig(
        name="corridor",
        agents=desired + start,
        vertices=list(range(4)),
        desired=desired,
        goal=np.array([18.0, yc, zc]),
        obstacles=wall,
        map=MapConfig(origin=(-3.0, 0.0, -0.2), size=(24.0, 10.0, 3.0)),
        arena=ArenaConfig(floor=0.0, ceiling=top),
        planner=planner or PlannerConfig(),
        sim=sim or SimConfig(time_limit=90.0, goal_tolerance=0.1),
    )
