"""Formation-quality metrics, run evaluation, and benchmark aggregation.

e_dist is the residual of the best similarity transform taking the current
formation onto the desired one; e_sim is the Laplacian similarity from
:mod:`swarmform.formation` (called, never reimplemented).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .formation import FormationSpec, similarity
from .scenario import REGIMES, ConfigError, ScenarioConfig, benchmark_scenario

TABLE_HEADER = ["scenario", "runs", "successes", "success_rate(%)", "e_dist(m^2)", "e_dist_rms(m)", "e_sim",
                "failures"]


class DegenerateConfiguration(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Sim3Transform:
    """x -> s R x + t."""

    R: np.ndarray
    t: np.ndarray
    s: float
    degenerate: bool = False

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-10) or np.linalg.det(R) < 0:
            raise ValueError("R must be a proper rotation")
        if not self.s > 0:
            raise ValueError("scale must be positive")

    def apply(self, points) -> np.ndarray:
        return self.s * np.asarray(points, dtype=float) @ np.asarray(self.R).T + self.t

    def inverse(self) -> "Sim3Transform":
        Ri = np.asarray(self.R).T
        return Sim3Transform(Ri, -(Ri @ self.t) / self.s, 1.0 / self.s, self.degenerate)

    @classmethod
    def random(cls, rng: np.random.Generator, scale_range=(0.2, 5.0), shift: float = 10.0) -> "Sim3Transform":
        R = Rotation.random(random_state=rng).as_matrix()
        s = float(np.exp(rng.uniform(np.log(scale_range[0]), np.log(scale_range[1]))))
        return cls(R, rng.uniform(-shift, shift, 3), s)


def _pair(current, desired) -> tuple[np.ndarray, np.ndarray]:
    C = np.asarray(current, dtype=float)
    D = np.asarray(desired, dtype=float)
    if C.ndim != 2 or C.shape[1] != 3 or C.shape != D.shape:
        raise ValueError(f"expected two (N, 3) arrays of equal shape, got {C.shape} and {D.shape}")
    if C.shape[0] < 3:
        raise ValueError("alignment needs at least 3 points")
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(D))):
        raise ValueError("non-finite coordinates")
    if np.max(np.linalg.norm(C - C.mean(axis=0), axis=1)) == 0.0:
        raise DegenerateConfiguration("current points are all coincident")
    return C, D


def residual(current, desired, T: Sim3Transform) -> float:
    """Sum over agents of squared distance between desired and transformed current positions."""
    r = np.asarray(desired, dtype=float) - T.apply(current)
    return float(np.sum(r * r))


def sim3_align(current, desired) -> tuple[float, Sim3Transform]:
    """Closed-form least-squares similarity transform mapping ``current`` onto ``desired``.

    Returns (e_dist, transform); e_dist is the minimized sum of squared
    residuals. Rank-deficient cross-covariance (e.g. collinear points) makes
    the rotation non-unique; the transform is then flagged ``degenerate``.
    """
    C, D = _pair(current, desired)
    mc = C.mean(axis=0)
    md = D.mean(axis=0)
    Xc = C - mc
    Xd = D - md
    cov = Xd.T @ Xc / C.shape[0]
    U, sig, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    var_c = np.sum(Xc * Xc) / C.shape[0]
    s = float(np.sum(sig * np.diag(S)) / var_c)
    degenerate = bool(sig[1] <= 1e-12 * max(sig[0], 1e-300))
    if s <= 0:
        # desired has no spread along the matched directions; any shrink is optimal
        s = np.finfo(float).tiny
        degenerate = True
    t = md - s * R @ mc
    T = Sim3Transform(R, t, s, degenerate)
    return residual(C, D, T), T


def polish(current, desired, start: Sim3Transform | None = None) -> tuple[float, Sim3Transform]:
    """Nonlinear least-squares refinement over (rotation vector, translation, log scale)."""
    C, D = _pair(current, desired)
    if start is None:
        start = sim3_align(C, D)[1]

    def unpack(z):
        return Rotation.from_rotvec(z[:3]).as_matrix(), z[3:6], math.exp(z[6])

    def fun(z):
        R, t, s = unpack(z)
        return (D - (s * C @ R.T + t)).ravel()

    z0 = np.concatenate([Rotation.from_matrix(start.R).as_rotvec(), start.t, [math.log(start.s)]])
    sol = least_squares(fun, z0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    R, t, s = unpack(sol.x)
    T = Sim3Transform(R, t, s, start.degenerate)
    return residual(C, D, T), T


def formation_scale(current, desired) -> float:
    """Size of ``current`` relative to ``desired`` (< 1 when compressed), from the aligning transform."""
    return sim3_align(desired, current)[1].s


def e_sim(current, spec: FormationSpec) -> float:
    return similarity(current, spec)


# ---------------------------------------------------------------------------
# run evaluation


@dataclass
class RunEvaluation:
    name: str
    success: bool
    times: np.ndarray
    e_dist: np.ndarray
    e_sim: np.ndarray
    scale: np.ndarray

    @property
    def e_dist_rms(self) -> np.ndarray:
        return np.sqrt(self.e_dist / self.n)

    n: int = 0

    def means(self) -> dict:
        return {"e_dist": _mean(self.e_dist), "e_dist_rms": _mean(self.e_dist_rms), "e_sim": _mean(self.e_sim)}

    def series_rows(self) -> list:
        return [[f"{t:.2f}", repr(float(a)), repr(float(b)), repr(float(c)), repr(float(d))]
                for t, a, b, c, d in zip(self.times, self.e_dist, self.e_dist_rms, self.e_sim, self.scale)]

    SERIES_HEADER = ["t", "e_dist", "e_dist_rms", "e_sim", "scale"]


def _mean(values) -> float:
    """Order-independent mean (exactly rounded sum of sorted values)."""
    v = sorted(float(x) for x in values)
    return math.fsum(v) / len(v) if v else float("nan")


def by_vertex(positions, vertices) -> np.ndarray:
    """Reorder agent-indexed positions (..., N, 3) into vertex order."""
    P = np.asarray(positions, dtype=float)
    out = np.empty_like(P)
    out[..., list(vertices), :] = P
    return out


def evaluate_positions(times, positions, vertices, spec: FormationSpec | None, sample_period: float = 0.1,
                       name: str = "", success: bool = True) -> RunEvaluation:
    """Per-instant e_dist, e_sim and scale at ``sample_period`` spacing.

    With fewer than three agents the alignment is undefined and every series is NaN.
    """
    times = np.asarray(times, dtype=float)
    P = by_vertex(positions, vertices)
    keep = _sample(times, sample_period)
    if spec is None or spec.n < 3:
        nan = np.full(len(keep), np.nan)
        return RunEvaluation(name, success, times[keep], nan, nan.copy(), nan.copy(), n=P.shape[-2])
    ed, es, sc = [], [], []
    for s in keep:
        cur = P[s]
        ed.append(sim3_align(cur, spec.desired_positions)[0])
        es.append(similarity(cur, spec))
        sc.append(formation_scale(cur, spec.desired_positions))
    return RunEvaluation(name, success, times[keep], np.array(ed), np.array(es), np.array(sc), n=spec.n)


def _sample(times: np.ndarray, period: float) -> list[int]:
    keep, nxt = [], -np.inf
    for i, t in enumerate(times):
        if t >= nxt - 1e-9:
            keep.append(i)
            nxt = t + period
    return keep


def evaluate_run(result, spec: FormationSpec | None, sample_period: float = 0.1) -> RunEvaluation:
    """Evaluate a :class:`swarmform.sim.RunResult`."""
    return evaluate_positions(result.times, result.positions, result.vertices, spec, sample_period,
                              result.name, result.success)


# ---------------------------------------------------------------------------
# scenarios and aggregation


def generate_scenarios(regime: str, count: int, seed: int, **kw) -> list[ScenarioConfig]:
    """``count`` seeded benchmark scenarios with obstacles written out explicitly."""
    if regime not in REGIMES:
        raise ConfigError(f"unknown regime {regime!r}; expected one of {sorted(REGIMES)}")
    if count < 1:
        raise ConfigError("count must be >= 1")
    seeds = np.random.default_rng([seed, list(REGIMES).index(regime)]).integers(0, 2**31 - 1, count)
    out = []
    for i, s in enumerate(seeds):
        cfg = benchmark_scenario(regime, int(s), **kw)
        cfg.obstacles = cfg.resolved_obstacles()
        cfg.generator = None
        cfg.name = f"{regime}-{i:03d}"
        out.append(cfg)
    return out


@dataclass
class EvalSummary:
    scenario: str
    runs: int
    successes: int
    e_dist: float
    e_dist_rms: float
    e_sim: float
    failures: list = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return 100.0 * self.successes / self.runs if self.runs else float("nan")

    def row(self) -> list:
        return [self.scenario, self.runs, self.successes, f"{self.success_rate:.1f}", f"{self.e_dist:.6g}",
                f"{self.e_dist_rms:.6g}", f"{self.e_sim:.6g}", ";".join(sorted(self.failures))]


def summarize(scenario: str, evaluations) -> EvalSummary:
    """Success rate over all runs; error means over successful runs only (failures listed separately)."""
    evs = sorted(evaluations, key=lambda e: e.name)
    ok = [e for e in evs if e.success]
    m = [e.means() for e in ok]
    return EvalSummary(scenario, len(evs), len(ok), _mean([x["e_dist"] for x in m]),
                       _mean([x["e_dist_rms"] for x in m]), _mean([x["e_sim"] for x in m]),
                       [e.name for e in evs if not e.success])


def write_table(summaries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_HEADER)
        for s in summaries:
            w.writerow(s.row())
