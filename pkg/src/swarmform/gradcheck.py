"""Finite-difference verification of every analytic gradient.

Each check draws a random instance where the term is active, computes the
analytic gradient with respect to the optimizer's variables (positions for
f; waypoints and durations for trajectory terms, so the MINCO adjoint is
exercised too), and compares against central differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import costs
from .costs import NeighborTrajectories, PenaltyParams
from .esdf import Sphere, build_esdf, rasterize
from .formation import FormationSpec, similarity, similarity_gradients
from .minco import construct, propagate_gradient

TOLERANCE = {"similarity": 1e-5, "energy": 1e-4, "obstacle": 1e-4, "formation": 1e-4, "reciprocal": 1e-4,
             "feasibility": 1e-4, "uniformity": 1e-4}
CHECKS = tuple(TOLERANCE)


@dataclass
class TermResult:
    term: str
    instances: int
    max_rel_error: float
    tolerance: float
    worst_instance: int
    active: int

    @property
    def passed(self) -> bool:
        # a term that never fires checks nothing
        return self.max_rel_error < self.tolerance and self.active > 0

    def line(self) -> str:
        flag = "ok" if self.passed else "FAIL"
        return (f"{self.term:<12} n={self.instances:<4} active={self.active:<4} max_rel_err={self.max_rel_error:.3e} "
                f"tol={self.tolerance:.0e} {flag}")


@dataclass
class GradReport:
    seed: int
    results: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def text(self) -> str:
        lines = [f"gradient check, seed {self.seed}"] + [r.line() for r in self.results]
        lines.append("all checks passed" if self.ok else "gradient check FAILED")
        return "\n".join(lines)


def rel_error(analytic, numeric) -> float:
    a = np.ravel(analytic)
    b = np.ravel(numeric)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.linalg.norm(a), 1e-300))


def central_difference(fun: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(x)
    for k in range(x.size):
        step = h * max(1.0, abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        g[k] = (fun(xp) - fun(xm)) / (2.0 * step)
    return g


# ---------------------------------------------------------------------------
# random instances


def random_trajectory_problem(rng: np.random.Generator, pieces: int | None = None, speed: float = 0.6,
                              origin=(0.0, 0.0, 1.0)):
    """Random (q, T, head, tail) with roughly ``speed`` m/s travel."""
    M = int(pieces or rng.integers(1, 6))
    T = rng.uniform(0.6, 2.0, M)
    head = np.vstack([np.asarray(origin, dtype=float), rng.normal(0, 0.3, 3), rng.normal(0, 0.3, 3)])
    heading = rng.normal(0, 1, 3)
    heading[2] *= 0.2
    heading /= np.linalg.norm(heading)
    pts = [head[0]]
    for i in range(M):
        pts.append(pts[-1] + speed * T[i] * heading + rng.normal(0, 0.15, 3))
    q = np.array(pts[1:M])
    tail = np.vstack([pts[M], rng.normal(0, 0.2, 3), np.zeros(3)])
    return q.reshape(M - 1, 3), T, head, tail


def _neighbors_near(rng: np.random.Generator, q, T, head, tail, count: int, spread: float, t0: float):
    """Neighbor trajectories loosely following the given one, with their own start stamps."""
    entries = []
    for k in range(count):
        offset = rng.normal(0, spread, 3)
        stamp = t0 + rng.uniform(-0.8, 0.8)
        Tn = T * rng.uniform(0.8, 1.2, T.size)
        qn = q + offset + rng.normal(0, 0.1, q.shape)
        hn = head.copy()
        hn[0] = head[0] + offset
        tn = tail.copy()
        tn[0] = tail[0] + offset
        entries.append((k, stamp, construct(qn, Tn, hn, tn)))
    return entries


class _Instance:
    """A trajectory-term instance: J(q, T) and its analytic gradient."""

    def __init__(self, q, T, head, tail, term: Callable):
        self.q, self.T, self.head, self.tail, self.term = q, T, head, tail, term
        self.M = T.size

    def x0(self) -> np.ndarray:
        return np.concatenate([self.q.ravel(), self.T])

    def value(self, x) -> float:
        nq = 3 * (self.M - 1)
        traj = construct(x[:nq].reshape(-1, 3), x[nq:], self.head, self.tail)
        return float(self.term(traj)[0])

    def gradient(self) -> np.ndarray:
        traj = construct(self.q, self.T, self.head, self.tail)
        _, gc, gT = self.term(traj)
        gq, gTt = propagate_gradient(traj, gc, gT)
        return np.concatenate([gq.ravel(), gTt])


def _energy(rng, params):
    q, T, head, tail = random_trajectory_problem(rng)
    return _Instance(q, T, head, tail, costs.control_effort)


def _obstacle(rng, params):
    q, T, head, tail = random_trajectory_problem(rng)
    traj = construct(q, T, head, tail)
    path = np.array([traj.evaluate(t) for t in np.linspace(0.0, traj.total_time, 12)])
    # spheres straddling the path so the clearance hinge is active
    obs = [Sphere(tuple(p + rng.normal(0, 0.25, 3)), float(rng.uniform(0.2, 0.4)))
           for p in path[rng.choice(len(path), 3, replace=False)]]
    lo = path.min(axis=0) - 2.0
    size = path.max(axis=0) + 2.0 - lo
    esdf = build_esdf(rasterize(obs, lo, size, 0.1))
    return _Instance(q, T, head, tail, lambda tr: costs.obstacle_penalty(tr, esdf, params))


def _formation(rng, params):
    q, T, head, tail = random_trajectory_problem(rng)
    n = int(rng.integers(3, 6))
    t0 = float(rng.uniform(0, 5))
    entries = _neighbors_near(rng, q, T, head, tail, n - 1, 1.0, t0)
    own = int(rng.integers(0, n))
    entries = [(v if v < own else v + 1, s, tr) for v, s, tr in entries]
    desired = rng.normal(0, 1.0, (n, 3))
    spec = FormationSpec.from_positions(desired)
    nb = NeighborTrajectories.pack(entries)
    return _Instance(q, T, head, tail, lambda tr: costs.formation_penalty(tr, nb, spec, own, t0, params))


def _reciprocal(rng, params):
    q, T, head, tail = random_trajectory_problem(rng)
    t0 = float(rng.uniform(0, 5))
    nb = NeighborTrajectories.pack(_neighbors_near(rng, q, T, head, tail, 3, 0.3, t0))
    return _Instance(q, T, head, tail, lambda tr: costs.reciprocal_penalty(tr, nb, t0, params))


def _feasibility(rng, params):
    q, T, head, tail = random_trajectory_problem(rng, speed=1.2)
    return _Instance(q, T, head, tail, lambda tr: costs.feasibility_penalty(tr, params))


def _uniformity(rng, params):
    q, T, head, tail = random_trajectory_problem(rng)
    return _Instance(q, T, head, tail, lambda tr: costs.uniformity_penalty(tr, params))


TRAJECTORY_TERMS = {"energy": _energy, "obstacle": _obstacle, "formation": _formation, "reciprocal": _reciprocal,
                    "feasibility": _feasibility, "uniformity": _uniformity}


def check_similarity(rng, instances: int, inject=None) -> TermResult:
    worst, at, active = 0.0, -1, 0
    for k in range(instances):
        n = int(rng.integers(3, 9))
        desired = rng.normal(0, 1.0, (n, 3))
        spec = FormationSpec.from_positions(desired)
        cur = desired * rng.uniform(0.5, 2.0) + rng.normal(0, 0.3, (n, 3))
        _, g = similarity_gradients(cur, spec)
        if inject is not None:
            g = inject(g)
        num = central_difference(lambda x: similarity(x.reshape(n, 3), spec), cur.ravel(), 1e-6)
        active += bool(np.any(num != 0.0))
        err = rel_error(g, num)
        if err > worst:
            worst, at = err, k
    return TermResult("similarity", instances, worst, TOLERANCE["similarity"], at, active)


def check_term(term: str, rng, instances: int, params: PenaltyParams, inject=None) -> TermResult:
    make = TRAJECTORY_TERMS[term]
    worst, at, active = 0.0, -1, 0
    for k in range(instances):
        inst = make(rng, params)
        g = inst.gradient()
        if inject is not None:
            g = inject(g)
        x0 = inst.x0()
        active += inst.value(x0) > 0.0
        num = central_difference(inst.value, x0, 1e-6)
        err = rel_error(g, num)
        if err > worst:
            worst, at = err, k
    return TermResult(term, instances, worst, TOLERANCE[term], at, int(active))


def check_gradients(seed: int = 0, instances: int = 100, terms=CHECKS, params: PenaltyParams = PenaltyParams(),
                    inject: dict | None = None) -> GradReport:
    """Run the suite. ``inject`` maps a term name to a function applied to its analytic gradient
    (fault injection for testing the suite itself)."""
    inject = inject or {}
    report = GradReport(seed)
    for i, term in enumerate(terms):
        rng = np.random.default_rng([seed, i])
        if term == "similarity":
            report.results.append(check_similarity(rng, instances, inject.get(term)))
        else:
            report.results.append(check_term(term, rng, instances, params, inject.get(term)))
    return report
