"""Formation graph over agent positions and the Laplacian similarity metric.

Edges of the complete graph are weighted by squared inter-agent distance, so
the symmetric normalized Laplacian is invariant to translation, rotation and
uniform scaling of the swarm. The similarity between two formations is the
squared Frobenius distance between their normalized Laplacians.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

EPS_DEG = 1e-12


class DegenerateDegree(ValueError):
    """A vertex has (numerically) zero degree: it coincides with every other agent."""


class NonFinite(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


def _as_positions(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 3:
        raise DimensionMismatch(f"expected (N, 3) positions, got shape {p.shape}")
    if p.shape[0] < 2:
        raise DimensionMismatch("a formation needs at least two agents")
    if not np.all(np.isfinite(p)):
        raise NonFinite("agent positions must be finite")
    return p


@dataclass(frozen=True)
class FormationGraph:
    weights: np.ndarray
    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray
    normalized_laplacian: np.ndarray


def build_graph(positions) -> FormationGraph:
    p = _as_positions(positions)
    diff = p[:, None, :] - p[None, :, :]
    w = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(w, 0.0)
    deg = w.sum(axis=1)
    if np.any(deg < EPS_DEG):
        bad = int(np.argmin(deg))
        raise DegenerateDegree(f"agent {bad} coincides with all other agents (degree {deg[bad]:.3g})")
    D = np.diag(deg)
    inv_sqrt = 1.0 / np.sqrt(deg)
    lhat = np.eye(len(p)) - inv_sqrt[:, None] * w * inv_sqrt[None, :]
    return FormationGraph(
        weights=w,
        adjacency=w.copy(),
        degree=D,
        laplacian=D - w,
        normalized_laplacian=lhat,
    )


@dataclass(frozen=True)
class FormationSpec:
    desired_positions: np.ndarray
    desired_laplacian: np.ndarray

    @classmethod
    def from_positions(cls, positions) -> "FormationSpec":
        p = _as_positions(positions)
        lhat = build_graph(p).normalized_laplacian
        p.setflags(write=False)
        lhat.setflags(write=False)
        return cls(p, lhat)

    @property
    def n(self) -> int:
        return self.desired_positions.shape[0]

    def offsets(self) -> np.ndarray:
        """Desired positions relative to their centroid."""
        return self.desired_positions - self.desired_positions.mean(axis=0)


@numba.njit(cache=True)
def similarity_kernel(P, Ldes, grad):
    """Similarity value and its gradient w.r.t. every agent position.

    ``grad`` (N, 3) is overwritten. Degrees are floored at EPS_DEG so the
    kernel stays finite inside an optimizer; the public API rejects those
    inputs before getting here.
    """
    n = P.shape[0]
    W = np.zeros((n, n))
    deg = np.zeros(n)
    for a in range(n):
        for b in range(a + 1, n):
            dx = P[a, 0] - P[b, 0]
            dy = P[a, 1] - P[b, 1]
            dz = P[a, 2] - P[b, 2]
            w = dx * dx + dy * dy + dz * dz
            W[a, b] = w
            W[b, a] = w
            deg[a] += w
            deg[b] += w
    for a in range(n):
        if deg[a] < EPS_DEG:
            deg[a] = EPS_DEG
    isq = np.empty(n)
    for a in range(n):
        isq[a] = 1.0 / np.sqrt(deg[a])

    # S = D^-1/2 A D^-1/2 ; off-diagonal Lhat = -S ; E = Lhat - Ldes
    S = np.zeros((n, n))
    E = np.zeros((n, n))
    f = 0.0
    for a in range(n):
        e = 1.0 - Ldes[a, a]
        E[a, a] = e
        f += e * e
        for b in range(n):
            if a != b:
                s = W[a, b] * isq[a] * isq[b]
                S[a, b] = s
                e = -s - Ldes[a, b]
                E[a, b] = e
                f += e * e

    # df/dS_ab = -2 E_ab ; h_a = sum_b (df/dS_ab) S_ab
    h = np.zeros(n)
    for a in range(n):
        acc = 0.0
        for b in range(n):
            if a != b:
                acc += -2.0 * E[a, b] * S[a, b]
        h[a] = acc

    for a in range(n):
        grad[a, 0] = 0.0
        grad[a, 1] = 0.0
        grad[a, 2] = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            # w_ab enters A_ab, A_ba, D_aa and D_bb
            dfdw = -4.0 * E[a, b] * isq[a] * isq[b] - h[a] / deg[a] - h[b] / deg[b]
            for k in range(3):
                g = 2.0 * dfdw * (P[a, k] - P[b, k])
                grad[a, k] += g
                grad[b, k] -= g
    return f


def _check_pair(current, spec: FormationSpec) -> np.ndarray:
    p = _as_positions(current)
    if p.shape[0] != spec.n:
        raise DimensionMismatch(f"formation has {spec.n} vertices, got {p.shape[0]} positions")
    diff = p[:, None, :] - p[None, :, :]
    deg = np.einsum("ijk,ijk->i", diff, diff)
    if np.any(deg < EPS_DEG):
        raise DegenerateDegree(f"agent {int(np.argmin(deg))} coincides with all other agents")
    return p


def similarity(current, spec: FormationSpec) -> float:
    p = _check_pair(current, spec)
    return float(similarity_kernel(p, spec.desired_laplacian, np.empty_like(p)))


def similarity_gradients(current, spec: FormationSpec) -> tuple[float, np.ndarray]:
    """Return ``f`` and the (N, 3) array of df/dp_i for all agents."""
    p = _check_pair(current, spec)
    grad = np.empty_like(p)
    f = similarity_kernel(p, spec.desired_laplacian, grad)
    return float(f), grad


def similarity_gradient(current, spec: FormationSpec, i: int) -> np.ndarray:
    _, grad = similarity_gradients(current, spec)
    return grad[i]


def regular_polygon(n: int, radius: float, center=(0.0, 0.0, 0.0), with_center: bool = False) -> np.ndarray:
    """Planar regular polygon in the xy-plane, optionally with a central agent first."""
    ang = 2.0 * np.pi * np.arange(n) / n
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang), np.zeros(n)], axis=1)
    pts = np.vstack([np.zeros((1, 3)), ring]) if with_center else ring
    return pts + np.asarray(center, dtype=float)


def hexagon(radius: float = 1.2, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Seven-agent regular hexagon: one center agent plus six on the ring."""
    return regular_polygon(6, radius, center, with_center=True)


def tetrahedron(edge: float = 2.0, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    v *= edge / (2.0 * np.sqrt(2.0))
    return v + np.asarray(center, dtype=float)
