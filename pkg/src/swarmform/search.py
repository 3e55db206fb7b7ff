"""Grid path search used to seed the optimizer when a straight guess is blocked."""
from __future__ import annotations

import heapq
import math

import numba
import numpy as np

from .esdf import Esdf, interp


@numba.njit(cache=True)
def segment_clear(dist, origin, res, dmax, a, b, clearance):
    """True if every sample along a->b (half-cell spacing) has ESDF distance > ``clearance``."""
    n = int(math.ceil(math.sqrt(((b - a) ** 2).sum()) / (0.5 * res))) + 1
    grad = np.empty(3)
    p = np.empty(3)
    for k in range(n + 1):
        s = k / n
        for d in range(3):
            p[d] = a[d] + s * (b[d] - a[d])
        if interp(dist, origin, res, dmax, p, grad) <= clearance:
            return False
    return True


@numba.njit(cache=True)
def astar(free, start, goal):
    """26-connected A* over boolean ``free`` cells; returns the (L, 3) cell path or an empty array."""
    nx, ny, nz = free.shape
    total = nx * ny * nz
    s = (start[0] * ny + start[1]) * nz + start[2]
    t = (goal[0] * ny + goal[1]) * nz + goal[2]
    g = np.full(total, np.inf)
    parent = np.full(total, -1, dtype=np.int64)
    closed = np.zeros(total, dtype=np.bool_)
    g[s] = 0.0
    heap = [(0.0, 0, s)]
    counter = 1
    found = False
    while len(heap) > 0:
        _, _, u = heapq.heappop(heap)
        if closed[u]:
            continue
        if u == t:
            found = True
            break
        closed[u] = True
        ui = u // (ny * nz)
        uj = (u // nz) % ny
        uk = u % nz
        for di in range(-1, 2):
            i = ui + di
            if i < 0 or i >= nx:
                continue
            for dj in range(-1, 2):
                j = uj + dj
                if j < 0 or j >= ny:
                    continue
                for dk in range(-1, 2):
                    k = uk + dk
                    if k < 0 or k >= nz or (di == 0 and dj == 0 and dk == 0):
                        continue
                    if not free[i, j, k]:
                        continue
                    v = (i * ny + j) * nz + k
                    if closed[v]:
                        continue
                    cand = g[u] + math.sqrt(di * di + dj * dj + dk * dk)
                    if cand < g[v]:
                        g[v] = cand
                        parent[v] = u
                        h = math.sqrt((i - goal[0]) ** 2 + (j - goal[1]) ** 2 + (k - goal[2]) ** 2)
                        heapq.heappush(heap, (cand + h, counter, v))
                        counter += 1
    if not found:
        return np.zeros((0, 3), dtype=np.int64)
    length = 0
    v = t
    while v != -1:
        length += 1
        v = parent[v]
    out = np.empty((length, 3), dtype=np.int64)
    v = t
    for m in range(length - 1, -1, -1):
        out[m, 0] = v // (ny * nz)
        out[m, 1] = (v // nz) % ny
        out[m, 2] = v % nz
        v = parent[v]
    return out


def _cell(esdf: Esdf, p) -> np.ndarray:
    idx = np.floor((np.asarray(p) - esdf.origin) / esdf.resolution).astype(np.int64)
    return np.clip(idx, 0, np.array(esdf.distance.shape) - 1)


def push_free(esdf: Esdf, p, margin: float, iterations: int = 8) -> np.ndarray:
    """Move ``p`` along the distance gradient until it is at least ``margin`` from known obstacles."""
    p = np.array(p, dtype=float)
    for _ in range(iterations):
        d, g = esdf.query(p)
        n = np.linalg.norm(g)
        if d >= margin or n == 0.0:
            break
        p = p + (margin - d + 0.5 * esdf.resolution) * g / n
    return p


def _nearest_free(free: np.ndarray, cell: np.ndarray, radius: int = 6) -> np.ndarray | None:
    if free[tuple(cell)]:
        return cell
    lo = np.maximum(cell - radius, 0)
    hi = np.minimum(cell + radius + 1, np.array(free.shape))
    sub = np.argwhere(free[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]) + lo
    if sub.shape[0] == 0:
        return None
    return sub[np.argmin(np.sum((sub - cell) ** 2, axis=1))]


def find_path(esdf: Esdf, a, b, clearance: float) -> np.ndarray | None:
    """Collision-free polyline a -> b through cells with distance > ``clearance``, or None."""
    free = esdf.distance > clearance
    sa = _nearest_free(free, _cell(esdf, a))
    sb = _nearest_free(free, _cell(esdf, b))
    if sa is None or sb is None:
        return None
    cells = astar(free, sa, sb)
    if cells.shape[0] == 0:
        return None
    pts = esdf.origin + (cells + 0.5) * esdf.resolution
    return np.vstack([a, _shortcut(esdf, pts, clearance), b])


def _shortcut(esdf: Esdf, pts: np.ndarray, clearance: float) -> np.ndarray:
    """Greedy line-of-sight pruning of a grid path."""
    if pts.shape[0] <= 2:
        return pts
    dist, origin, res, dmax = esdf.distance, esdf.origin, esdf.resolution, esdf.d_free_max
    out = [pts[0]]
    i = 0
    while i < pts.shape[0] - 1:
        j = pts.shape[0] - 1
        while j > i + 1 and not segment_clear(dist, origin, res, dmax, pts[i], pts[j], clearance):
            j -= 1
        out.append(pts[j])
        i = j
    return np.asarray(out)


def repair_polyline(esdf: Esdf, poly: np.ndarray, clearance: float) -> np.ndarray:
    """Replace blocked segments of ``poly`` with searched detours.

    A segment with no detour means there is no known way through, so the
    result stops short of the obstacle on that segment and drops the rest.
    """
    dist, origin, res, dmax = esdf.distance, esdf.origin, esdf.resolution, esdf.d_free_max
    out = [poly[0]]
    for a, b in zip(poly[:-1], poly[1:]):
        if segment_clear(dist, origin, res, dmax, a, b, 0.0):
            out.append(b)
            continue
        path = find_path(esdf, a, b, clearance)
        if path is None:
            cut = clear_prefix(esdf, np.vstack([a, b]), clearance)
            out.extend(cut[1:])
            break
        out.extend(path[1:])
    return np.asarray(out)


def clear_prefix(esdf: Esdf, poly: np.ndarray, clearance: float) -> np.ndarray:
    """Cut ``poly`` short of its first blocked point, backing off to ``clearance`` from the obstacle."""
    step = 0.5 * esdf.resolution
    samples, owners = [], []
    for k, (a, b) in enumerate(zip(poly[:-1], poly[1:])):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / step)))
        for s in np.arange(n) / n:
            samples.append(a + s * (b - a))
            owners.append(k)
    samples.append(poly[-1])
    owners.append(len(poly) - 2)
    d = np.array([esdf.query(x)[0] for x in samples])
    blocked = np.flatnonzero(d <= 0.0)
    if blocked.size == 0:
        return poly
    first = int(blocked[0])
    safe = np.flatnonzero(d[:first] >= clearance)
    end = int(safe[-1]) if safe.size else 0
    return np.vstack([poly[: owners[end] + 1], samples[end]])
