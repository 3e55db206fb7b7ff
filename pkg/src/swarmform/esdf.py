"""Voxel occupancy from obstacle primitives and a Euclidean signed distance field.

Distances are measured between cell centers. The transform is the separable
lower-envelope-of-parabolas algorithm (Felzenszwalb & Huttenlocher), run once
on the occupied set and once on its complement to get the sign.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numba
import numpy as np

D_FREE_MAX = 10.0
DEFAULT_RESOLUTION = 0.1


class InvalidPrimitive(ValueError):
    pass


# ---------------------------------------------------------------------------
# obstacle primitives


@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder; ``center`` is the midpoint of its axis."""

    center: tuple
    radius: float
    height: float
    kind = "cylinder"

    def validate(self):
        if not (self.radius > 0 and self.height > 0):
            raise InvalidPrimitive(f"cylinder needs positive radius/height: {self}")

    def signed_distance(self, p: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        d = p - c
        radial = np.hypot(d[..., 0], d[..., 1]) - self.radius
        axial = np.abs(d[..., 2]) - 0.5 * self.height
        outside = np.hypot(np.maximum(radial, 0.0), np.maximum(axial, 0.0))
        inside = np.minimum(np.maximum(radial, axial), 0.0)
        return outside + inside

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        ext = np.array([self.radius, self.radius, 0.5 * self.height])
        return c - ext, c + ext

    def to_dict(self):
        return {"type": "cylinder", "center": list(map(float, self.center)),
                "radius": float(self.radius), "height": float(self.height)}


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    kind = "sphere"

    def validate(self):
        if not self.radius > 0:
            raise InvalidPrimitive(f"sphere needs positive radius: {self}")

    def signed_distance(self, p: np.ndarray) -> np.ndarray:
        return np.linalg.norm(p - np.asarray(self.center, dtype=float), axis=-1) - self.radius

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def to_dict(self):
        return {"type": "sphere", "center": list(map(float, self.center)), "radius": float(self.radius)}


@dataclass(frozen=True)
class Box:
    min: tuple
    max: tuple
    kind = "box"

    def validate(self):
        if not np.all(np.asarray(self.max, dtype=float) > np.asarray(self.min, dtype=float)):
            raise InvalidPrimitive(f"degenerate box: {self}")

    def signed_distance(self, p: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.min, dtype=float)
        hi = np.asarray(self.max, dtype=float)
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        q = np.abs(p - c) - h
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def bounds(self):
        return np.asarray(self.min, dtype=float), np.asarray(self.max, dtype=float)

    def to_dict(self):
        return {"type": "box", "min": list(map(float, self.min)), "max": list(map(float, self.max))}


Primitive = Union[Cylinder, Sphere, Box]


def primitive_from_dict(d: dict) -> Primitive:
    kind = d.get("type")
    try:
        if kind == "cylinder":
            prim = Cylinder(tuple(d["center"]), float(d["radius"]), float(d["height"]))
        elif kind == "sphere":
            prim = Sphere(tuple(d["center"]), float(d["radius"]))
        elif kind == "box":
            prim = Box(tuple(d["min"]), tuple(d["max"]))
        else:
            raise InvalidPrimitive(f"unknown primitive type {kind!r}")
    except (KeyError, TypeError) as exc:
        raise InvalidPrimitive(f"malformed primitive {d}: {exc}") from exc
    prim.validate()
    return prim


def signed_distance(obstacles, points) -> np.ndarray:
    """Exact ground-truth signed distance from ``points`` (..., 3) to the union of primitives."""
    p = np.asarray(points, dtype=float)
    out = np.full(p.shape[:-1], np.inf)
    for ob in obstacles:
        out = np.minimum(out, ob.signed_distance(p))
    return out


# ---------------------------------------------------------------------------
# occupancy grid


@dataclass(frozen=True, eq=False)
class GridMap:
    origin: np.ndarray
    resolution: float
    occupancy: np.ndarray

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.occupancy.ndim != 3 or min(self.occupancy.shape) < 1:
            raise ValueError("occupancy must be a non-empty 3-D array")

    @property
    def dims(self) -> tuple:
        return self.occupancy.shape

    @property
    def upper(self) -> np.ndarray:
        return self.origin + np.asarray(self.dims) * self.resolution

    def cell_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.dims[axis]) + 0.5) * self.resolution

    def index_of(self, p) -> np.ndarray:
        return np.floor((np.asarray(p, dtype=float) - self.origin) / self.resolution).astype(np.int64)

    def crop(self, lo, hi) -> "GridMap":
        """Sub-map covering the world box [lo, hi], snapped outward to cells and clipped."""
        i0 = np.clip(self.index_of(lo), 0, np.asarray(self.dims))
        i1 = np.clip(self.index_of(hi) + 1, 0, np.asarray(self.dims))
        i1 = np.maximum(i1, i0 + 1)
        i0 = np.minimum(i0, np.asarray(self.dims) - 1)
        occ = self.occupancy[i0[0]:i1[0], i0[1]:i1[1], i0[2]:i1[2]]
        return GridMap(self.origin + i0 * self.resolution, self.resolution, occ)


def empty_map(origin, size, resolution: float = DEFAULT_RESOLUTION) -> GridMap:
    dims = np.maximum(np.ceil(np.asarray(size, dtype=float) / resolution - 1e-9).astype(int), 1)
    return GridMap(np.asarray(origin, dtype=float), float(resolution), np.zeros(tuple(dims), dtype=bool))


def rasterize(obstacles, origin, size, resolution: float = DEFAULT_RESOLUTION, inflate: float = 0.0) -> GridMap:
    """Mark a cell occupied iff its center lies inside some primitive grown by ``inflate``."""
    grid = empty_map(origin, size, resolution)
    occ = np.zeros(grid.dims, dtype=bool)
    for ob in obstacles:
        ob.validate()
        lo, hi = ob.bounds()
        i0 = np.clip(np.floor((lo - inflate - grid.origin) / resolution).astype(int), 0, grid.dims)
        i1 = np.clip(np.ceil((hi + inflate - grid.origin) / resolution).astype(int) + 1, 0, grid.dims)
        if np.any(i1 <= i0):
            continue
        axes = [grid.origin[a] + (np.arange(i0[a], i1[a]) + 0.5) * resolution for a in range(3)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        inside = ob.signed_distance(pts) <= inflate
        occ[i0[0]:i1[0], i0[1]:i1[1], i0[2]:i1[2]] |= inside
    return GridMap(grid.origin, grid.resolution, occ)


# ---------------------------------------------------------------------------
# distance transform


@numba.njit(cache=True)
def _edt_line(f, out, v, z):
    """1-D squared distance transform of sampled function f (inf = no feature)."""
    n = f.shape[0]
    k = -1
    for q in range(n):
        if f[q] == np.inf:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        while True:
            p = v[k]
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p)
            if s <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        k += 1
        v[k] = q
        z[k] = -np.inf if k == 0 else s
        z[k + 1] = np.inf
    if k < 0:
        for q in range(n):
            out[q] = np.inf
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d = q - v[k]
        out[q] = d * d + f[v[k]]


@numba.njit(cache=True)
def squared_edt(feature):
    """Squared Euclidean distance (in cells) from every cell to the nearest True cell."""
    nx, ny, nz = feature.shape
    g = np.empty((nx, ny, nz))
    # first axis: binary input, so a forward/backward scan is already exact
    for i in range(nx):
        for j in range(ny):
            last = -1
            for k in range(nz):
                if feature[i, j, k]:
                    last = k
                g[i, j, k] = np.inf if last < 0 else float(k - last)
            last = -1
            for k in range(nz - 1, -1, -1):
                if feature[i, j, k]:
                    last = k
                if last >= 0 and last - k < g[i, j, k]:
                    g[i, j, k] = float(last - k)
                g[i, j, k] = g[i, j, k] * g[i, j, k]
    nmax = max(nx, max(ny, nz))
    f = np.empty(nmax)
    out = np.empty(nmax)
    v = np.empty(nmax, dtype=np.int64)
    z = np.empty(nmax + 1)
    for i in range(nx):
        for k in range(nz):
            empty = True
            for j in range(ny):
                f[j] = g[i, j, k]
                if f[j] != np.inf:
                    empty = False
            if empty:
                continue
            _edt_line(f[:ny], out[:ny], v, z)
            for j in range(ny):
                g[i, j, k] = out[j]
    for j in range(ny):
        for k in range(nz):
            empty = True
            for i in range(nx):
                f[i] = g[i, j, k]
                if f[i] != np.inf:
                    empty = False
            if empty:
                continue
            _edt_line(f[:nx], out[:nx], v, z)
            for i in range(nx):
                g[i, j, k] = out[i]
    return g


@numba.njit(cache=True)
def _signed_field(occ, resolution, d_max):
    pos = squared_edt(occ)
    neg = squared_edt(~occ)
    nx, ny, nz = occ.shape
    out = np.empty((nx, ny, nz))
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if occ[i, j, k]:
                    d = -np.sqrt(neg[i, j, k]) * resolution
                    out[i, j, k] = max(d, -d_max)
                else:
                    d = np.sqrt(pos[i, j, k]) * resolution
                    out[i, j, k] = min(d, d_max)
    return out


@dataclass(frozen=True, eq=False)
class Esdf:
    origin: np.ndarray
    resolution: float
    distance: np.ndarray
    d_free_max: float = D_FREE_MAX

    def query(self, p) -> tuple[float, np.ndarray]:
        return query(self, p)


def build_esdf(grid: GridMap, d_free_max: float = D_FREE_MAX) -> Esdf:
    dist = _signed_field(np.ascontiguousarray(grid.occupancy), float(grid.resolution), float(d_free_max))
    dist.setflags(write=False)
    return Esdf(np.asarray(grid.origin, dtype=float), float(grid.resolution), dist, float(d_free_max))


@numba.njit(cache=True)
def interp(dist, origin, resolution, d_max, p, grad):
    """Trilinear distance at p and the exact gradient of the interpolant (written to grad)."""
    nx, ny, nz = dist.shape
    u0 = (p[0] - origin[0]) / resolution
    u1 = (p[1] - origin[1]) / resolution
    u2 = (p[2] - origin[2]) / resolution
    if not (0.0 <= u0 <= nx and 0.0 <= u1 <= ny and 0.0 <= u2 <= nz):
        grad[0] = 0.0
        grad[1] = 0.0
        grad[2] = 0.0
        return d_max
    # cell-center coordinates, clamped so the half cell along each face reuses the edge value
    x = min(max(u0 - 0.5, 0.0), nx - 1.0)
    y = min(max(u1 - 0.5, 0.0), ny - 1.0)
    z = min(max(u2 - 0.5, 0.0), nz - 1.0)
    i = min(int(x), nx - 2) if nx > 1 else 0
    j = min(int(y), ny - 2) if ny > 1 else 0
    k = min(int(z), nz - 2) if nz > 1 else 0
    i1 = min(i + 1, nx - 1)
    j1 = min(j + 1, ny - 1)
    k1 = min(k + 1, nz - 1)
    fx = x - i
    fy = y - j
    fz = z - k
    # zero out derivative along axes where the coordinate was clamped
    sx = 1.0 if (0.5 < u0 < nx - 0.5) else 0.0
    sy = 1.0 if (0.5 < u1 < ny - 0.5) else 0.0
    sz = 1.0 if (0.5 < u2 < nz - 0.5) else 0.0
    c000 = dist[i, j, k]
    c100 = dist[i1, j, k]
    c010 = dist[i, j1, k]
    c110 = dist[i1, j1, k]
    c001 = dist[i, j, k1]
    c101 = dist[i1, j, k1]
    c011 = dist[i, j1, k1]
    c111 = dist[i1, j1, k1]
    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    d = c0 * (1 - fz) + c1 * fz
    gx = ((1 - fz) * ((1 - fy) * (c100 - c000) + fy * (c110 - c010))
          + fz * ((1 - fy) * (c101 - c001) + fy * (c111 - c011)))
    gy = (1 - fz) * (c10 - c00) + fz * (c11 - c01)
    gz = c1 - c0
    grad[0] = sx * gx / resolution
    grad[1] = sy * gy / resolution
    grad[2] = sz * gz / resolution
    return d


def query(esdf: Esdf, p) -> tuple[float, np.ndarray]:
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("query point must be finite")
    grad = np.empty(3)
    d = interp(esdf.distance, esdf.origin, esdf.resolution, esdf.d_free_max, p, grad)
    return float(d), grad


def dump_grid(grid: GridMap) -> str:
    """Debug dump: a header line then the row-major (x slowest) occupancy stream."""
    nx, ny, nz = grid.dims
    head = f"{nx} {ny} {nz} {grid.resolution!r} {' '.join(repr(float(v)) for v in grid.origin)}"
    return head + "\n" + "".join("1" if v else "0" for v in grid.occupancy.ravel(order="C")) + "\n"


def load_grid(text: str) -> GridMap:
    head, body = text.strip().split("\n", 1)
    parts = head.split()
    nx, ny, nz = map(int, parts[:3])
    res = float(parts[3])
    origin = np.array([float(v) for v in parts[4:7]])
    occ = np.frombuffer(body.strip().encode(), dtype=np.uint8) == ord("1")
    return GridMap(origin, res, occ.reshape(nx, ny, nz).copy())
