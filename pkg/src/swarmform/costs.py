"""Objective terms over a piecewise-quintic trajectory and their (c, T) gradients.

Seven terms: control effort, total time, obstacle clearance, formation
similarity, reciprocal avoidance, dynamic feasibility and sample uniformity.
Penalty terms are time integrals approximated by trapezoidal quadrature over
constraint points at t = j T_i / κ_i, with the C² hinge max(ψ, 0)³.

Every kernel accumulates ``lam * dJ/dc`` into ``gc`` and ``lam * dJ/dT`` into
``gT`` and returns the unweighted term value.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numba
import numpy as np

from .esdf import Esdf, interp
from .formation import DimensionMismatch, FormationSpec, similarity_kernel
from .minco import Trajectory, eval_piece

TERMS = ("energy", "time", "obstacle", "formation", "reciprocal", "feasibility", "uniformity")


@dataclass(frozen=True)
class CostWeights:
    energy: float = 1.0
    time: float = 20.0
    obstacle: float = 1.0e8
    formation: float = 3.0e6
    reciprocal: float = 1.0e6
    feasibility: float = 1.0e4
    uniformity: float = 1.0e3

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"weight {f.name} must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, t) for t in TERMS], dtype=float)

    def replace(self, **kw) -> "CostWeights":
        d = {t: getattr(self, t) for t in TERMS}
        d.update(kw)
        return CostWeights(**d)


@dataclass(frozen=True)
class PenaltyParams:
    d_thr: float = 0.25
    clearance: float = 0.6
    v_max: float = 0.5
    a_max: float = 6.0
    j_max: float = 30.0
    kappa: int = 8

    def __post_init__(self):
        if min(self.d_thr, self.clearance, self.v_max, self.a_max, self.j_max) <= 0:
            raise ValueError("thresholds and limits must be positive")
        if self.kappa < 2:
            raise ValueError("kappa must be at least 2")

    def as_array(self) -> np.ndarray:
        return np.array([self.d_thr, self.clearance, self.v_max, self.a_max, self.j_max], dtype=float)


@numba.njit(cache=True)
def hinge(psi):
    """max(psi, 0)^3 and its derivative."""
    if psi <= 0.0:
        return 0.0, 0.0
    return psi * psi * psi, 3.0 * psi * psi


@numba.njit(cache=True)
def trap_weight(j, kappa):
    return 0.5 if (j == 0 or j == kappa) else 1.0


@numba.njit(cache=True)
def _add_basis_outer(gc_i, t, order, scale, vec):
    """gc_i += scale * beta^(order)(t) vec^T."""
    tp = 1.0
    for k in range(order, 6):
        coef = 1.0
        for m in range(order):
            coef *= k - m
        w = scale * coef * tp
        for d in range(3):
            gc_i[k, d] += w * vec[d]
        tp *= t


# ---------------------------------------------------------------------------
# control effort and time


@numba.njit(cache=True)
def energy_kernel(coeffs, T, lam, gc, gT):
    J = 0.0
    jerk = np.empty(3)
    for i in range(T.shape[0]):
        t1 = T[i]
        t2 = t1 * t1
        t3 = t2 * t1
        t4 = t3 * t1
        t5 = t4 * t1
        # Gram matrix of the jerk basis [6, 24t, 60t^2] over [0, T]
        q33 = 36.0 * t1
        q34 = 72.0 * t2
        q35 = 120.0 * t3
        q44 = 192.0 * t3
        q45 = 360.0 * t4
        q55 = 720.0 * t5
        c = coeffs[i]
        for d in range(3):
            a, b, e = c[3, d], c[4, d], c[5, d]
            qa = q33 * a + q34 * b + q35 * e
            qb = q34 * a + q44 * b + q45 * e
            qe = q35 * a + q45 * b + q55 * e
            J += a * qa + b * qb + e * qe
            gc[i, 3, d] += lam * 2.0 * qa
            gc[i, 4, d] += lam * 2.0 * qb
            gc[i, 5, d] += lam * 2.0 * qe
        eval_piece(c, t1, 3, jerk)
        gT[i] += lam * (jerk[0] * jerk[0] + jerk[1] * jerk[1] + jerk[2] * jerk[2])
    return J


@numba.njit(cache=True)
def time_kernel(T, lam, gT):
    J = 0.0
    for i in range(T.shape[0]):
        J += T[i]
        gT[i] += lam
    return J


# ---------------------------------------------------------------------------
# obstacle clearance


@numba.njit(cache=True)
def obstacle_kernel(coeffs, T, kappa, dist, origin, res, dmax, d_thr, lam, gc, gT):
    J = 0.0
    pos = np.empty(3)
    vel = np.empty(3)
    grad = np.empty(3)
    for i in range(T.shape[0]):
        kap = kappa[i]
        step = T[i] / kap
        for j in range(kap + 1):
            t = j * step
            eval_piece(coeffs[i], t, 0, pos)
            d = interp(dist, origin, res, dmax, pos, grad)
            h, dh = hinge(d_thr - d)
            if h == 0.0 and dh == 0.0:
                continue
            w = trap_weight(j, kap)
            J += w * step * h
            if lam == 0.0:
                continue
            eval_piece(coeffs[i], t, 1, vel)
            s = lam * w * step * dh
            # dpsi/dp = -grad d
            for d_ in range(3):
                grad[d_] = -grad[d_]
            _add_basis_outer(gc[i], t, 0, s, grad)
            gT[i] += lam * w * h / kap + s * (grad[0] * vel[0] + grad[1] * vel[1] + grad[2] * vel[2]) * j / kap
    return J


# ---------------------------------------------------------------------------
# dynamic feasibility: hinge on squared norms of velocity, acceleration, jerk


@numba.njit(cache=True)
def feasibility_kernel(coeffs, T, kappa, v_max, a_max, j_max, lam, gc, gT):
    J = 0.0
    der = np.empty((5, 3))
    row = np.empty(3)
    for i in range(T.shape[0]):
        kap = kappa[i]
        step = T[i] / kap
        for j in range(kap + 1):
            t = j * step
            w = trap_weight(j, kap)
            for order in range(1, 4):
                eval_piece(coeffs[i], t, order, row)
                der[order, 0] = row[0]
                der[order, 1] = row[1]
                der[order, 2] = row[2]
            for order in range(1, 4):
                if order == 1:
                    lim = v_max
                elif order == 2:
                    lim = a_max
                else:
                    lim = j_max
                sq = der[order, 0] ** 2 + der[order, 1] ** 2 + der[order, 2] ** 2
                h, dh = hinge(sq - lim * lim)
                if dh == 0.0:
                    continue
                J += w * step * h
                if lam == 0.0:
                    continue
                if order == 3:
                    eval_piece(coeffs[i], t, 4, row)
                else:
                    row[0] = der[order + 1, 0]
                    row[1] = der[order + 1, 1]
                    row[2] = der[order + 1, 2]
                s = lam * w * step * dh
                for d in range(3):
                    der[0, d] = 2.0 * der[order, d]
                _add_basis_outer(gc[i], t, order, s, der[0])
                dpsi_dt = der[0, 0] * row[0] + der[0, 1] * row[1] + der[0, 2] * row[2]
                gT[i] += lam * w * h / kap + s * dpsi_dt * j / kap
    return J


# ---------------------------------------------------------------------------
# sample uniformity: squared differences of consecutive squared gaps


@numba.njit(cache=True)
def uniformity_kernel(coeffs, T, kappa, lam, gc, gT):
    M = T.shape[0]
    n = 1
    for i in range(M):
        n += kappa[i]
    P = np.empty((n, 3))
    V = np.empty((n, 3))
    piece = np.empty(n, dtype=np.int64)
    frac = np.empty(n)
    tt = np.empty(n)
    row = np.empty(3)
    idx = 0
    for i in range(M):
        kap = kappa[i]
        last = kap + 1 if i == M - 1 else kap
        for j in range(last):
            t = j * T[i] / kap
            eval_piece(coeffs[i], t, 0, row)
            P[idx, 0] = row[0]
            P[idx, 1] = row[1]
            P[idx, 2] = row[2]
            eval_piece(coeffs[i], t, 1, row)
            V[idx, 0] = row[0]
            V[idx, 1] = row[1]
            V[idx, 2] = row[2]
            piece[idx] = i
            frac[idx] = j / kap
            tt[idx] = t
            idx += 1
    gaps = np.empty(n - 1)
    for k in range(n - 1):
        gaps[k] = ((P[k + 1, 0] - P[k, 0]) ** 2 + (P[k + 1, 1] - P[k, 1]) ** 2
                   + (P[k + 1, 2] - P[k, 2]) ** 2)
    J = 0.0
    dg = np.zeros(n - 1)
    for k in range(n - 2):
        r = gaps[k + 1] - gaps[k]
        J += r * r
        dg[k + 1] += 2.0 * r
        dg[k] -= 2.0 * r
    if lam == 0.0:
        return J
    dP = np.zeros((n, 3))
    for k in range(n - 1):
        for d in range(3):
            g = 2.0 * dg[k] * (P[k + 1, d] - P[k, d])
            dP[k + 1, d] += g
            dP[k, d] -= g
    for k in range(n):
        i = piece[k]
        for d in range(3):
            row[d] = lam * dP[k, d]
        _add_basis_outer(gc[i], tt[k], 0, 1.0, row)
        gT[i] += (row[0] * V[k, 0] + row[1] * V[k, 1] + row[2] * V[k, 2]) * frac[k]
    return J


# ---------------------------------------------------------------------------
# swarm terms


@numba.njit(cache=True)
def neighbor_state(nb_c, nb_T, nb_M, nb_t0, k, tg, pos, vel):
    """Neighbor k at global time tg; holds its first position before its stamp and its last one after."""
    t = tg - nb_t0[k]
    m = nb_M[k]
    if t < 0.0:
        eval_piece(nb_c[k, 0], 0.0, 0, pos)
        vel[0] = 0.0
        vel[1] = 0.0
        vel[2] = 0.0
        return
    acc = 0.0
    for i in range(m):
        end = acc + nb_T[k, i]
        if t < end:
            eval_piece(nb_c[k, i], t - acc, 0, pos)
            eval_piece(nb_c[k, i], t - acc, 1, vel)
            return
        acc = end
    eval_piece(nb_c[k, m - 1], nb_T[k, m - 1], 0, pos)
    vel[0] = 0.0
    vel[1] = 0.0
    vel[2] = 0.0


@numba.njit(cache=True)
def formation_kernel(coeffs, T, kappa, t0, nb_c, nb_T, nb_M, nb_t0, nb_vertex, own_vertex,
                     Ldes, lam, gc, gT):
    M = T.shape[0]
    K = nb_M.shape[0]
    N = K + 1
    P = np.empty((N, 3))
    Vn = np.zeros((N, 3))
    G = np.empty((N, 3))
    pos = np.empty(3)
    vel = np.empty(3)
    own_v = np.empty(3)
    J = 0.0
    start = t0
    for i in range(M):
        kap = kappa[i]
        step = T[i] / kap
        for j in range(kap + 1):
            t = j * step
            eval_piece(coeffs[i], t, 0, pos)
            P[own_vertex, 0] = pos[0]
            P[own_vertex, 1] = pos[1]
            P[own_vertex, 2] = pos[2]
            for k in range(K):
                neighbor_state(nb_c, nb_T, nb_M, nb_t0, k, start + t, pos, vel)
                v = nb_vertex[k]
                for d in range(3):
                    P[v, d] = pos[d]
                    Vn[v, d] = vel[d]
            f = similarity_kernel(P, Ldes, G)
            h, dh = hinge(f)
            w = trap_weight(j, kap)
            J += w * step * h
            if lam == 0.0 or dh == 0.0:
                continue
            s = lam * w * step * dh
            eval_piece(coeffs[i], t, 1, own_v)
            for d in range(3):
                pos[d] = G[own_vertex, d]
            _add_basis_outer(gc[i], t, 0, s, pos)
            dpsi_dt = pos[0] * own_v[0] + pos[1] * own_v[1] + pos[2] * own_v[2]
            dpsi_dtau = 0.0
            for k in range(K):
                v = nb_vertex[k]
                dpsi_dtau += G[v, 0] * Vn[v, 0] + G[v, 1] * Vn[v, 1] + G[v, 2] * Vn[v, 2]
            gT[i] += lam * w * h / kap + s * (dpsi_dt + dpsi_dtau) * j / kap
            # global stamp tau = t0 + T_1 + ... + T_{i-1} + j T_i / kappa_i
            for l in range(i):
                gT[l] += s * dpsi_dtau
        start += T[i]
    return J


@numba.njit(cache=True)
def reciprocal_kernel(coeffs, T, kappa, t0, nb_c, nb_T, nb_M, nb_t0, clearance, lam, gc, gT):
    M = T.shape[0]
    K = nb_M.shape[0]
    pos = np.empty(3)
    vel = np.empty(3)
    npos = np.empty(3)
    nvel = np.empty(3)
    diff = np.empty(3)
    J = 0.0
    start = t0
    r2 = clearance * clearance
    for i in range(M):
        kap = kappa[i]
        step = T[i] / kap
        for j in range(kap + 1):
            t = j * step
            eval_piece(coeffs[i], t, 0, pos)
            w = trap_weight(j, kap)
            have_vel = False
            for k in range(K):
                neighbor_state(nb_c, nb_T, nb_M, nb_t0, k, start + t, npos, nvel)
                for d in range(3):
                    diff[d] = pos[d] - npos[d]
                h, dh = hinge(r2 - (diff[0] ** 2 + diff[1] ** 2 + diff[2] ** 2))
                if dh == 0.0:
                    continue
                J += w * step * h
                if lam == 0.0:
                    continue
                if not have_vel:
                    eval_piece(coeffs[i], t, 1, vel)
                    have_vel = True
                s = lam * w * step * dh
                for d in range(3):
                    diff[d] = -2.0 * diff[d]
                _add_basis_outer(gc[i], t, 0, s, diff)
                dpsi_dt = diff[0] * vel[0] + diff[1] * vel[1] + diff[2] * vel[2]
                dpsi_dtau = -(diff[0] * nvel[0] + diff[1] * nvel[1] + diff[2] * nvel[2])
                gT[i] += lam * w * h / kap + s * (dpsi_dt + dpsi_dtau) * j / kap
                for l in range(i):
                    gT[l] += s * dpsi_dtau
        start += T[i]
    return J


# ---------------------------------------------------------------------------
# fused evaluation


@numba.njit(cache=True)
def total_kernel(coeffs, T, kappa, t0, dist, origin, res, dmax, nb_c, nb_T, nb_M, nb_t0,
                 nb_vertex, own_vertex, Ldes, weights, params, gc, gT, terms):
    """All seven terms; returns the weighted total. ``terms`` receives unweighted values."""
    for i in range(T.shape[0]):
        gT[i] = 0.0
        for k in range(6):
            for d in range(3):
                gc[i, k, d] = 0.0
    terms[0] = energy_kernel(coeffs, T, weights[0], gc, gT)
    terms[1] = time_kernel(T, weights[1], gT)
    terms[2] = 0.0
    if weights[2] > 0.0:
        terms[2] = obstacle_kernel(coeffs, T, kappa, dist, origin, res, dmax, params[0], weights[2], gc, gT)
    terms[3] = 0.0
    if weights[3] > 0.0 and nb_M.shape[0] > 0:
        terms[3] = formation_kernel(coeffs, T, kappa, t0, nb_c, nb_T, nb_M, nb_t0, nb_vertex,
                                    own_vertex, Ldes, weights[3], gc, gT)
    terms[4] = 0.0
    if weights[4] > 0.0 and nb_M.shape[0] > 0:
        terms[4] = reciprocal_kernel(coeffs, T, kappa, t0, nb_c, nb_T, nb_M, nb_t0, params[1],
                                     weights[4], gc, gT)
    terms[5] = 0.0
    if weights[5] > 0.0:
        terms[5] = feasibility_kernel(coeffs, T, kappa, params[2], params[3], params[4], weights[5], gc, gT)
    terms[6] = 0.0
    if weights[6] > 0.0:
        terms[6] = uniformity_kernel(coeffs, T, kappa, weights[6], gc, gT)
    total = 0.0
    for k in range(7):
        total += weights[k] * terms[k]
    return total


# ---------------------------------------------------------------------------
# Python surface


@dataclass(frozen=True, eq=False)
class NeighborTrajectories:
    """Other agents' trajectories packed for the kernels.

    ``vertex[k]`` is neighbor k's formation vertex; ``t0[k]`` its global start stamp.
    """

    coeffs: np.ndarray
    durations: np.ndarray
    pieces: np.ndarray
    t0: np.ndarray
    vertex: np.ndarray

    @classmethod
    def pack(cls, entries) -> "NeighborTrajectories":
        """``entries``: iterable of (vertex, stamp, Trajectory)."""
        entries = sorted(entries, key=lambda e: e[0])
        K = len(entries)
        mmax = max((e[2].pieces for e in entries), default=1)
        c = np.zeros((K, mmax, 6, 3))
        T = np.zeros((K, mmax))
        m = np.zeros(K, dtype=np.int64)
        t0 = np.zeros(K)
        vx = np.zeros(K, dtype=np.int64)
        for k, (vertex, stamp, traj) in enumerate(entries):
            c[k, : traj.pieces] = traj.coeffs
            T[k, : traj.pieces] = traj.durations
            m[k] = traj.pieces
            t0[k] = stamp
            vx[k] = vertex
        return cls(c, T, m, t0, vx)

    @classmethod
    def empty(cls) -> "NeighborTrajectories":
        return cls(np.zeros((0, 1, 6, 3)), np.zeros((0, 1)), np.zeros(0, dtype=np.int64),
                   np.zeros(0), np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.pieces.shape[0]

    def state(self, k: int, t: float) -> tuple[np.ndarray, np.ndarray]:
        pos, vel = np.empty(3), np.empty(3)
        neighbor_state(self.coeffs, self.durations, self.pieces, self.t0, k, float(t), pos, vel)
        return pos, vel


@dataclass
class CostReport:
    values: dict
    total: float
    dJ_dc: np.ndarray
    dJ_dT: np.ndarray
    weights: CostWeights = field(default_factory=CostWeights)

    def csv_row(self, iteration: int, grad_norm: float) -> list:
        return [iteration] + [self.values[t] for t in TERMS] + [self.total, grad_norm]

    @staticmethod
    def csv_header() -> list:
        return ["iteration"] + list(TERMS) + ["total", "grad_norm"]


def _kappa(traj: Trajectory, params: PenaltyParams) -> np.ndarray:
    return np.full(traj.pieces, params.kappa, dtype=np.int64)


def _grads(traj: Trajectory):
    return np.zeros((traj.pieces, 6, 3)), np.zeros(traj.pieces)


def control_effort(traj: Trajectory):
    gc, gT = _grads(traj)
    J = energy_kernel(traj.coeffs, traj.durations, 1.0, gc, gT)
    return J, gc, gT


def total_time(traj: Trajectory):
    gc, gT = _grads(traj)
    J = time_kernel(traj.durations, 1.0, gT)
    return J, gc, gT


def obstacle_penalty(traj: Trajectory, esdf: Esdf, params: PenaltyParams = PenaltyParams()):
    gc, gT = _grads(traj)
    J = obstacle_kernel(traj.coeffs, traj.durations, _kappa(traj, params), esdf.distance, esdf.origin,
                        esdf.resolution, esdf.d_free_max, params.d_thr, 1.0, gc, gT)
    return J, gc, gT


def _check_formation(neighbors: NeighborTrajectories, spec: FormationSpec, own_vertex: int):
    if len(neighbors) + 1 != spec.n:
        raise DimensionMismatch(f"{len(neighbors)} neighbors + self != {spec.n} formation vertices")
    verts = sorted(list(neighbors.vertex) + [own_vertex])
    if verts != list(range(spec.n)):
        raise DimensionMismatch(f"vertex indices {verts} do not cover the formation")


def formation_penalty(traj: Trajectory, neighbors: NeighborTrajectories, spec: FormationSpec,
                      own_vertex: int, t0: float = 0.0, params: PenaltyParams = PenaltyParams()):
    _check_formation(neighbors, spec, own_vertex)
    gc, gT = _grads(traj)
    J = formation_kernel(traj.coeffs, traj.durations, _kappa(traj, params), float(t0), neighbors.coeffs,
                         neighbors.durations, neighbors.pieces, neighbors.t0, neighbors.vertex,
                         int(own_vertex), np.ascontiguousarray(spec.desired_laplacian), 1.0, gc, gT)
    return J, gc, gT


def reciprocal_penalty(traj: Trajectory, neighbors: NeighborTrajectories, t0: float = 0.0,
                       params: PenaltyParams = PenaltyParams()):
    gc, gT = _grads(traj)
    J = reciprocal_kernel(traj.coeffs, traj.durations, _kappa(traj, params), float(t0), neighbors.coeffs,
                          neighbors.durations, neighbors.pieces, neighbors.t0, params.clearance, 1.0, gc, gT)
    return J, gc, gT


def feasibility_penalty(traj: Trajectory, params: PenaltyParams = PenaltyParams()):
    gc, gT = _grads(traj)
    J = feasibility_kernel(traj.coeffs, traj.durations, _kappa(traj, params), params.v_max, params.a_max,
                           params.j_max, 1.0, gc, gT)
    return J, gc, gT


def uniformity_penalty(traj: Trajectory, params: PenaltyParams = PenaltyParams()):
    gc, gT = _grads(traj)
    J = uniformity_kernel(traj.coeffs, traj.durations, _kappa(traj, params), 1.0, gc, gT)
    return J, gc, gT


_NO_MAP = (np.full((1, 1, 1), 10.0), np.zeros(3), 1.0, 10.0)


def esdf_arrays(esdf: Esdf | None):
    if esdf is None:
        return _NO_MAP
    return esdf.distance, esdf.origin, esdf.resolution, esdf.d_free_max


def total_cost(traj: Trajectory, esdf: Esdf | None, neighbors: NeighborTrajectories | None,
               spec: FormationSpec | None, weights: CostWeights = CostWeights(),
               params: PenaltyParams = PenaltyParams(), own_vertex: int = 0, t0: float = 0.0) -> CostReport:
    """Weighted sum of all terms, with gradients in (c, T) space.

    Swarm terms are skipped when ``neighbors`` is empty/None; the formation
    term additionally requires ``spec``.
    """
    neighbors = neighbors if neighbors is not None else NeighborTrajectories.empty()
    w = weights.as_array()
    if spec is None or len(neighbors) == 0:
        w[3] = 0.0
        ldes = np.zeros((1, 1))
    else:
        _check_formation(neighbors, spec, own_vertex)
        ldes = np.ascontiguousarray(spec.desired_laplacian)
    gc, gT = _grads(traj)
    terms = np.zeros(7)
    dist, origin, res, dmax = esdf_arrays(esdf)
    total = total_kernel(traj.coeffs, traj.durations, _kappa(traj, params), float(t0), dist, origin, res, dmax,
                         neighbors.coeffs, neighbors.durations, neighbors.pieces, neighbors.t0,
                         neighbors.vertex, int(own_vertex), ldes, w, params.as_array(), gc, gT, terms)
    # the kernel skips zero-weight terms; report their unweighted values anyway
    scratch_c, scratch_T = _grads(traj)
    kap = _kappa(traj, params)
    if w[2] == 0.0 and esdf is not None:
        terms[2] = obstacle_kernel(traj.coeffs, traj.durations, kap, dist, origin, res, dmax, params.d_thr, 0.0,
                                   scratch_c, scratch_T)
    if w[3] == 0.0 and spec is not None and len(neighbors):
        _check_formation(neighbors, spec, own_vertex)
        terms[3] = formation_kernel(traj.coeffs, traj.durations, kap, float(t0), neighbors.coeffs,
                                    neighbors.durations, neighbors.pieces, neighbors.t0, neighbors.vertex,
                                    int(own_vertex), np.ascontiguousarray(spec.desired_laplacian), 0.0,
                                    scratch_c, scratch_T)
    if w[4] == 0.0 and len(neighbors):
        terms[4] = reciprocal_kernel(traj.coeffs, traj.durations, kap, float(t0), neighbors.coeffs,
                                     neighbors.durations, neighbors.pieces, neighbors.t0, params.clearance, 0.0,
                                     scratch_c, scratch_T)
    if w[5] == 0.0:
        terms[5] = feasibility_kernel(traj.coeffs, traj.durations, kap, params.v_max, params.a_max, params.j_max,
                                      0.0, scratch_c, scratch_T)
    if w[6] == 0.0:
        terms[6] = uniformity_kernel(traj.coeffs, traj.durations, kap, 0.0, scratch_c, scratch_T)
    return CostReport(dict(zip(TERMS, map(float, terms))), float(total), gc, gT, weights)
