"""Minimum-jerk piecewise-quintic trajectories parameterized by waypoints and durations.

The coefficients ``c`` of an M-piece quintic solve a 6M x 6M banded system
``A(T) c = b(q)`` built from the boundary states, the waypoint interpolation
conditions and derivative continuity up to order 4 at every junction. The
solution is the minimum-jerk trajectory through the waypoints. Gradients of
any cost J(c, T) are mapped to (q, T) by the adjoint of that system.

Row layout per junction ``i`` (between piece i and i+1), base row 6i+3:
jerk, snap continuity, waypoint, position, velocity, acceleration continuity.
With this ordering the matrix has 6 sub- and 6 super-diagonals.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numba
import numpy as np

KL = 6
KU = 6
KV = KL + KU
NROWS_BAND = 2 * KL + KU + 1
DIM = 3
TIME_EPS = 1e-12


class NonPositiveDuration(ValueError):
    pass


class SingularSystem(RuntimeError):
    pass


class OutOfRange(ValueError):
    pass


# ---------------------------------------------------------------------------
# polynomial basis helpers


@numba.njit(cache=True)
def basis(t, order, out):
    """Fill ``out[0:6]`` with the ``order``-th derivative of [1, t, ..., t^5]."""
    for k in range(6):
        out[k] = 0.0
    for k in range(order, 6):
        coef = 1.0
        for m in range(order):
            coef *= k - m
        out[k] = coef * t ** (k - order)


@numba.njit(cache=True)
def eval_piece(c, t, order, out):
    """Evaluate derivative ``order`` of one piece (6, 3) at local time t into out (3,)."""
    for d in range(3):
        out[d] = 0.0
    tp = 1.0
    for k in range(order, 6):
        coef = 1.0
        for m in range(order):
            coef *= k - m
        w = coef * tp
        for d in range(3):
            out[d] += w * c[k, d]
        tp *= t


# ---------------------------------------------------------------------------
# banded LU with partial pivoting (LAPACK gbtf2 storage: A[i, j] -> ab[KV + i - j, j])


@numba.njit(cache=True)
def _set(ab, i, j, v):
    ab[KV + i - j, j] = v


@numba.njit(cache=True)
def build_system(T, ab):
    n = 6 * T.shape[0]
    for r in range(ab.shape[0]):
        for c in range(n):
            ab[r, c] = 0.0
    row = np.empty(6)
    # start p, v, a
    _set(ab, 0, 0, 1.0)
    _set(ab, 1, 1, 1.0)
    _set(ab, 2, 2, 2.0)
    M = T.shape[0]
    for i in range(M - 1):
        r = 6 * i + 3
        c0 = 6 * i
        # derivative order of each junction row: jerk, snap, waypoint, p, v, a
        for slot in range(6):
            if slot == 0:
                order = 3
            elif slot == 1:
                order = 4
            elif slot == 2:
                order = 0
            else:
                order = slot - 3
            basis(T[i], order, row)
            for k in range(order, 6):
                _set(ab, r + slot, c0 + k, row[k])
            if slot != 2:
                basis(0.0, order, row)
                _set(ab, r + slot, c0 + 6 + order, -row[order])
    c0 = 6 * (M - 1)
    for order in range(3):
        basis(T[M - 1], order, row)
        for k in range(order, 6):
            _set(ab, n - 3 + order, c0 + k, row[k])


@numba.njit(cache=True)
def band_lu(ab, ipiv):
    """In-place banded LU with row pivoting restricted to the band. Returns 0 or 1+singular column."""
    n = ab.shape[1]
    ju = 0
    for j in range(n):
        km = min(KL, n - 1 - j)
        jp = 0
        best = abs(ab[KV, j])
        for t in range(1, km + 1):
            v = abs(ab[KV + t, j])
            if v > best:
                best = v
                jp = t
        ipiv[j] = j + jp
        if ab[KV + jp, j] == 0.0:
            return j + 1
        ju = max(ju, min(j + KU + jp, n - 1))
        if jp != 0:
            for c in range(j, ju + 1):
                tmp = ab[KV + j - c, c]
                ab[KV + j - c, c] = ab[KV + j + jp - c, c]
                ab[KV + j + jp - c, c] = tmp
        piv = ab[KV, j]
        for t in range(1, km + 1):
            ab[KV + t, j] /= piv
        for c in range(j + 1, ju + 1):
            ajc = ab[KV + j - c, c]
            if ajc != 0.0:
                for t in range(1, km + 1):
                    ab[KV + j + t - c, c] -= ab[KV + t, j] * ajc
    return 0


@numba.njit(cache=True)
def band_solve(ab, ipiv, b):
    """Solve A x = b in place for b of shape (n, k)."""
    n = ab.shape[1]
    k = b.shape[1]
    for j in range(n):
        p = ipiv[j]
        if p != j:
            for d in range(k):
                tmp = b[j, d]
                b[j, d] = b[p, d]
                b[p, d] = tmp
        km = min(KL, n - 1 - j)
        for t in range(1, km + 1):
            l = ab[KV + t, j]
            for d in range(k):
                b[j + t, d] -= l * b[j, d]
    for j in range(n - 1, -1, -1):
        for d in range(k):
            b[j, d] /= ab[KV, j]
        for i in range(max(0, j - KV), j):
            u = ab[KV + i - j, j]
            for d in range(k):
                b[i, d] -= u * b[j, d]


@numba.njit(cache=True)
def band_solve_t(ab, ipiv, b):
    """Solve A^T x = b in place for b of shape (n, k)."""
    n = ab.shape[1]
    k = b.shape[1]
    for j in range(n):
        for i in range(max(0, j - KV), j):
            u = ab[KV + i - j, j]
            for d in range(k):
                b[j, d] -= u * b[i, d]
        for d in range(k):
            b[j, d] /= ab[KV, j]
    for j in range(n - 2, -1, -1):
        km = min(KL, n - 1 - j)
        for t in range(1, km + 1):
            l = ab[KV + t, j]
            for d in range(k):
                b[j, d] -= l * b[j + t, d]
        p = ipiv[j]
        if p != j:
            for d in range(k):
                tmp = b[j, d]
                b[j, d] = b[p, d]
                b[p, d] = tmp


@numba.njit(cache=True)
def solve_coeffs(q, T, head, tail, ab, ipiv, coeffs):
    """Factorize A(T) into (ab, ipiv) and write the (M, 6, 3) coefficients. Returns LU status."""
    M = T.shape[0]
    n = 6 * M
    build_system(T, ab)
    status = band_lu(ab, ipiv)
    if status != 0:
        return status
    b = np.zeros((n, 3))
    for d in range(3):
        b[0, d] = head[0, d]
        b[1, d] = head[1, d]
        b[2, d] = head[2, d]
        b[n - 3, d] = tail[0, d]
        b[n - 2, d] = tail[1, d]
        b[n - 1, d] = tail[2, d]
    for i in range(M - 1):
        for d in range(3):
            b[6 * i + 5, d] = q[i, d]
    band_solve(ab, ipiv, b)
    for i in range(M):
        for k in range(6):
            for d in range(3):
                coeffs[i, k, d] = b[6 * i + k, d]
    return 0


@numba.njit(cache=True)
def adjoint(ab, ipiv, coeffs, T, gc, gT_partial, gq, gT):
    """Map dJ/dc (M, 6, 3) and partial dJ/dT (M,) to dJ/dq (M-1, 3) and total dJ/dT (M,)."""
    M = T.shape[0]
    n = 6 * M
    G = np.empty((n, 3))
    for i in range(M):
        for k in range(6):
            for d in range(3):
                G[6 * i + k, d] = gc[i, k, d]
    band_solve_t(ab, ipiv, G)
    for i in range(M - 1):
        for d in range(3):
            gq[i, d] = G[6 * i + 5, d]
    der = np.empty(3)
    for i in range(M):
        gT[i] = gT_partial[i]
    # dA/dT_i only touches rows evaluating piece i at its end time; each such row of
    # derivative order k contributes -G_row . p_i^(k+1)(T_i)
    for i in range(M - 1):
        r = 6 * i + 3
        for slot in range(6):
            if slot == 0:
                order = 3
            elif slot == 1:
                order = 4
            elif slot == 2:
                order = 0
            else:
                order = slot - 3
            eval_piece(coeffs[i], T[i], order + 1, der)
            for d in range(3):
                gT[i] -= G[r + slot, d] * der[d]
    for order in range(3):
        eval_piece(coeffs[M - 1], T[M - 1], order + 1, der)
        for d in range(3):
            gT[M - 1] -= G[n - 3 + order, d] * der[d]


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintPoints:
    """Per piece: sample times (κ_i + 1,) and states (κ_i + 1, 4, 3) for orders 0..3."""

    times: list
    states: list


@dataclass(frozen=True, eq=False)
class Trajectory:
    coeffs: np.ndarray
    durations: np.ndarray
    waypoints: np.ndarray
    head: np.ndarray
    tail: np.ndarray
    _ab: np.ndarray = field(repr=False)
    _ipiv: np.ndarray = field(repr=False)

    @property
    def pieces(self) -> int:
        return self.durations.shape[0]

    @property
    def total_time(self) -> float:
        return float(self.durations.sum())

    def piece_at(self, t: float) -> tuple[int, float]:
        return locate(self.durations, t)

    def evaluate(self, t: float, order: int = 0) -> np.ndarray:
        return evaluate(self, t, order)

    def sample_constraint_points(self, kappa) -> ConstraintPoints:
        return sample_constraint_points(self, kappa)


def _boundary(state) -> np.ndarray:
    s = np.zeros((3, DIM))
    arr = np.asarray(state, dtype=float)
    if arr.ndim == 1:
        s[0] = arr
    else:
        s[: arr.shape[0]] = arr
    return s


def construct(waypoints, durations, head, tail) -> Trajectory:
    """Build the minimum-jerk trajectory through ``waypoints``.

    ``head``/``tail`` are (3, 3) arrays of position, velocity, acceleration, or
    a bare position for rest-to-rest boundaries.
    """
    T = np.array(durations, dtype=float).reshape(-1)
    if T.size < 1:
        raise ValueError("need at least one piece")
    if not np.all(np.isfinite(T)) or np.any(T <= 0.0):
        raise NonPositiveDuration(f"durations must be positive, got {T}")
    M = T.size
    q = np.array(waypoints, dtype=float).reshape(-1, DIM) if M > 1 else np.zeros((0, DIM))
    if q.shape[0] != M - 1:
        raise ValueError(f"{M} pieces need {M - 1} waypoints, got {q.shape[0]}")
    head = _boundary(head)
    tail = _boundary(tail)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(head)) and np.all(np.isfinite(tail))):
        raise ValueError("waypoints and boundary states must be finite")
    ab = np.zeros((NROWS_BAND, 6 * M))
    ipiv = np.zeros(6 * M, dtype=np.int64)
    coeffs = np.empty((M, 6, DIM))
    if solve_coeffs(q, T, head, tail, ab, ipiv, coeffs) != 0:
        raise SingularSystem("banded MINCO system is singular")
    for a in (coeffs, T, q, head, tail):
        a.setflags(write=False)
    return Trajectory(coeffs, T, q, head, tail, ab, ipiv)


def hover(position, duration: float = 1.0) -> Trajectory:
    p = np.asarray(position, dtype=float)
    return construct(np.zeros((0, DIM)), [duration], p, p)


def locate(durations: np.ndarray, t: float) -> tuple[int, float]:
    total = float(durations.sum())
    if t < -TIME_EPS or t > total + TIME_EPS:
        raise OutOfRange(f"t={t} outside [0, {total}]")
    t = min(max(t, 0.0), total)
    acc = 0.0
    M = durations.shape[0]
    for i in range(M):
        end = acc + durations[i]
        if t < end - TIME_EPS or i == M - 1:
            return i, min(max(t - acc, 0.0), float(durations[i]))
        acc = end
    return M - 1, float(durations[-1])


def evaluate(traj: Trajectory, t: float, order: int = 0) -> np.ndarray:
    if order not in (0, 1, 2, 3, 4):
        raise ValueError("order must be 0..4")
    i, tau = locate(traj.durations, t)
    out = np.empty(DIM)
    eval_piece(traj.coeffs[i], tau, order, out)
    return out


def sample_constraint_points(traj: Trajectory, kappa) -> ConstraintPoints:
    k = np.broadcast_to(np.asarray(kappa, dtype=np.int64), (traj.pieces,))
    if np.any(k < 2):
        raise ValueError("at least two samples per piece")
    times, states = [], []
    out = np.empty(DIM)
    for i in range(traj.pieces):
        ts = np.arange(k[i] + 1) * (traj.durations[i] / k[i])
        st = np.empty((k[i] + 1, 4, DIM))
        for j, t in enumerate(ts):
            for order in range(4):
                eval_piece(traj.coeffs[i], t, order, out)
                st[j, order] = out
        times.append(ts)
        states.append(st)
    return ConstraintPoints(times, states)


def propagate_gradient(traj: Trajectory, dJ_dc, dJ_dT_partial) -> tuple[np.ndarray, np.ndarray]:
    gc = np.ascontiguousarray(dJ_dc, dtype=float).reshape(traj.pieces, 6, DIM)
    gTp = np.ascontiguousarray(dJ_dT_partial, dtype=float).reshape(traj.pieces)
    gq = np.zeros((traj.pieces - 1, DIM))
    gT = np.zeros(traj.pieces)
    adjoint(traj._ab, traj._ipiv, traj.coeffs, traj.durations, gc, gTp, gq, gT)
    return gq, gT


# ---------------------------------------------------------------------------
# serialization for the broadcast bus and logs


def to_record(traj: Trajectory, agent: int, stamp: float) -> dict:
    return {
        "agent": int(agent),
        "stamp": float(stamp),
        "head": traj.head.tolist(),
        "tail": traj.tail.tolist(),
        "q": traj.waypoints.tolist(),
        "T": traj.durations.tolist(),
        "c": traj.coeffs.tolist(),
    }


def from_record(rec: dict) -> tuple[int, float, Trajectory]:
    traj = construct(rec["q"], rec["T"], rec["head"], rec["tail"])
    return int(rec["agent"]), float(rec["stamp"]), traj


def dumps(traj: Trajectory, agent: int, stamp: float) -> str:
    # repr() of a float round-trips exactly
    return json.dumps(to_record(traj, agent, stamp))


def loads(text: str) -> tuple[int, float, Trajectory]:
    return from_record(json.loads(text))
