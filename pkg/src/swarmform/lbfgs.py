"""Limited-memory BFGS with a Lewis-Overton weak-Wolfe bisection line search.

Written in reverse-communication form so the whole iteration can be compiled
around any objective: :func:`workspace` allocates the state, the caller
evaluates ``f, g`` at ``xt`` (into ``gt``), and :func:`tell` consumes that
evaluation and either places the next trial point in ``xt`` or reports that
it has finished. :func:`minimize` is the plain Python driver; hot callers
write the same three-line loop inside their own jitted function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

STATUS = ("converged", "max_iterations", "linesearch_failed", "nonfinite_start")

# slots of the scalar state vector
F, F0, STP, LO, HI, DG0, IT, EVALS, LS, COUNT, NEWEST, PHASE, CODE = range(13)


class NonFiniteCost(ArithmeticError):
    pass


@dataclass(frozen=True)
class LbfgsParams:
    memory: int = 16
    max_iterations: int = 60
    g_epsilon: float = 1e-5
    f_dec_coeff: float = 1e-4
    s_curv_coeff: float = 0.9
    max_linesearch: int = 40
    min_step: float = 1e-20
    max_step: float = 1e20

    def __post_init__(self):
        if self.memory < 1 or self.max_iterations < 0:
            raise ValueError("memory must be >= 1 and max_iterations >= 0")
        if not 0.0 < self.f_dec_coeff < self.s_curv_coeff < 1.0:
            raise ValueError("line search needs 0 < f_dec_coeff < s_curv_coeff < 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.memory, self.max_iterations, self.g_epsilon, self.f_dec_coeff, self.s_curv_coeff,
                         self.max_linesearch, self.min_step, self.max_step], dtype=float)


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    evaluations: int
    status: str
    f0: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @classmethod
    def from_state(cls, x, g, st) -> "LbfgsResult":
        return cls(x, float(st[F]), g, int(st[IT]), int(st[EVALS]), STATUS[int(st[CODE])], float(st[F0]))


@numba.njit(cache=True)
def _norm(v):
    s = 0.0
    for i in range(v.shape[0]):
        s += v[i] * v[i]
    return math.sqrt(s)


@numba.njit(cache=True)
def two_loop(S, Y, rho, count, newest, g, d):
    """d = -H g from the ``count`` stored pairs; ring buffer slot ``newest`` is the latest."""
    m = S.shape[0]
    n = g.shape[0]
    alpha = np.empty(m)
    for i in range(n):
        d[i] = -g[i]
    j = newest
    for _ in range(count):
        a = rho[j] * np.dot(S[j], d)
        alpha[j] = a
        for i in range(n):
            d[i] -= a * Y[j, i]
        j = (j - 1) % m
    if count > 0:
        gamma = np.dot(S[newest], Y[newest]) / np.dot(Y[newest], Y[newest])
        for i in range(n):
            d[i] *= gamma
    j = (newest - count + 1) % m
    for _ in range(count):
        b = rho[j] * np.dot(Y[j], d)
        for i in range(n):
            d[i] += (alpha[j] - b) * S[j, i]
        j = (j + 1) % m


@numba.njit(cache=True)
def workspace(x0, p):
    """(x, g, xt, gt, d, S, Y, rho, st) with ``xt`` = x0 awaiting its first evaluation."""
    n = x0.shape[0]
    m = int(p[0])
    st = np.zeros(13)
    st[NEWEST] = -1.0
    st[CODE] = -1.0
    return (np.zeros(n), np.zeros(n), x0.copy(), np.zeros(n), np.zeros(n), np.zeros((m, n)), np.zeros((m, n)),
            np.zeros(m), st)


@numba.njit(cache=True)
def _begin_iteration(x, g, xt, d, st, p):
    if _norm(g) <= p[2] * max(1.0, _norm(x)):
        st[CODE] = 0
        return True
    if st[IT] >= p[1]:
        st[CODE] = 1
        return True
    dg0 = np.dot(g, d)
    if dg0 >= 0.0:
        # lost descent (bad curvature pairs): restart from steepest descent
        st[COUNT] = 0
        for i in range(d.shape[0]):
            d[i] = -g[i]
        dg0 = np.dot(g, d)
        st[STP] = 1.0 / max(_norm(d), 1e-300)
    st[DG0] = dg0
    st[LO] = 0.0
    st[HI] = math.inf
    st[LS] = 0
    st[PHASE] = 1
    for i in range(x.shape[0]):
        xt[i] = x[i] + st[STP] * d[i]
    return False


@numba.njit(cache=True)
def tell(ft, x, g, xt, gt, d, S, Y, rho, st, p):
    """Consume the evaluation (ft, gt) at xt. True when finished; otherwise xt holds the next trial."""
    n = x.shape[0]
    st[EVALS] += 1
    finite = math.isfinite(ft)
    if st[PHASE] == 0:
        for i in range(n):
            finite = finite and math.isfinite(gt[i])
        if not finite:
            st[F] = ft
            st[F0] = ft
            st[CODE] = 3
            return True
        st[F] = ft
        st[F0] = ft
        for i in range(n):
            x[i] = xt[i]
            g[i] = gt[i]
            d[i] = -gt[i]
        st[STP] = 1.0 / max(_norm(d), 1e-300)
        return _begin_iteration(x, g, xt, d, st, p)
    st[LS] += 1
    stp = st[STP]
    f = st[F]
    dg0 = st[DG0]
    if not finite or ft > f + p[3] * stp * dg0:
        st[HI] = stp
    elif np.dot(gt, d) < p[4] * dg0:
        st[LO] = stp
    else:
        st[IT] += 1
        gnorm = _norm(gt)
        ys = 0.0
        ss = 0.0
        for i in range(n):
            si = xt[i] - x[i]
            ys += si * (gt[i] - g[i])
            ss += si * si
        # cautious update keeps the inverse Hessian approximation positive definite
        if ys > 1e-6 * ss * gnorm:
            m = S.shape[0]
            slot = int(st[NEWEST] + 1) % m
            for i in range(n):
                S[slot, i] = xt[i] - x[i]
                Y[slot, i] = gt[i] - g[i]
            rho[slot] = 1.0 / ys
            st[NEWEST] = slot
            st[COUNT] = min(st[COUNT] + 1, m)
        for i in range(n):
            x[i] = xt[i]
            g[i] = gt[i]
        st[F] = ft
        two_loop(S, Y, rho, int(st[COUNT]), int(st[NEWEST]) % S.shape[0], g, d)
        st[STP] = 1.0
        return _begin_iteration(x, g, xt, d, st, p)
    if st[HI] < math.inf:
        stp = 0.5 * (st[LO] + st[HI])
    else:
        stp *= 2.0
    st[STP] = stp
    if st[LS] >= p[5] or stp < p[6] or stp > p[7]:
        st[IT] += 1
        st[CODE] = 2
        return True
    for i in range(n):
        xt[i] = x[i] + stp * d[i]
    return False


def minimize(fun, x0, params: LbfgsParams = LbfgsParams(), args=()) -> LbfgsResult:
    """Minimize ``fun(x, g, args) -> f`` (gradient written into ``g``) from ``x0``.

    Accepted steps satisfy sufficient decrease, so the returned iterate is the
    best one seen. Raises NonFiniteCost if the starting point is not finite.
    """
    p = params.as_array()
    x, g, xt, gt, d, S, Y, rho, st = workspace(np.ascontiguousarray(x0, dtype=float), p)
    while True:
        ft = float(fun(xt, gt, args))
        if tell(ft, x, g, xt, gt, d, S, Y, rho, st, p):
            break
    if st[CODE] == 3:
        raise NonFiniteCost(f"objective is not finite at the initial point (f={st[F]})")
    return LbfgsResult.from_state(x, g, st)
