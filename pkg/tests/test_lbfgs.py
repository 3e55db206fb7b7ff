import numpy as np
import pytest

from swarmform.lbfgs import LbfgsParams, NonFiniteCost, minimize


def rosenbrock(x, g, args):
    n = x.size
    f = 0.0
    g[:] = 0.0
    for i in range(n - 1):
        a = x[i + 1] - x[i] ** 2
        b = 1.0 - x[i]
        f += 100.0 * a * a + b * b
        g[i] += -400.0 * a * x[i] - 2.0 * b
        g[i + 1] += 200.0 * a
    return f


def quadratic(x, g, args):
    A = args[0]
    g[:] = A @ x
    return 0.5 * x @ A @ x


@pytest.mark.parametrize("n", [2, 6, 10])
def test_rosenbrock(n):
    x0 = np.full(n, -1.2)
    x0[1::2] = 1.0
    res = minimize(rosenbrock, x0, LbfgsParams(max_iterations=2000, g_epsilon=1e-8))
    assert res.converged
    assert np.allclose(res.x, 1.0, atol=1e-5)
    assert res.f <= res.f0


def test_quadratic_and_iteration_cap(rng):
    Q = rng.normal(size=(8, 8))
    A = Q @ Q.T + 8 * np.eye(8)
    res = minimize(quadratic, rng.normal(size=8), LbfgsParams(g_epsilon=1e-10, max_iterations=200), (A,))
    assert res.converged and np.linalg.norm(res.x) < 1e-8
    capped = minimize(rosenbrock, np.array([-1.2, 1.0]), LbfgsParams(max_iterations=3))
    assert capped.status == "max_iterations" and capped.iterations == 3 and capped.f < capped.f0


def test_nonfinite_start():
    with pytest.raises(NonFiniteCost):
        minimize(lambda x, g, a: np.nan, np.zeros(2))


def test_invalid_params():
    with pytest.raises(ValueError):
        LbfgsParams(f_dec_coeff=0.95, s_curv_coeff=0.9)
