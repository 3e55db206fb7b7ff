import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from swarmform.formation import (DegenerateDegree, DimensionMismatch, FormationSpec, NonFinite, build_graph,
                                 hexagon, similarity, similarity_gradient, similarity_gradients, tetrahedron)
from swarmform.gradcheck import central_difference, rel_error

from conftest import random_rotation

SQUARE = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)


def brute_normalized_laplacian(p):
    n = len(p)
    W = np.array([[np.sum((p[i] - p[j]) ** 2) if i != j else 0.0 for j in range(n)] for i in range(n)])
    D = np.diag(W.sum(axis=1))
    Dm = np.diag(1.0 / np.sqrt(np.diag(D)))
    return np.eye(n) - Dm @ W @ Dm


def test_unit_square_laplacian():
    L = build_graph(SQUARE).normalized_laplacian
    expected = np.array([[1, -0.25, -0.5, -0.25],
                         [-0.25, 1, -0.25, -0.5],
                         [-0.5, -0.25, 1, -0.25],
                         [-0.25, -0.5, -0.25, 1]])
    assert np.allclose(L, expected, atol=1e-15)
    g = build_graph(SQUARE)
    assert np.allclose(np.diag(g.degree), 4.0)
    assert np.allclose(g.laplacian, g.degree - g.adjacency)


@pytest.mark.parametrize("s", [0.01, 1.0, 37.0])
def test_equilateral_triangle_is_scale_free(s):
    tri = s * np.array([[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]])
    L = build_graph(tri).normalized_laplacian
    off = L[~np.eye(3, dtype=bool)]
    assert np.allclose(off, -0.5, atol=1e-12)


def test_degenerate_and_invalid_inputs():
    with pytest.raises(DegenerateDegree):
        build_graph([[1, 2, 3], [1, 2, 3]])
    with pytest.raises(NonFinite):
        build_graph([[0, 0, 0], [np.nan, 0, 0], [1, 1, 1]])
    spec = FormationSpec.from_positions(SQUARE)
    with pytest.raises(DimensionMismatch):
        similarity(SQUARE[:3], spec)


def test_square_vs_collinear_matches_brute_force():
    spec = FormationSpec.from_positions(SQUARE)
    line = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
    f = similarity(line, spec)
    expected = np.sum((brute_normalized_laplacian(line) - brute_normalized_laplacian(SQUARE)) ** 2)
    assert f > 0
    assert f == pytest.approx(expected, rel=1e-12)
    # exact value from rational arithmetic: 2101/882 - 3 sqrt(21) / 7
    assert f == pytest.approx(2101 / 882 - 3 * np.sqrt(21) / 7, rel=1e-12)


def test_similarity_zero_at_desired_and_gradient_zero():
    spec = FormationSpec.from_positions(hexagon(1.2))
    assert similarity(hexagon(1.2), spec) == 0.0
    f, g = similarity_gradients(hexagon(1.2), spec)
    assert f == 0.0
    assert np.max(np.abs(g)) < 1e-14


def test_gradient_on_symmetry_axis():
    spec = FormationSpec.from_positions(SQUARE)
    cur = SQUARE.copy()
    # displace vertex 0 along the diagonal through vertices 0 and 2
    cur[0] += np.array([-0.2, -0.2, 0.0])
    g = similarity_gradient(cur, spec, 0)
    axis = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
    assert np.linalg.norm(g - (g @ axis) * axis) < 1e-12 * max(1.0, np.linalg.norm(g))
    assert np.linalg.norm(g) > 0


def test_gradient_matches_finite_differences_5_agents(rng):
    spec = FormationSpec.from_positions(rng.normal(size=(5, 3)))
    cur = rng.normal(size=(5, 3))
    _, g = similarity_gradients(cur, spec)
    num = central_difference(lambda x: similarity(x.reshape(5, 3), spec), cur.ravel(), 1e-6)
    assert rel_error(g, num) < 1e-5


def test_permutation_sensitivity():
    spec = FormationSpec.from_positions(tetrahedron(2.0) * [1.0, 1.3, 0.7])
    cur = spec.desired_positions.copy()
    swapped = cur[[1, 0, 2, 3]]
    assert similarity(swapped, spec) > 1e-6


positions = st.integers(3, 8).flatmap(
    lambda n: arrays(np.float64, (n, 3), elements=st.floats(-5, 5, allow_nan=False, allow_infinity=False)))


def _well_spread(p):
    d = np.sum((p[:, None] - p[None]) ** 2, axis=-1)
    np.fill_diagonal(d, np.inf)
    return d.min() > 1e-2


@given(positions, st.integers(0, 2**32 - 1))
def test_similarity_nonnegative_and_sim3_invariant(p, seed):
    if not _well_spread(p):
        return
    r = np.random.default_rng(seed)
    spec = FormationSpec.from_positions(r.normal(size=p.shape))
    f = similarity(p, spec)
    assert f >= 0.0
    R = random_rotation(r)
    s = float(np.exp(r.uniform(np.log(0.2), np.log(5.0))))
    moved = s * p @ R.T + r.uniform(-10, 10, 3)
    assert abs(similarity(moved, spec) - f) < 1e-9
    assert similarity(p, FormationSpec.from_positions(p)) < 1e-20


@given(positions)
def test_laplacian_structure(p):
    if not _well_spread(p):
        return
    g = build_graph(p)
    L = g.normalized_laplacian
    assert np.allclose(L, L.T, atol=1e-14)
    assert np.allclose(np.diag(L), 1.0)
    assert np.all(np.diag(g.weights) == 0.0)
    assert np.allclose(L, brute_normalized_laplacian(p), atol=1e-12)
