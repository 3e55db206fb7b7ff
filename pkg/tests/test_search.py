import numpy as np

from swarmform.esdf import Box, build_esdf, empty_map, rasterize
from swarmform.search import astar, clear_prefix, find_path, push_free, repair_polyline, segment_clear


def wall_esdf():
    # a wall across y with a gap at y in [4, 5]
    obs = [Box((4.0, 0.0, 0.0), (4.4, 4.0, 2.0)), Box((4.0, 5.0, 0.0), (4.4, 9.0, 2.0))]
    return build_esdf(rasterize(obs, (0, 0, 0), (9, 9, 2), 0.1))


def clear(esdf, a, b, c):
    return segment_clear(esdf.distance, esdf.origin, esdf.resolution, esdf.d_free_max,
                         np.asarray(a, float), np.asarray(b, float), c)


def test_astar_straight_in_free_grid():
    free = np.ones((10, 5, 3), dtype=bool)
    path = astar(free, np.array([0, 2, 1]), np.array([9, 2, 1]))
    assert len(path) == 10 and np.array_equal(path[0], [0, 2, 1]) and np.array_equal(path[-1], [9, 2, 1])


def test_astar_unreachable():
    free = np.ones((10, 5, 3), dtype=bool)
    free[5] = False
    assert astar(free, np.array([0, 2, 1]), np.array([9, 2, 1])).shape == (0, 3)


def test_find_path_goes_through_gap():
    esdf = wall_esdf()
    a, b = np.array([1.0, 1.0, 1.0]), np.array([8.0, 1.0, 1.0])
    assert not clear(esdf, a, b, 0.0)
    path = find_path(esdf, a, b, 0.2)
    assert path is not None
    assert np.allclose(path[0], a) and np.allclose(path[-1], b)
    for p, q in zip(path[:-1], path[1:]):
        assert clear(esdf, p, q, 0.0)
    assert np.any((path[:, 1] > 4.0) & (path[:, 1] < 5.0))


def test_repair_keeps_clear_segments():
    esdf = build_esdf(empty_map((0, 0, 0), (5, 5, 2), 0.1))
    poly = np.array([[0.5, 0.5, 1.0], [4.0, 4.0, 1.0]])
    assert np.array_equal(repair_polyline(esdf, poly, 0.2), poly)


def test_repair_replaces_blocked_segments():
    esdf = wall_esdf()
    poly = np.array([[1.0, 1.0, 1.0], [8.0, 2.0, 1.0]])
    out = repair_polyline(esdf, poly, 0.2)
    assert len(out) > 2
    for p, q in zip(out[:-1], out[1:]):
        assert clear(esdf, p, q, 0.0)


def test_push_free_moves_out_of_clearance():
    esdf = wall_esdf()
    p = push_free(esdf, [3.95, 2.0, 1.0], 0.3)
    assert esdf.query(p)[0] >= 0.3
    far = np.array([1.0, 1.0, 1.0])
    assert np.array_equal(push_free(esdf, far, 0.3), far)


def test_clear_prefix_stops_before_sealed_wall():
    esdf = build_esdf(rasterize([Box((4.0, 0.0, 0.0), (4.4, 9.0, 2.0))], (0, 0, 0), (9, 9, 2), 0.1))
    poly = np.array([[1.0, 4.0, 1.0], [8.0, 4.0, 1.0]])
    assert find_path(esdf, poly[0], poly[1], 0.2) is None
    cut = clear_prefix(esdf, poly, 0.3)
    assert np.allclose(cut[0], poly[0]) and cut[-1][0] < 4.0
    assert esdf.query(cut[-1])[0] >= 0.3
    free = np.array([[1.0, 4.0, 1.0], [3.0, 4.0, 1.0]])
    assert np.array_equal(clear_prefix(esdf, free, 0.3), free)


def test_repair_stops_at_unrepairable_segment():
    esdf = build_esdf(rasterize([Box((4.0, 0.0, 0.0), (4.4, 9.0, 2.0))], (0, 0, 0), (9, 9, 2), 0.1))
    poly = np.array([[1.0, 4.0, 1.0], [8.0, 4.0, 1.0], [8.0, 6.0, 1.0]])
    out = repair_polyline(esdf, poly, 0.2)
    assert out[-1][0] < 4.0 and len(out) == 2
