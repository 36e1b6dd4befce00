from itertools import combinations

import numpy as np
import pytest

from billiard_security.core.exceptions import BilliardError, BounceLimitError
from billiard_security.services.paths import max_length_path, segment
from billiard_security.services.ray import PolygonalPath
from billiard_security.services.security import (
    blocking_test, check_general_position, check_non_collinearity, find_new_vertex_path, pigeonhole_bounces,
    search_new_vertex_path
)

X, Y = (0.2, 0.1), (-0.3, 0.2)


def polygon(x, y, points):
    """Path from raw vertex points; parameters are placeholders"""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    vertices = tuple(0.1 * (i + 1) for i in range(len(points)))
    return PolygonalPath(np.asarray(x, dtype=float), np.asarray(y, dtype=float), vertices, points)


def test_bare_segment_is_in_general_position():
    report = check_general_position([segment((-0.5, 0.0), (0.5, 0.0))], (-0.5, 0.0), (0.5, 0.0))
    assert report.general_position
    assert report.nc
    assert report.violations == ()


def test_shared_vertex_violates_gp1(unit_circle):
    x, y = (-0.5, 0.0), (0.5, 0.0)
    a = PolygonalPath.on_table(unit_circle, x, y, [0.25])
    b = PolygonalPath.on_table(unit_circle, x, y, [0.25, 0.6])
    report = check_general_position([a, b], x, y, tol=1e-4)
    assert not report.gp1
    assert report.gp2
    violation = report.of("GP1")[0]
    assert violation.paths == (0, 1)
    assert violation.detail["vertices"] == [[0, 0], [1, 0]]
    assert violation.separation == 0.0


def test_repeated_vertex_on_one_path_violates_gp2():
    path = polygon((0.0, 0.0), (0.1, 0.1), [(1.0, 0.0), (0.0, 1.0), (1.0, 0.0)])
    report = check_general_position([path], (0.0, 0.0), (0.1, 0.1), tol=1e-4)
    assert not report.gp2
    assert report.of("GP2")[0].paths == (0,)


def test_triple_point_violates_gp3():
    x, y = (-0.5, -0.5), (0.5, -0.5)
    paths = [
        polygon(x, y, [(1.0, 1.9)]),
        polygon(x, y, [(-1.0, 1.9)]),
        polygon(x, y, [(-1.0, 0.3), (1.0, 0.3)]),
    ]
    report = check_general_position(paths, x, y, tol=1e-4)
    assert not report.gp3
    assert report.gp1 and report.gp2
    violation = report.of("GP3")[0]
    assert np.allclose(violation.points[0], [0.0, 0.3], atol=1e-6)
    assert violation.detail["cluster_size"] == 3
    assert violation.paths == (0, 1, 2)


def test_endpoint_on_another_segment_violates_gp4():
    x, y = (0.0, 0.0), (0.5, 0.0)
    path = polygon(x, y, [(1.0, 0.0)])
    report = check_general_position([path], x, y, tol=1e-4)
    assert not report.gp4
    violation = report.of("GP4")[0]
    assert violation.detail["endpoint"] == "y"
    assert violation.detail["segment"] == 0


@pytest.mark.parametrize("second, collinear", [((-1.0, 0.0), True), ((0.0, 1.0), False)])
def test_non_collinearity(second, collinear):
    x, y = (0.3, -0.4), (0.0, 0.0)
    paths = [polygon(x, y, [(1.0, 0.0)]), polygon(x, y, [second])]
    violations = check_non_collinearity(paths, y, tol=1e-4)
    assert bool(violations) is collinear
    if collinear:
        assert violations[0].condition == "NC"
        assert violations[0].separation < 1e-12


def point_segment_distance(p, a, b):
    ab, ap = b - a, p - a
    length2 = float(np.dot(ab, ab))
    if length2 > 0.0 and 0.0 <= float(np.dot(ap, ab)) <= length2:
        return abs(float(ab[0] * ap[1] - ab[1] * ap[0])) / np.sqrt(length2)
    return min(float(np.linalg.norm(p - a)), float(np.linalg.norm(p - b)))


def crossing(a, b, c, d):
    """Intersection point of segments ab and cd, or None"""
    matrix = np.column_stack([b - a, c - d])
    if abs(np.linalg.det(matrix)) < 1e-14:
        return None
    t, u = np.linalg.solve(matrix, c - a)
    if -1e-9 <= t <= 1 + 1e-9 and -1e-9 <= u <= 1 + 1e-9:
        return a + t * (b - a)
    return None


def brute_force_verdicts(paths, x, y, tol):
    verdicts = dict.fromkeys(("GP1", "GP2", "GP3", "GP4"), True)
    vertices = [(i, p) for i, path in enumerate(paths) for p in path.points]
    for a, (i, p) in enumerate(vertices):
        for j, q in vertices[a + 1:]:
            if np.linalg.norm(p - q) < tol:
                verdicts["GP2" if i == j else "GP1"] = False

    segments = [(i, k, path.nodes[k], path.nodes[k + 1]) for i, path in enumerate(paths) for k in range(path.m + 1)]
    for i, k, a, b in segments:
        if k != 0 and point_segment_distance(x, a, b) < tol:
            verdicts["GP4"] = False
        if k != paths[i].m and point_segment_distance(y, a, b) < tol:
            verdicts["GP4"] = False

    for triple in combinations(segments, 3):
        for first, second, third in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            p = crossing(*triple[first][2:], *triple[second][2:])
            if p is None or np.linalg.norm(p - x) < tol or np.linalg.norm(p - y) < tol:
                continue
            if point_segment_distance(p, *triple[third][2:]) < tol:
                verdicts["GP3"] = False
    return verdicts


def random_direction(rng):
    angle = rng.uniform(0.0, 2 * np.pi)
    return np.array([np.cos(angle), np.sin(angle)])


def random_bundle(rng, x, y):
    """Two or three random polygons, sometimes with a planted violation"""
    paths = [polygon(x, y, rng.uniform(-1, 1, size=(int(rng.integers(1, 4)), 2)))
             for _ in range(int(rng.integers(2, 4)))]
    planted = int(rng.integers(5))
    if planted == 1:
        paths[1] = polygon(x, y, np.vstack([paths[1].points, paths[0].points[:1]]))
    elif planted == 2:
        first = paths[0].points[0]
        paths[0] = polygon(x, y, [first, rng.uniform(-1, 1, size=2), first])
    elif planted == 3:
        center = rng.uniform(-0.5, 0.5, size=2)
        for _ in range(3):
            arm = rng.uniform(0.2, 0.5) * random_direction(rng)
            paths.append(polygon(x, y, [center + arm, center - arm]))
    elif planted == 4:
        arm = 0.3 * random_direction(rng)
        paths.append(polygon(x, y, [y + arm, y - arm, rng.uniform(-1, 1, size=2)]))
    return paths


def test_agrees_with_brute_force_oracle():
    rng = np.random.default_rng(5)
    x, y = np.array([0.0, 0.0]), np.array([0.1, -0.1])
    failures = dict.fromkeys(("GP1", "GP2", "GP3", "GP4"), 0)
    for _ in range(100):
        paths = random_bundle(rng, x, y)
        expected = brute_force_verdicts(paths, x, y, 1e-4)
        report = check_general_position(paths, x, y, 1e-4)
        assert {"GP1": report.gp1, "GP2": report.gp2, "GP3": report.gp3, "GP4": report.gp4} == expected
        for condition, passed in expected.items():
            failures[condition] += not passed
    assert all(failures.values())


def test_passing_bundles_survive_vertex_noise():
    rng = np.random.default_rng(9)
    x, y = np.array([0.0, 0.0]), np.array([0.1, -0.1])
    margin = 1e-3
    checked = 0
    while checked < 20:
        paths = [polygon(x, y, rng.uniform(-1, 1, size=(int(rng.integers(1, 4)), 2))) for _ in range(3)]
        if not check_general_position(paths, x, y, 8 * margin).general_position:
            continue
        assert check_general_position(paths, x, y, margin).general_position
        for _ in range(5):
            moved = [polygon(x, y, path.points + 0.999 * margin / 4 * np.array([random_direction(rng)
                                                                                for _ in range(path.m)]))
                     for path in paths]
            assert check_general_position(moved, x, y, margin / 2).general_position
        checked += 1


def test_blocking(unit_circle):
    center = (0.0, 0.0)
    path = PolygonalPath.on_table(unit_circle, center, center, [0.0])
    assert blocking_test([path], [(0.5, 0.0)], 0.1) == (True, [])
    assert blocking_test([path], [(0.0, 0.5)], 0.1) == (False, [0])
    # blockers inside the endpoint balls are ignored
    assert blocking_test([path], [(0.05, 0.0)], 0.1) == (False, [0])
    with pytest.raises(BilliardError):
        blocking_test([path], [(0.5, 0.0)], 0.0)


def test_pigeonhole_bounces(unit_circle):
    one = PolygonalPath.on_table(unit_circle, X, Y, [0.3])
    three = PolygonalPath.on_table(unit_circle, X, Y, [0.1, 0.5, 0.8])
    assert pigeonhole_bounces([segment(X, Y)]) == 2
    assert pigeonhole_bounces([one]) == 2
    assert pigeonhole_bounces([one, three]) == 14


def test_find_new_vertex_path(noisy_circle):
    existing = [segment(X, Y)] + max_length_path(noisy_circle, X, Y, 1, starts=8, seed=0)[:1]
    found = find_new_vertex_path(noisy_circle, X, Y, existing, starts=8, seed=0)
    assert found.m == 2
    old = existing[1].points[0]
    assert np.linalg.norm(found.path.points[found.vertex_index] - old) >= 1e-4
    assert found.separation > 0.0


def test_search_prefers_few_bounces(noisy_circle):
    found = search_new_vertex_path(noisy_circle, X, Y, [segment(X, Y)], starts=8, seed=0)
    assert found.m == 1
    assert found.path.m == 1


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1])
@pytest.mark.parametrize("bounces, expected_m", [((2,), 4), ((1, 2), 8), ((3,), 8)])
def test_pigeonhole_count_yields_a_new_vertex(noisy_circle, seed, bounces, expected_m):
    existing = [max_length_path(noisy_circle, X, Y, m, starts=8, seed=seed)[0] for m in bounces]
    assert not check_non_collinearity(existing, Y, tol=1e-4)
    found = find_new_vertex_path(noisy_circle, X, Y, existing, starts=8, seed=seed)
    assert found.m == expected_m
    new_point = found.path.points[found.vertex_index]
    for path in existing:
        assert np.min(np.linalg.norm(path.points - new_point, axis=1)) >= 1e-4


def test_pigeonhole_count_beyond_limit_is_refused(unit_circle):
    existing = [PolygonalPath.on_table(unit_circle, X, Y, [0.03 + 0.1 * i]) for i in range(7)]
    assert pigeonhole_bounces(existing) == 44
    with pytest.raises(BounceLimitError) as info:
        find_new_vertex_path(unit_circle, X, Y, existing)
    assert info.value.required == 44
    assert info.value.limit == 40
    assert info.value.exit_code == 2
