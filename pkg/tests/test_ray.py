import logging
import math

import numpy as np
import pytest

from billiard_security.core.exceptions import CertificationError, GeometryError
from billiard_security.services.curve import cross, evaluate, frame, parameter_distance
from billiard_security.services.ray import (
    PolygonalPath, RayState, billiard_map, bracketed_root, certify, first_hit, reflect, require_certified, reverse,
    trace
)


@pytest.mark.parametrize("p, v, expected_t, expected_point", [
    ((0.0, 0.0), (1.0, 0.0), 1.0, (1.0, 0.0)),
    ((-1.0, 0.0), (1.0, 0.0), 2.0, (1.0, 0.0)),
    ((-1.0, 0.0), (1.0, 1.0), math.sqrt(2.0), (0.0, 1.0)),
])
def test_first_hit(unit_circle, p, v, expected_t, expected_point):
    hit = first_hit(unit_circle, RayState(p, v))
    assert hit.t == pytest.approx(expected_t, abs=1e-12)
    assert np.allclose(hit.point, expected_point, atol=1e-12)


def test_first_hit_from_outside_the_table_misses(unit_circle):
    with pytest.raises(GeometryError):
        first_hit(unit_circle, RayState((2.0, 0.0), (1.0, 0.0)))


def test_reflect():
    assert np.allclose(reflect(np.array([1.0, -1.0]), np.array([0.0, 1.0])), [1.0, 1.0])
    v = np.array([0.6, 0.8])
    n = np.array([math.cos(0.3), math.sin(0.3)])
    assert np.allclose(reflect(reflect(v, n), n), v, atol=1e-14)
    assert np.linalg.norm(reflect(v, n)) == pytest.approx(1.0)


def test_billiard_map_on_circle(unit_circle):
    s, alpha = billiard_map(unit_circle, 0.0, math.pi / 2)
    assert parameter_distance(s, 0.5) < 1e-10
    assert alpha == pytest.approx(math.pi / 2, abs=1e-10)

    s, alpha = billiard_map(unit_circle, 0.1, math.pi / 3)
    assert parameter_distance(s, 0.1 + 1 / 3) < 1e-10
    assert alpha == pytest.approx(math.pi / 3, abs=1e-10)


def test_billiard_map_rejects_outward_angle(unit_circle):
    with pytest.raises(GeometryError):
        billiard_map(unit_circle, 0.0, -0.2)


def test_long_circle_orbit_keeps_angle_and_chord(unit_circle):
    rng = np.random.default_rng(0)
    s, alpha0 = float(rng.uniform()), float(rng.uniform(0.3, 1.4))
    alpha = alpha0
    chord = 2 * math.sin(alpha0)
    for _ in range(10_000):
        s_next, alpha = billiard_map(unit_circle, s, alpha)
        assert alpha == pytest.approx(alpha0, abs=1e-8)
        start, end = evaluate(unit_circle, np.array([s, s_next]), 0)[0]
        assert np.linalg.norm(end - start) == pytest.approx(chord, abs=1e-8)
        s = s_next


def test_diameter_orbit(unit_circle):
    fragment = trace(unit_circle, RayState((0.0, 0.0), (1.0, 0.0)), 2)
    assert np.allclose(fragment.bounces[0].point, [1.0, 0.0], atol=1e-12)
    assert np.allclose(fragment.bounces[1].point, [-1.0, 0.0], atol=1e-12)
    for hit in fragment.bounces:
        assert hit.alpha == pytest.approx(math.pi / 2, abs=1e-10)
    assert fragment.length == pytest.approx(3.0)


def test_zero_bounces_returns_the_ray(unit_circle):
    ray = RayState((0.2, 0.1), (0.0, 1.0))
    fragment = trace(unit_circle, ray, 0)
    assert fragment.bounces == ()
    assert fragment.final is ray


def test_ellipse_focal_property(ellipse_21, foci):
    left, right = foci
    fragment = trace(ellipse_21, RayState(right, (math.cos(1.1), math.sin(1.1))), 10)
    assert len(fragment.bounces) == 10
    hits = fragment.bounces
    for i, hit in enumerate(hits):
        if i + 1 < len(hits):
            d = hits[i + 1].point - hit.point
            d = d / np.linalg.norm(d)
        else:
            d = fragment.final.v
        focus = left if i % 2 == 0 else right
        assert abs(cross(d, focus - hit.point)) < 1e-8


def test_equal_angles_at_each_bounce(noisy_circle):
    fragment = trace(noisy_circle, RayState((0.1, -0.2), (math.cos(2.0), math.sin(2.0))), 4)
    for hit, nxt in zip(fragment.bounces, fragment.bounces[1:]):
        f = frame(noisy_circle, hit.s)
        outgoing = (nxt.point - hit.point) / np.linalg.norm(nxt.point - hit.point)
        out_alpha = math.atan2(float(np.dot(outgoing, f.normal)), float(np.dot(outgoing, f.tangent)))
        assert out_alpha == pytest.approx(hit.alpha, abs=1e-10)


def test_time_reversal(noisy_circle):
    fragment = trace(noisy_circle, RayState((0.05, 0.1), (math.cos(0.4), math.sin(0.4))), 3)
    back = trace(noisy_circle, reverse(noisy_circle, fragment), 3)
    forward = [hit.s for hit in fragment.bounces]
    backward = [hit.s for hit in back.bounces][::-1]
    assert np.all(parameter_distance(np.array(forward), np.array(backward)) < 1e-8)


def test_certify_symmetric_path(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (-0.5, 0.0), (0.5, 0.0), [0.25])
    certificate = certify(unit_circle, path)
    assert certificate.certified
    assert certificate.residual < 1e-12
    assert certificate.length == pytest.approx(2 * math.sqrt(1.25))


def test_certify_rejects_non_reflecting_path(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (-0.5, 0.0), (0.5, 0.0), [0.2])
    assert not certify(unit_circle, path).certified
    with pytest.raises(CertificationError) as info:
        require_certified(unit_circle, path)
    assert info.value.residual > 1e-3


def test_polygonal_path_geometry(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (0.0, 0.0), (0.0, 0.0), [0.0, 0.5])
    assert path.m == 2
    assert path.nodes.shape == (4, 2)
    assert np.allclose(path.rho, [1.0, 2.0, 1.0])
    assert path.length == pytest.approx(4.0)


def test_time_reversal_on_ellipse(ellipse_21):
    fragment = trace(ellipse_21, RayState((0.3, 0.2), (math.cos(0.4), math.sin(0.4))), 10)
    back = trace(ellipse_21, reverse(ellipse_21, fragment), 10)
    forward = np.array([hit.s for hit in fragment.bounces])
    backward = np.array([hit.s for hit in back.bounces][::-1])
    assert np.all(parameter_distance(forward, backward) < 1e-8)


def test_root_without_sign_change_falls_back_to_nearer_endpoint(caplog):
    with caplog.at_level(logging.DEBUG, logger="billiard_security.services.ray"):
        assert bracketed_root(lambda s: s * s + 1e-3, -0.1, 0.5) == -0.1
    assert "No sign change" in caplog.text
