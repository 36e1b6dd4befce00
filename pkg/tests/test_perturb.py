import math

import numpy as np
import pytest

from billiard_security.core.exceptions import (
    AmplitudeTooLargeError, BudgetExceededError, InvalidPathError, SupportCollisionError
)
from billiard_security.services.beams import conjugacy_test, envelope, pencil, reflect_family
from billiard_security.services.curve import cross, evaluate, frame, validate
from billiard_security.services.paths import max_length_path
from billiard_security.services.perturb import (
    break_conjugacy, bump_curvature, bump_point_tangent, move_vertex_on_segment, parallel_chord_shift,
    support_radius
)
from billiard_security.services.ray import PolygonalPath, certify, unit


def test_bump_curvature(unit_circle):
    bumped, record = bump_curvature(unit_circle, 0.3, 0.1)
    assert frame(bumped, 0.3).curvature == pytest.approx(1.1, abs=1e-8)
    assert np.allclose(evaluate(bumped, 0.3, 0)[0], evaluate(unit_circle, 0.3, 0)[0], atol=1e-15)
    assert np.allclose(frame(bumped, 0.3).tangent, frame(unit_circle, 0.3).tangent, atol=1e-12)
    assert record.kind == "curvature"
    assert record.parameters["delta_kappa"] == 0.1
    assert 0.0 < record.d2_effect
    assert np.array_equal(evaluate(bumped, 0.7, 2), evaluate(unit_circle, 0.7, 2))
    assert validate(bumped).valid


def test_zero_curvature_change_is_identity(unit_circle):
    bumped, record = bump_curvature(unit_circle, 0.3, 0.0)
    assert bumped is unit_circle
    assert record.d2_effect == 0.0


def test_curvature_bump_losing_convexity(unit_circle):
    with pytest.raises(AmplitudeTooLargeError):
        bump_curvature(unit_circle, 0.3, -2.0)


def test_curvature_bump_over_budget(unit_circle):
    with pytest.raises(BudgetExceededError):
        bump_curvature(unit_circle, 0.3, 0.1, eps=1e-6)


def test_support_radius():
    assert support_radius(0.25) == pytest.approx(0.05)
    assert support_radius(0.25, [0.26]) == pytest.approx(0.0025)
    with pytest.raises(SupportCollisionError):
        support_radius(0.25, [0.26], nu=0.05)


def test_support_collision(unit_circle):
    with pytest.raises(SupportCollisionError):
        bump_curvature(unit_circle, 0.25, 0.1, nu=0.05, protected=[0.26])


def test_bump_point_tangent_moves_point(unit_circle):
    bumped, record = bump_point_tangent(unit_circle, 0.0, (1.001, 0.0), 0.0)
    s_star = record.parameters["s_star"]
    f = frame(bumped, s_star)
    assert np.allclose(f.point, [1.001, 0.0], atol=1e-10)
    assert np.allclose(f.tangent, [0.0, 1.0], atol=1e-10)
    assert validate(bumped).valid


def test_bump_point_tangent_rotates_tangent(unit_circle):
    bumped, record = bump_point_tangent(unit_circle, 0.0, (1.0, 0.0), 0.01)
    f = frame(bumped, record.parameters["s_star"])
    assert np.allclose(f.point, [1.0, 0.0], atol=1e-10)
    assert np.allclose(f.tangent, [-math.sin(0.01), math.cos(0.01)], atol=1e-10)


def test_move_vertex_on_incoming_segment(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (-0.5, 0.0), (0.5, 0.0), [0.25])
    bumped, moved, record = move_vertex_on_segment(unit_circle, path, 0, 1e-3)
    expected = np.array([0.0, 1.0]) + 1e-3 * unit(np.array([-0.5, -1.0]))
    assert np.allclose(moved.points[0], expected, atol=1e-10)
    assert certify(bumped, moved).certified
    assert record.parameters["along"] == "incoming"
    assert record.kind == "vertex_slide"


def test_move_vertex_collides_with_protected(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (-0.5, 0.0), (0.5, 0.0), [0.25])
    with pytest.raises(SupportCollisionError):
        move_vertex_on_segment(unit_circle, path, 0, 1e-3, nu=0.05, protected=[0.26])


def test_move_vertex_rejects_bad_index(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (-0.5, 0.0), (0.5, 0.0), [0.25])
    with pytest.raises(InvalidPathError):
        move_vertex_on_segment(unit_circle, path, 3, 1e-3)


def test_parallel_chord_shift(unit_circle):
    x, y = (-0.3, 0.2), (0.4, -0.1)
    path = max_length_path(unit_circle, x, y, 2, starts=8, seed=0)[0]
    bumped, shifted, record = parallel_chord_shift(unit_circle, path, 1, 1e-3)
    old = unit(path.points[1] - path.points[0])
    new = unit(shifted.points[1] - shifted.points[0])
    assert abs(float(cross(old, new))) < 1e-9
    assert np.linalg.norm(shifted.points[0] - path.points[0]) == pytest.approx(1e-3, rel=1e-6)
    assert certify(bumped, shifted).certified
    assert record.kind == "chord_shift"
    assert len(record.support) == 2


def test_chord_index_must_name_a_chord(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (-0.5, 0.0), (0.5, 0.0), [0.25])
    with pytest.raises(InvalidPathError):
        parallel_chord_shift(unit_circle, path, 1, 1e-3)


def test_break_conjugacy_on_diameter(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (0.0, 0.0), (0.0, 0.0), [0.0])
    assert conjugacy_test(unit_circle, path).is_conjugate

    bumped, record, margin = break_conjugacy(unit_circle, path)
    assert abs(margin) >= 1e-5
    assert record.kind == "conjugacy_break"
    assert record.parameters["z"] != 1.0
    moved = PolygonalPath.on_table(bumped, path.x, path.y, path.vertices)
    assert not conjugacy_test(bumped, moved).is_conjugate
    assert certify(bumped, moved).residual < 1e-9

    # the focus of the reflected center pencil, measured from the center
    reflected = reflect_family(bumped, pencil((0.0, 0.0), 0.0))
    assert envelope(reflected, 0.0).value - 1.0 == pytest.approx(margin, abs=1e-6)


def test_break_conjugacy_is_a_no_op_when_not_conjugate(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (-0.5, 0.0), (0.5, 0.0), [0.25])
    table, record, margin = break_conjugacy(unit_circle, path)
    assert table is unit_circle
    assert record.parameters["z"] == 1.0
    assert abs(margin) > 1e-3
