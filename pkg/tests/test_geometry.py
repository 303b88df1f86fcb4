import math

import numpy as np
import pytest

from app.services.geometry import (
    Footprint,
    Polyline,
    collision,
    footprint_corners,
    normalize_heading,
    rectangles_overlap,
    wrap_angles,
)


@pytest.mark.parametrize("theta,expected", [
    (0.0, 0.0),
    (math.pi, math.pi),
    (-math.pi, math.pi),
    (3 * math.pi, math.pi),
    (2 * math.pi + 0.5, 0.5),
    (-2 * math.pi - 0.5, -0.5),
])
def test_normalize_heading(theta, expected):
    assert normalize_heading(theta) == pytest.approx(expected)


def test_wrap_angles_matches_scalar_version():
    thetas = np.linspace(-10, 10, 201)
    assert np.allclose(wrap_angles(thetas), [normalize_heading(t) for t in thetas])


def test_collision_cases():
    box = Footprint((0.0, 0.0), 0.0, (2.0, 1.0))
    assert collision(box, box)
    assert not collision(box, Footprint((100.0, 0.0), 0.0, (2.0, 1.0)))


def test_touching_unit_squares_collide():
    a = Footprint((0.0, 0.0), 0.0, (0.5, 0.5))
    b = Footprint((1.0, 0.0), 0.0, (0.5, 0.5))
    assert collision(a, b)
    assert not collision(a, Footprint((1.01, 0.0), 0.0, (0.5, 0.5)))


def test_rotated_rectangles_use_all_axes():
    """A diamond next to a square: separated only along the diamond's axes"""
    square = Footprint((0.0, 0.0), 0.0, (1.0, 1.0))
    diamond = Footprint((2.3, 2.3), math.pi / 4, (1.0, 1.0))
    assert not collision(square, diamond)
    assert collision(square, Footprint((1.9, 0.0), math.pi / 4, (1.0, 1.0)))


def test_rectangles_overlap_broadcasts():
    positions = np.array([[0.0, 0.0], [3.0, 0.0], [10.0, 0.0]])
    flags = rectangles_overlap((0.0, 0.0), 0.0, (2.0, 1.0), positions, np.zeros(3), np.full((3, 2), 1.0))
    assert flags.tolist() == [True, True, False]


def test_footprint_corners():
    corners = footprint_corners(Footprint((1.0, 1.0), math.pi / 2, (2.0, 1.0)))
    assert np.allclose(corners[0], [0.0, 3.0])


def test_polyline_projection():
    line = Polyline([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)])
    assert line.length == pytest.approx(20.0)
    s, lateral, heading = line.project(np.array([[5.0, 1.0], [11.0, 5.0]]))
    assert s.tolist() == pytest.approx([5.0, 15.0])
    assert lateral.tolist() == pytest.approx([1.0, -1.0])
    assert heading.tolist() == pytest.approx([0.0, math.pi / 2])


def test_polyline_interpolate_and_offset():
    line = Polyline([(0.0, 0.0), (10.0, 0.0)])
    point, heading = line.interpolate(25.0)
    assert point.tolist() == pytest.approx([10.0, 0.0])
    assert line.offset_point(4.0, 2.0) == pytest.approx((4.0, 2.0))
    with pytest.raises(ValueError):
        Polyline([(0.0, 0.0)])
