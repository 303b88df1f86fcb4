"""
Planar geometry shared by the simulator, the cost functions and the fault injector.

Footprints are oriented rectangles described by a center, a heading and half
extents (half-length along the heading, half-width across it).
"""
import math
from typing import NamedTuple, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi
OVERLAP_TOLERANCE = 1e-9


def normalize_heading(theta: float) -> float:
    """Wrap an angle into (-pi, pi]; values already in range are returned unchanged"""
    if -math.pi < theta <= math.pi:
        return float(theta)
    wrapped = math.fmod(theta + math.pi, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    wrapped -= math.pi
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized normalize_heading"""
    theta = np.asarray(theta, dtype=float)
    wrapped = np.mod(theta + math.pi, TWO_PI) - math.pi
    wrapped = np.where(wrapped <= -math.pi, math.pi, wrapped)
    return np.where((theta > -math.pi) & (theta <= math.pi), theta, wrapped)


def heading_vector(theta) -> np.ndarray:
    """Unit vector(s) along heading(s); trailing axis has size 2"""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def circumscribed_radius(extent: Sequence[float]) -> float:
    return math.hypot(extent[0], extent[1])


class Footprint(NamedTuple):
    """Oriented rectangle: center (m), heading (rad), half extents (m)"""
    position: Tuple[float, float]
    heading: float
    extent: Tuple[float, float]


def footprint_corners(footprint: Footprint) -> np.ndarray:
    """Corners in counter-clockwise order, shape (4, 2)"""
    c, s = math.cos(footprint.heading), math.sin(footprint.heading)
    rotation = np.array([[c, -s], [s, c]])
    hl, hw = footprint.extent
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    return local @ rotation.T + np.asarray(footprint.position, dtype=float)


def rectangles_overlap(pos_a, heading_a, extent_a, pos_b, heading_b, extent_b) -> np.ndarray:
    """
    Separating-axis test for oriented rectangles, broadcast over leading axes.

    Positions and extents carry a trailing axis of size 2. Touching boundaries
    count as overlap.

    Returns:
        Boolean array with the broadcast shape of the inputs (without the trailing axis)
    """
    pos_a = np.asarray(pos_a, dtype=float)
    pos_b = np.asarray(pos_b, dtype=float)
    extent_a = np.asarray(extent_a, dtype=float)
    extent_b = np.asarray(extent_b, dtype=float)
    axes_a = (heading_vector(heading_a), heading_vector(np.asarray(heading_a) + math.pi / 2))
    axes_b = (heading_vector(heading_b), heading_vector(np.asarray(heading_b) + math.pi / 2))
    delta = pos_b - pos_a

    def radius(axes, extent, axis):
        return (extent[..., 0] * np.abs(np.sum(axes[0] * axis, axis=-1))
                + extent[..., 1] * np.abs(np.sum(axes[1] * axis, axis=-1)))

    overlapping = None
    for axis in (*axes_a, *axes_b):
        separation = np.abs(np.sum(delta * axis, axis=-1))
        reach = radius(axes_a, extent_a, axis) + radius(axes_b, extent_b, axis)
        on_axis = separation <= reach + OVERLAP_TOLERANCE
        overlapping = on_axis if overlapping is None else overlapping & on_axis
    return overlapping


def collision(a: Footprint, b: Footprint) -> bool:
    """True when two footprints overlap or touch"""
    return bool(rectangles_overlap(a.position, a.heading, a.extent, b.position, b.heading, b.extent))


class Polyline:
    """Piecewise-linear curve with arc-length parametrisation"""

    def __init__(self, points: Sequence[Sequence[float]]):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("polyline needs at least two 2D points")
        self.points = pts
        self.segments = pts[1:] - pts[:-1]
        self.segment_lengths = np.linalg.norm(self.segments, axis=1)
        self.cumulative = np.concatenate([[0.0], np.cumsum(self.segment_lengths)])
        self.segment_headings = np.arctan2(self.segments[:, 1], self.segments[:, 0])

    @property
    def length(self) -> float:
        return float(self.cumulative[-1])

    def project(self, points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Closest-point projection of points onto the polyline.

        Args:
            points: array of shape (..., 2)

        Returns:
            (arc length s, signed lateral offset (left positive), tangent heading), each of shape (...)
        """
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        rel = flat[:, None, :] - self.points[None, :-1, :]
        seg_sq = np.maximum(self.segment_lengths ** 2, 1e-12)
        t = np.clip(np.einsum("msk,sk->ms", rel, self.segments) / seg_sq, 0.0, 1.0)
        closest = self.points[None, :-1, :] + t[..., None] * self.segments[None, :, :]
        dist = np.linalg.norm(flat[:, None, :] - closest, axis=-1)
        best = np.argmin(dist, axis=1)
        rows = np.arange(len(flat))
        seg = self.segments[best]
        rel_best = rel[rows, best]
        cross = seg[:, 0] * rel_best[:, 1] - seg[:, 1] * rel_best[:, 0]
        lateral = np.sign(cross) * dist[rows, best]
        s = self.cumulative[best] + t[rows, best] * self.segment_lengths[best]
        heading = self.segment_headings[best]
        shape = pts.shape[:-1]
        return s.reshape(shape), lateral.reshape(shape), heading.reshape(shape)

    def distance(self, points) -> np.ndarray:
        return np.abs(self.project(points)[1])

    def interpolate(self, s) -> Tuple[np.ndarray, np.ndarray]:
        """Point(s) and tangent heading(s) at arc length s, clamped to the ends"""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        seg = np.clip(np.searchsorted(self.cumulative, s, side="right") - 1, 0, len(self.segments) - 1)
        local = (s - self.cumulative[seg]) / np.maximum(self.segment_lengths[seg], 1e-12)
        xy = self.points[seg] + local[..., None] * self.segments[seg]
        return xy, self.segment_headings[seg]

    def offset_point(self, s: float, lateral: float) -> Tuple[float, float]:
        """Point at arc length s shifted laterally (left positive)"""
        xy, heading = self.interpolate(s)
        normal = heading_vector(float(heading) + math.pi / 2)
        point = xy + lateral * normal
        return float(point[0]), float(point[1])
