"""Lane and route helpers on top of the map context."""
from typing import List, Sequence, Tuple

import numpy as np

from app.schemas.world import AgentState, Lane, MapContext
from app.services.geometry import Polyline

LANE_HALF_WIDTH = 1.75  # m; in-path corridor half width around the route centerline


def lane_points(lane: Lane) -> List[Tuple[float, float]]:
    """Centerline points ordered along the direction of travel"""
    points = list(lane.centerline)
    return points if lane.direction >= 0 else points[::-1]


def lane_polyline(lane: Lane) -> Polyline:
    return Polyline(lane_points(lane))


class Route:
    """Ego route as one polyline, with per-lane speed limits indexed by arc length"""

    def __init__(self, map_context: MapContext, lane_ids: Sequence[str]):
        points: List[Tuple[float, float]] = []
        breaks = [0.0]
        limits = []
        for lane_id in lane_ids:
            lane = map_context.lane(lane_id)
            if lane is None:
                raise KeyError(lane_id)
            lane_pts = lane_points(lane)
            if points and np.allclose(points[-1], lane_pts[0]):
                lane_pts = lane_pts[1:]
            points.extend(lane_pts)
            breaks.append(Polyline(points).length if len(points) >= 2 else 0.0)
            limits.append(lane.speed_limit)
        if len(points) < 2:
            raise ValueError("route has no drivable geometry")
        self.lane_ids = list(lane_ids)
        self.polyline = Polyline(points)
        self.breaks = np.asarray(breaks[1:])
        self.limits = limits

    @property
    def length(self) -> float:
        return self.polyline.length

    def speed_limit_at(self, s: float) -> float:
        index = int(np.searchsorted(self.breaks, s, side="left"))
        return self.limits[min(index, len(self.limits) - 1)]


def in_corridor(route: Route, points, half_width: float = LANE_HALF_WIDTH) -> np.ndarray:
    """Whether points lie within the route corridor (and not beyond either end)"""
    s, lateral, _ = route.polyline.project(points)
    return (np.abs(lateral) < half_width) & (s > 0.0) & (s < route.length)


def agent_path_points(agent: AgentState, horizon: float = 10.0, step: float = 0.5) -> np.ndarray:
    """Constant-velocity samples of an agent's future positions"""
    times = np.arange(0.0, horizon + 1e-9, step)
    direction = np.array([np.cos(agent.heading), np.sin(agent.heading)])
    return np.asarray(agent.position) + (agent.speed * times)[:, None] * direction


def is_in_path(map_context: MapContext, route_lanes: Sequence[str], agent: AgentState,
               horizon: float = 10.0) -> bool:
    """An agent is in-path when its constant-velocity path enters the ego route corridor"""
    route = Route(map_context, route_lanes)
    return bool(np.any(in_corridor(route, agent_path_points(agent, horizon))))
