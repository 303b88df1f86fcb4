"""
Risk costs of a (predicted) scene: higher means riskier.

Two metrics are offered, both plus a penalty ``rule_penalty`` per active
traffic-rule violation of the ego:

- TTC: ``1 - min(TTC / ttc_cap, 1)`` of the most dangerous agent, with the
  time to collision computed for circumscribed discs moving at constant
  velocity.
- MSD (momentum-shaped distance): with position and velocity differences
  projected on the ego heading, ``delta = (dx_par * dv_par)^2 + (dx_perp * dv_perp)^2``
  and the cost ``w_kind * exp(-delta / 2)`` of the most dangerous agent.
  ``msd_literal_formula`` switches to ``exp(w_kind * delta / 2)``.

The kernels broadcast over any leading axes, so the same code scores one
scene, a batch of n scenes or a (T, n) rollout.
"""
import math
from typing import Sequence, Tuple

import numpy as np

from app.schemas.config import CostConfig, CostMetric
from app.schemas.world import AgentKind, AgentState, EgoState, LightState, MapContext, WorldState
from app.services.geometry import heading_vector, wrap_angles
from app.services.lanes import LANE_HALF_WIDTH, lane_polyline
from app.services.scene_batch import Rollout, SceneBatch

OFF_LANE_DISTANCE = 10.0  # m; farther than this from every centerline counts as one violation
MAX_EXPONENT = 700.0  # keeps the literal MSD form finite in float64
_ALIGNED = math.pi / 2


def ttc_kernel(rel_position: np.ndarray, rel_velocity: np.ndarray, radius_sum: np.ndarray) -> np.ndarray:
    """
    Smallest t >= 0 with |r + w t| = R, elementwise.

    Args:
        rel_position: agent minus ego position, shape (..., 2)
        rel_velocity: agent minus ego velocity, shape (..., 2)
        radius_sum: sum of circumscribed radii, shape (...)

    Returns:
        Seconds; 0 where the discs already overlap, +inf where they never meet
    """
    r = np.asarray(rel_position, dtype=float)
    w = np.asarray(rel_velocity, dtype=float)
    a = np.sum(w * w, axis=-1)
    b = 2.0 * np.sum(r * w, axis=-1)
    c = np.sum(r * r, axis=-1) - np.asarray(radius_sum, dtype=float) ** 2
    disc = b * b - 4.0 * a * c
    moving = a > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        root = (-b - np.sqrt(np.maximum(disc, 0.0))) / (2.0 * np.where(moving, a, 1.0))
    meets = moving & (disc >= 0.0) & (root >= 0.0)
    ttc = np.where(meets, root, np.inf)
    return np.where(c <= 0.0, 0.0, ttc)


def _velocity(speed, heading) -> np.ndarray:
    return np.asarray(speed, dtype=float)[..., None] * heading_vector(heading)


def _radius(extent) -> np.ndarray:
    extent = np.asarray(extent, dtype=float)
    return np.hypot(extent[..., 0], extent[..., 1])


def ttc_pair(ego: EgoState, agent: AgentState) -> float:
    """Time to collision of two states under the circumscribed-disc approximation"""
    rel_position = np.subtract(agent.position, ego.position)
    rel_velocity = _velocity(agent.speed, agent.heading) - _velocity(ego.speed, ego.heading)
    radius_sum = _radius(ego.extent) + _radius(agent.extent)
    return float(ttc_kernel(rel_position, rel_velocity, radius_sum))


def decompose(vec: Sequence[float], ego_heading: float) -> Tuple[float, float]:
    """Components of a vector parallel and perpendicular (left positive) to the ego heading"""
    parallel, perpendicular = _decompose(np.asarray(vec, dtype=float), np.asarray(ego_heading, dtype=float))
    return float(parallel), float(perpendicular)


def _decompose(vec: np.ndarray, heading: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(heading), np.sin(heading)
    parallel = vec[..., 0] * c + vec[..., 1] * s
    perpendicular = -vec[..., 0] * s + vec[..., 1] * c
    return parallel, perpendicular


def msd_delta(rel_position: np.ndarray, rel_velocity: np.ndarray, ego_heading: np.ndarray) -> np.ndarray:
    """Momentum-weighted separation; ego_heading broadcasts against the leading axes"""
    dx_par, dx_perp = _decompose(rel_position, ego_heading)
    dv_par, dv_perp = _decompose(rel_velocity, ego_heading)
    return (dx_par * dv_par) ** 2 + (dx_perp * dv_perp) ** 2


def _agent_risk(ego_position, ego_heading, ego_speed, ego_extent, position, heading, speed, extent,
                kinds: Sequence[AgentKind], cfg: CostConfig) -> np.ndarray:
    """
    Per-agent risk terms.

    Ego arrays have leading shape (...); agent arrays (..., k). Returns (..., k).
    """
    ego_position = np.asarray(ego_position, dtype=float)[..., None, :]
    ego_heading = np.asarray(ego_heading, dtype=float)[..., None]
    rel_position = np.asarray(position, dtype=float) - ego_position
    rel_velocity = _velocity(speed, heading) - _velocity(np.asarray(ego_speed, dtype=float)[..., None], ego_heading)

    if cfg.metric == CostMetric.TTC:
        radius_sum = _radius(ego_extent) + _radius(extent)
        ttc = ttc_kernel(rel_position, rel_velocity, radius_sum)
        return 1.0 - np.minimum(ttc / cfg.ttc_cap, 1.0)

    weights = np.array([cfg.weight(kind) for kind in kinds], dtype=float)
    delta = msd_delta(rel_position, rel_velocity, ego_heading)
    if cfg.msd_literal_formula:
        return np.exp(np.minimum(weights * delta / 2.0, MAX_EXPONENT))
    return weights * np.exp(-delta / 2.0)


def rule_violations(map_context: MapContext, ego_position, ego_heading, ego_speed,
                    ego_extent: Sequence[float]) -> np.ndarray:
    """
    Number of traffic-rule violations of ego poses, broadcast over leading axes.

    Counted violations: driving against the direction of the matched lane
    (heading difference above pi/2), being more than OFF_LANE_DISTANCE from
    every lane, and having the footprint on a red light's stop point while
    moving. Maps without lanes carry no lane rules.
    """
    position = np.asarray(ego_position, dtype=float)
    shape = position.shape[:-1]
    flat = position.reshape(-1, 2)
    heading = np.broadcast_to(np.asarray(ego_heading, dtype=float), shape).reshape(-1)
    speed = np.broadcast_to(np.asarray(ego_speed, dtype=float), shape).reshape(-1)
    count = np.zeros(len(flat))
    rows = np.arange(len(flat))

    if map_context.lanes:
        distances, misalignments = [], []
        for lane in map_context.lanes:
            _, lateral, tangent = lane_polyline(lane).project(flat)
            distances.append(np.abs(lateral))
            misalignments.append(np.abs(wrap_angles(heading - tangent)))
        distance = np.stack(distances)
        misalignment = np.stack(misalignments)
        within = distance <= LANE_HALF_WIDTH
        best_within = np.where(within, misalignment, np.inf).min(axis=0)
        nearest = misalignment[np.argmin(distance, axis=0), rows]
        matched = np.where(within.any(axis=0), best_within, nearest)
        off_lane = distance.min(axis=0) > OFF_LANE_DISTANCE
        count += np.where(off_lane, 1.0, (matched > _ALIGNED).astype(float))

    half_length = float(ego_extent[0])
    for light in map_context.traffic_lights:
        if light.state != LightState.RED:
            continue
        lane = map_context.lane(light.lane)
        if lane is None:
            continue
        s, lateral, _ = lane_polyline(lane).project(flat)
        on_stop_point = (np.abs(s - light.stop_s) <= half_length) & (np.abs(lateral) < LANE_HALF_WIDTH)
        count += (on_stop_point & (speed > 0.0)).astype(float)

    return count.reshape(shape)


def rule_penalty(world: WorldState) -> int:
    """Count of active ego traffic-rule violations"""
    ego = world.ego
    return int(rule_violations(world.map, ego.position, ego.heading, ego.speed, ego.extent))


def _aggregate(risk: np.ndarray, violations: np.ndarray, cfg: CostConfig) -> np.ndarray:
    worst = risk.max(axis=-1) if risk.shape[-1] else np.zeros(risk.shape[:-1])
    return worst + cfg.rule_penalty * violations


def batch_costs(batch: SceneBatch, cfg: CostConfig) -> np.ndarray:
    """Cost of each scene in a batch, shape (n,)"""
    risk = _agent_risk(batch.ego_position, batch.ego_heading, batch.ego_speed, batch.ego_extent,
                       batch.position, batch.heading, batch.speed, batch.extent, batch.kinds, cfg)
    violations = _ego_violations(batch.map, batch.ego_position, batch.ego_heading, batch.ego_speed,
                                 batch.ego_extent)
    return _aggregate(risk, violations, cfg)


def rollout_costs(rollout: Rollout, cfg: CostConfig) -> np.ndarray:
    """Cost of every predicted scene of a rollout, shape (T, n)"""
    batch = rollout.batch
    extent = np.broadcast_to(batch.extent, rollout.position.shape)
    risk = _agent_risk(rollout.ego_position, rollout.ego_heading, rollout.ego_speed, batch.ego_extent,
                       rollout.position, rollout.heading, rollout.speed, extent, batch.kinds, cfg)
    violations = _ego_violations(batch.map, rollout.ego_position, rollout.ego_heading, rollout.ego_speed,
                                 batch.ego_extent)
    return _aggregate(risk, violations, cfg)


def _ego_violations(map_context: MapContext, ego_position, ego_heading, ego_speed, ego_extent) -> np.ndarray:
    """rule_violations over (..., n) ego poses, evaluated once when all n samples agree"""
    ego_position = np.asarray(ego_position, dtype=float)
    if not map_context.lanes and not map_context.traffic_lights:
        return np.zeros(ego_position.shape[:-1])
    sample_axis = ego_position.ndim - 2
    first = np.take(ego_position, [0], axis=sample_axis)
    first_heading = np.take(ego_heading, [0], axis=sample_axis)
    first_speed = np.take(ego_speed, [0], axis=sample_axis)
    if (np.array_equal(np.broadcast_to(first, ego_position.shape), ego_position)
            and np.array_equal(np.broadcast_to(first_heading, np.shape(ego_heading)), ego_heading)
            and np.array_equal(np.broadcast_to(first_speed, np.shape(ego_speed)), ego_speed)):
        shared = rule_violations(map_context, first, first_heading, first_speed, ego_extent)
        return np.broadcast_to(shared, ego_position.shape[:-1])
    return rule_violations(map_context, ego_position, ego_heading, ego_speed, ego_extent)


def ttc_cost(world: WorldState, cfg: CostConfig) -> float:
    return scene_cost(world, cfg.model_copy(update={"metric": CostMetric.TTC}))


def msd_cost(world: WorldState, cfg: CostConfig) -> float:
    return scene_cost(world, cfg.model_copy(update={"metric": CostMetric.MSD}))


def scene_cost(world: WorldState, cfg: CostConfig) -> float:
    """Cost of one scene under the configured metric"""
    return float(batch_costs(SceneBatch.from_world(world, 1), cfg)[0])
