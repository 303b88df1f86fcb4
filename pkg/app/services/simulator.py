"""
Closed-loop scenario simulator.

The ego and IDM vehicles follow their lanes with the Intelligent Driver Model
longitudinally and pure pursuit laterally; other agents replay a recorded
trajectory or keep a constant velocity. Truth dynamics never look at the
perceived stream: faults only change what the planner and the monitor see.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import ParameterError, ScenarioValidationError
from app.core.logging_config import get_logger
from app.schemas.config import DetectorKind, IdmParams, MonitorConfig
from app.schemas.results import SimLog, StepRecord
from app.schemas.world import (
    AgentPolicy,
    AgentState,
    EgoPlan,
    PlanPose,
    PolicyKind,
    ScenarioSpec,
    WorldState,
)
from app.services.faults import apply_faults, schedule_faults
from app.services.geometry import collision, heading_vector, normalize_heading
from app.services.lanes import LANE_HALF_WIDTH, Route, lane_polyline
from app.services.monitor import RiskMonitor
from app.services.rng import RandomStream
from app.services.scenario_service import validate_scenario

logger = get_logger(__name__)

MAX_STEER = 0.6  # rad

__all__ = ["idm_accel", "plan_ego", "collision", "ego_collides", "advance_truth", "run_scenario"]


def idm_accel(gap: float, speed: float, lead_speed: float, params: IdmParams,
              desired_speed: Optional[float] = None) -> float:
    """
    Intelligent Driver Model acceleration, clamped to [-2b, a].

    Args:
        gap: bumper-to-bumper distance to the leader in m (math.inf on a free road)
        speed: own speed, m/s
        lead_speed: leader speed, m/s
        params: IDM parameters
        desired_speed: cruise speed; params.desired_speed when omitted
    """
    a, b = params.max_accel, params.comfort_decel
    if gap <= 0.0:
        return -2.0 * b
    v0 = desired_speed or params.desired_speed
    if v0 is None:
        raise ParameterError("IDM needs a desired speed")
    desired_gap = params.min_gap + speed * params.time_headway + speed * (speed - lead_speed) / (2.0 * math.sqrt(a * b))
    interaction = 0.0 if math.isinf(gap) else (max(desired_gap, 0.0) / gap) ** 2
    accel = a * (1.0 - (speed / v0) ** params.exponent - interaction)
    return min(max(accel, -2.0 * b), a)


def _leader(route: Route, s_self: float, half_length: float,
            obstacles: Sequence[Tuple[np.ndarray, float, float, float]]) -> Tuple[float, float]:
    """Gap and speed of the nearest obstacle ahead in the route corridor; the route end is a stopped one"""
    gap = route.length - s_self - half_length
    lead_speed = 0.0
    if obstacles:
        positions = np.array([obstacle[0] for obstacle in obstacles])
        s, lateral, tangent = route.polyline.project(positions)
        for j, (_, heading, speed, other_half) in enumerate(obstacles):
            if abs(lateral[j]) >= LANE_HALF_WIDTH or s[j] <= s_self:
                continue
            candidate = s[j] - s_self - half_length - other_half
            if candidate < gap:
                gap = candidate
                lead_speed = max(speed * math.cos(heading - tangent[j]), 0.0)
    return gap, lead_speed


def _follow(route: Route, position: np.ndarray, heading: float, speed: float, half_length: float,
            obstacles, params: IdmParams, desired_speed: float, dt: float) -> Tuple[np.ndarray, float, float]:
    """One IDM + pure-pursuit step along a route"""
    s, _, _ = route.polyline.project(position)
    s = float(s)
    gap, lead_speed = _leader(route, s, half_length, obstacles)
    accel = idm_accel(gap, speed, lead_speed, params, desired_speed)
    new_speed = max(speed + accel * dt, 0.0)

    target, _ = route.polyline.interpolate(s + params.pursuit_lookahead)
    offset = np.asarray(target) - position
    distance = float(np.hypot(offset[0], offset[1]))
    if distance > 1e-6:
        alpha = normalize_heading(math.atan2(offset[1], offset[0]) - heading)
        steer = math.atan2(2.0 * params.wheelbase * math.sin(alpha), distance)
        steer = min(max(steer, -MAX_STEER), MAX_STEER)
        heading = normalize_heading(heading + new_speed * math.tan(steer) / params.wheelbase * dt)
    new_position = position + new_speed * dt * heading_vector(heading)
    return new_position, heading, new_speed


def _obstacle(agent: AgentState, t: float = 0.0):
    """Constant-velocity position of an agent t seconds ahead, with heading, speed and half length"""
    position = np.asarray(agent.position, dtype=float) + agent.speed * t * heading_vector(agent.heading)
    return position, agent.heading, agent.speed, agent.extent[0]


def _ego_route(world: WorldState) -> Route:
    if not world.ego.route:
        raise ParameterError("ego route is empty")
    try:
        return Route(world.map, world.ego.route)
    except KeyError as exc:
        raise ParameterError(f"ego route references unknown lane {exc}") from None


def plan_ego(world: WorldState, params: IdmParams, T: int, dt: float) -> EgoPlan:
    """
    IDM plan along the ego route over T steps.

    Agents are extrapolated at constant velocity; the nearest one ahead inside
    the route corridor is the leader. The end of the route acts as a stopped
    leader, so the plan holds its final pose once the route is exhausted.
    """
    if T < 1:
        raise ParameterError("plan horizon must be at least one step")
    ego = world.ego
    route = _ego_route(world)
    position = np.asarray(ego.position, dtype=float)
    heading, speed = ego.heading, ego.speed
    poses: List[PlanPose] = []
    for step in range(T):
        obstacles = [_obstacle(agent, step * dt) for agent in world.agents]
        desired = params.desired_speed or route.speed_limit_at(float(route.polyline.project(position)[0]))
        position, heading, speed = _follow(route, position, heading, speed, ego.extent[0], obstacles,
                                           params, desired, dt)
        poses.append(PlanPose(position=(float(position[0]), float(position[1])), heading=heading, speed=speed))
    origin = PlanPose(position=ego.position, heading=ego.heading, speed=ego.speed)
    return EgoPlan(dt=dt, origin=origin, poses=poses)


def ego_collides(world: WorldState) -> bool:
    footprint = world.ego.footprint
    return any(collision(footprint, agent.footprint) for agent in world.agents)


def _match_lane(world: WorldState, agent: AgentState) -> Optional[str]:
    """Closest lane within the lane half width whose travel direction agrees with the agent heading"""
    best, best_distance = None, LANE_HALF_WIDTH
    for lane in world.map.lanes:
        _, lateral, tangent = lane_polyline(lane).project(np.asarray(agent.position, dtype=float))
        aligned = abs(normalize_heading(agent.heading - float(tangent))) <= math.pi / 2
        if aligned and abs(float(lateral)) <= best_distance:
            best, best_distance = lane.id, abs(float(lateral))
    return best


def _replay(agent: AgentState, policy: AgentPolicy, t: float, dt: float) -> AgentState:
    """State at time t from recorded waypoints, or constant velocity without a trajectory"""
    if not policy.trajectory:
        position = np.asarray(agent.position) + agent.speed * dt * heading_vector(agent.heading)
        return agent.model_copy(update={"position": (float(position[0]), float(position[1]))})

    waypoints = sorted(policy.trajectory, key=lambda waypoint: waypoint.t)
    times = np.array([waypoint.t for waypoint in waypoints])
    xs = np.array([waypoint.position[0] for waypoint in waypoints])
    ys = np.array([waypoint.position[1] for waypoint in waypoints])
    x, y = float(np.interp(t, times, xs)), float(np.interp(t, times, ys))
    if len(waypoints) < 2 or t >= times[-1] or t < times[0]:
        return agent.model_copy(update={"position": (x, y), "speed": 0.0})
    segment = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    dx, dy = xs[segment + 1] - xs[segment], ys[segment + 1] - ys[segment]
    duration = times[segment + 1] - times[segment]
    length = math.hypot(dx, dy)
    heading = math.atan2(dy, dx) if length > 1e-9 else agent.heading
    return agent.model_copy(update={
        "position": (x, y),
        "heading": normalize_heading(heading),
        "speed": length / duration if duration > 0 else 0.0,
    })


def advance_truth(world: WorldState, spec: ScenarioSpec, params: IdmParams, dt: float,
                  time: Optional[float] = None) -> WorldState:
    """Ground-truth world one step later"""
    time = world.time + dt if time is None else time
    pose = plan_ego(world, params, 1, dt).poses[0]
    ego = world.ego.model_copy(update={"position": pose.position, "heading": pose.heading, "speed": pose.speed})

    agents = []
    for agent in world.agents:
        policy = spec.policy_for(agent)
        lane_id = (policy.lane or _match_lane(world, agent)) if policy.kind == PolicyKind.IDM else None
        if lane_id is None:
            agents.append(_replay(agent, policy, time, dt))
            continue
        route = Route(world.map, [lane_id])
        obstacles = [_obstacle(other) for other in world.agents if other.id != agent.id]
        obstacles.append(_obstacle(world.ego))
        desired = policy.desired_speed or route.speed_limit_at(float(route.polyline.project(agent.position)[0]))
        position, heading, speed = _follow(route, np.asarray(agent.position, dtype=float), agent.heading,
                                           agent.speed, agent.extent[0], obstacles, params, desired, dt)
        agents.append(agent.model_copy(update={
            "position": (float(position[0]), float(position[1])),
            "heading": heading,
            "speed": speed,
        }))
    return world.model_copy(update={"time": time, "ego": ego, "agents": agents})


def run_scenario(spec: ScenarioSpec, config: MonitorConfig, seed: int = 0,
                 kind: Optional[DetectorKind] = None) -> SimLog:
    """
    Simulate a scenario step by step and run the monitor whenever a fault is active.

    Raises:
        ScenarioValidationError: the scenario violates its invariants; nothing is simulated
    """
    violations = validate_scenario(spec)
    if violations:
        raise ScenarioValidationError(violations, source=spec.id)
    kind = kind or config.kind
    stream = RandomStream(seed)
    schedules = [
        schedule_faults(fault, spec.duration, spec.dt, stream.child("schedule", index))
        for index, fault in enumerate(spec.faults)
    ]
    monitor = RiskMonitor(config, seed, kind)
    inject_stream = stream.child("inject")
    logger.info(f"Running scenario {spec.id}: {spec.steps} steps, {len(spec.faults)} faults, detector={kind.value}")

    truth = spec.initial_world
    records: List[StepRecord] = []
    for step in range(spec.steps):
        perceived, active, hints = apply_faults(truth, spec.faults, schedules, step, inject_stream)
        plan = plan_ego(perceived, config.idm, config.predictor.horizon, config.predictor.dt)
        record = {
            "step": step,
            "time": truth.time,
            "truth": truth,
            "perceived": perceived,
            "active_faults": active,
            "plan": plan,
            "collision": ego_collides(truth),
        }
        if active:
            assessment = monitor.assess(step, perceived, plan, [spec.faults[i] for i in active], hints)
            record.update(
                alarm=assessment.alarm,
                lower=assessment.lower,
                upper=assessment.upper,
                tau=assessment.tau,
                prediction_seconds=assessment.prediction_seconds,
                estimation_seconds=assessment.estimation_seconds,
                p_perceived=assessment.p_perceived,
                p_plausible=assessment.p_plausible,
            )
        records.append(StepRecord(**record))
        truth = advance_truth(truth, spec, config.idm, spec.dt, time=(step + 1) * spec.dt)

    log = SimLog(
        scenario_id=spec.id,
        detector=kind,
        gamma=config.baseline.gamma if kind == DetectorKind.COLLISION_PROB else config.detector.gamma,
        steps=records,
        faults=spec.faults,
        schedules=schedules,
    )
    logger.info(
        f"Scenario {spec.id} done: {len(log.alarm_times)} alarm steps, first collision at {log.first_collision_time}"
    )
    return log
