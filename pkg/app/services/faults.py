"""
Fault injection: turns the ground-truth stream into the perceived stream.

Each FaultSpec gets a schedule of activity intervals; while active, `inject`
corrupts a copy of the truth scene and returns the hint the plausible-scene
generator needs to undo the corruption. The truth scene is never modified.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import FaultResolutionError
from app.schemas.faults import FaultSchedule, TruthHint
from app.schemas.world import (
    AgentKind,
    AgentState,
    FaultMode,
    FaultParams,
    FaultSpec,
    FaultSubtype,
    LightState,
    ScheduleKind,
    WorldState,
)
from app.services.geometry import normalize_heading
from app.services.lanes import Route
from app.services.rng import RandomStream

DEFAULT_ACTIVATION_RATE = 0.25  # per second
MIN_ACTIVE_SECONDS = 1.0
GHOST_AHEAD = 15.0  # m along the route when no offset is given
GHOST_LATERAL = 8.0  # m off the route for not-in-path ghosts
NOT_IN_PATH_MIN_LATERAL = 5.0
MIN_SCALE = 0.1

DEFAULT_EXTENTS = {
    AgentKind.VEHICLE: (2.4, 1.0),
    AgentKind.PEDESTRIAN: (0.3, 0.3),
    AgentKind.BICYCLE: (0.9, 0.3),
}

_MODE_DEFAULTS = {
    FaultMode.MISDETECT_ORIENTATION: {"mean": math.pi / 6, "std": 0.1},
    FaultMode.MISDETECT_SIZE: {"mean": 1.5, "std": 0.1},
    FaultMode.MISDETECT_VELOCITY: {"mean": -4.0, "std": 0.5, "heading_mean": 0.0, "heading_std": 0.0},
    FaultMode.MISLOCALIZATION: {"offset": (1.0, 1.0), "std": 0.2, "heading_mean": 0.0, "heading_std": 0.05},
}


def resolve_params(spec: FaultSpec) -> FaultParams:
    """Fault parameters with per-mode defaults filled in"""
    params = spec.params
    updates = {
        name: value
        for name, value in _MODE_DEFAULTS.get(spec.mode, {}).items()
        if getattr(params, name) is None
    }
    if spec.mode == FaultMode.GHOST_OBSTACLE and params.offset is None:
        lateral = GHOST_LATERAL if spec.subtype == FaultSubtype.NOT_IN_PATH else 0.0
        updates["offset"] = (GHOST_AHEAD, lateral)
    if params.activation_rate is None:
        updates["activation_rate"] = DEFAULT_ACTIVATION_RATE
    return params.model_copy(update=updates)


def schedule_faults(spec: FaultSpec, duration: float, dt: float, stream: RandomStream) -> FaultSchedule:
    """
    Activity intervals of one fault over a scenario.

    Static faults are active for the whole scenario. Dynamic faults switch on
    at each step with probability 1 - (1 - rate)^dt, only while at least one
    second of the scenario remains, stay on for at least one second and then
    switch off with the same per-step probability.
    """
    steps = int(round(duration / dt))
    if spec.schedule == ScheduleKind.STATIC:
        return FaultSchedule(dt=dt, intervals=[(0.0, steps * dt)])

    rate = resolve_params(spec).activation_rate
    step_probability = 1.0 - (1.0 - min(max(rate, 0.0), 1.0)) ** dt
    min_steps = int(math.ceil(MIN_ACTIVE_SECONDS / dt - 1e-9))
    draws = stream.uniform(steps)

    intervals: List[Tuple[float, float]] = []
    on_step: Optional[int] = None
    for step in range(steps):
        if on_step is None:
            if steps - step >= min_steps and draws[step] < step_probability:
                on_step = step
        elif step - on_step >= min_steps and draws[step] < step_probability:
            intervals.append((on_step * dt, step * dt))
            on_step = None
    if on_step is not None:
        intervals.append((on_step * dt, steps * dt))
    return FaultSchedule(dt=dt, intervals=intervals)


def _target_agent(truth: WorldState, spec: FaultSpec) -> AgentState:
    agent = truth.agent(spec.target) if spec.target else None
    if agent is None:
        raise FaultResolutionError(f"{spec.mode.value} fault targets unknown agent '{spec.target}'")
    return agent


def _replace_agent(truth: WorldState, agent: AgentState) -> WorldState:
    agents = [agent if other.id == agent.id else other for other in truth.agents]
    return truth.model_copy(update={"agents": agents})


def ghost_id(spec: FaultSpec, fault_index: int) -> str:
    return spec.target or f"ghost-{fault_index}"


def ghost_state(truth: WorldState, spec: FaultSpec, fault_index: int = 0) -> AgentState:
    """Fabricated obstacle placed along the ego route, moving along it at params.speed"""
    params = resolve_params(spec)
    if not truth.ego.route:
        raise FaultResolutionError("ghost obstacle needs an ego route to be placed on")
    try:
        route = Route(truth.map, truth.ego.route)
    except KeyError as exc:
        raise FaultResolutionError(f"ego route references unknown lane {exc}") from None
    s = params.offset[0] + params.speed * truth.time
    x, y = route.polyline.offset_point(s, params.offset[1])
    _, tangent = route.polyline.interpolate(s)
    return AgentState(
        id=ghost_id(spec, fault_index),
        kind=params.kind,
        position=(x, y),
        heading=float(tangent),
        speed=params.speed,
        extent=DEFAULT_EXTENTS[params.kind],
    )


def inject(truth: WorldState, spec: FaultSpec, active: bool, stream: RandomStream,
           fault_index: int = 0) -> Tuple[WorldState, Optional[TruthHint]]:
    """
    Corrupt a truth scene with one fault.

    Noise is drawn from `stream` alone, so passing the same stream at every
    step keeps a fault's corruption constant over the scenario.

    Returns:
        (perceived scene, hint); the hint is None when the fault is inactive
    """
    if not active:
        return truth, None
    params = resolve_params(spec)
    mode = spec.mode
    hint = {"fault_index": fault_index, "mode": mode}

    if mode == FaultMode.MISDETECT_ORIENTATION:
        agent = _target_agent(truth, spec)
        offset = float(stream.child("heading").normal(params.mean, params.std))
        perceived = _replace_agent(truth, agent.model_copy(update={"heading": _wrap(agent.heading + offset)}))
        return perceived, TruthHint(agent=agent, **hint)

    if mode == FaultMode.MISDETECT_SIZE:
        agent = _target_agent(truth, spec)
        scale = max(float(stream.child("scale").normal(params.mean, params.std)), MIN_SCALE)
        extent = (agent.extent[0] * scale, agent.extent[1] * scale)
        return _replace_agent(truth, agent.model_copy(update={"extent": extent})), TruthHint(agent=agent, **hint)

    if mode == FaultMode.MISDETECT_VELOCITY:
        agent = _target_agent(truth, spec)
        speed = max(agent.speed + float(stream.child("speed").normal(params.mean, params.std)), 0.0)
        heading = agent.heading + float(stream.child("heading").normal(params.heading_mean, params.heading_std))
        perceived = _replace_agent(truth, agent.model_copy(update={"speed": speed, "heading": _wrap(heading)}))
        return perceived, TruthHint(agent=agent, **hint)

    if mode == FaultMode.MISDETECT_TRAFFIC_LIGHT:
        light = truth.map.light(spec.target) if spec.target else None
        if light is None:
            raise FaultResolutionError(f"traffic light fault targets unknown light '{spec.target}'")
        flipped = LightState.GREEN if light.state == LightState.RED else LightState.RED
        lights = [item.model_copy(update={"state": flipped}) if item.id == light.id else item
                  for item in truth.map.traffic_lights]
        perceived = truth.model_copy(update={"map": truth.map.model_copy(update={"traffic_lights": lights})})
        return perceived, TruthHint(light_id=light.id, light_state=light.state, **hint)

    if mode == FaultMode.GHOST_OBSTACLE:
        ghost = ghost_state(truth, spec, fault_index)
        if truth.agent(ghost.id) is not None:
            raise FaultResolutionError(f"ghost id '{ghost.id}' collides with a real agent")
        perceived = truth.model_copy(update={"agents": [*truth.agents, ghost]})
        return perceived, TruthHint(ghost_id=ghost.id, **hint)

    if mode == FaultMode.MISSING_OBSTACLE:
        agent = _target_agent(truth, spec)
        agents = [other for other in truth.agents if other.id != agent.id]
        return truth.model_copy(update={"agents": agents}), TruthHint(agent=agent, **hint)

    if mode == FaultMode.MISLOCALIZATION:
        ego = truth.ego
        offset = stream.child("position").normal(np.asarray(params.offset), params.std)
        dheading = float(stream.child("heading").normal(params.heading_mean, params.heading_std))
        shifted = ego.model_copy(update={
            "position": (ego.position[0] + float(offset[0]), ego.position[1] + float(offset[1])),
            "heading": _wrap(ego.heading + dheading),
        })
        perceived = truth.model_copy(update={"ego": shifted})
        ego_offset = (float(offset[0]), float(offset[1]), float(dheading))
        return perceived, TruthHint(ego=ego, ego_offset=ego_offset, **hint)

    raise FaultResolutionError(f"unsupported fault mode {mode}")


def _wrap(theta: float) -> float:
    return normalize_heading(float(theta))


def apply_faults(truth: WorldState, faults: Sequence[FaultSpec], schedules: Sequence[FaultSchedule], step: int,
                 stream: RandomStream) -> Tuple[WorldState, List[int], List[TruthHint]]:
    """
    Perceived scene at one step with every scheduled fault applied in list order.

    Returns:
        (perceived scene, indices of active faults, their hints)
    """
    perceived = truth
    active: List[int] = []
    hints: List[TruthHint] = []
    for index, (spec, schedule) in enumerate(zip(faults, schedules)):
        is_active = schedule.active_at(step)
        perceived, hint = inject(perceived, spec, is_active, stream.child("fault", index), index)
        if hint is not None:
            active.append(index)
            hints.append(hint)
    return perceived, active, hints
