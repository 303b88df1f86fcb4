"""
Plausible-scene generator.

Given the perceived scene, the active faults and one truth hint per fault,
produce candidate scenes that undo each fault with Gaussian uncertainty from
the NoiseModel. Faults are applied independently in list order; agents no
fault names are copied unchanged.
"""
from dataclasses import replace
from typing import Callable, Dict, List, Sequence

import numpy as np

from app.core.errors import FaultResolutionError, ParameterError
from app.schemas.config import NoiseModel
from app.schemas.faults import TruthHint
from app.schemas.world import FaultMode, FaultSpec, LightState, WorldHistory, WorldState
from app.services.geometry import wrap_angles
from app.services.rng import RandomStream
from app.services.scene_batch import SceneBatch

MIN_HALF_EXTENT = 0.05  # m


def _true_agent(hint: TruthHint, fault: FaultSpec):
    if hint.agent is None:
        raise FaultResolutionError(f"{fault.mode.value} fault on '{fault.target}' carries no agent hint")
    return hint.agent


def _column(batch: SceneBatch, agent_id: str, fault: FaultSpec) -> int:
    try:
        return batch.index_of(agent_id)
    except KeyError:
        raise FaultResolutionError(f"{fault.mode.value} fault references unknown agent '{agent_id}'") from None


def _with_column(array: np.ndarray, j: int, values: np.ndarray) -> np.ndarray:
    updated = array.copy()
    updated[:, j] = values
    return updated


def _restore_missing(batch, fault, hint, noise, stream, n):
    agent = _true_agent(hint, fault)
    if agent.id in batch.agent_ids:
        raise FaultResolutionError(f"missing agent '{agent.id}' is already in the perceived scene")
    position = np.asarray(agent.position) + stream.child("position").normal(0.0, noise.pos_std, (n, 2))
    heading = agent.heading + stream.child("heading").normal(0.0, noise.heading_std, n)
    speed = np.maximum(agent.speed + stream.child("speed").normal(0.0, noise.speed_std, n), 0.0)
    extent = np.broadcast_to(np.asarray(agent.extent, dtype=float), (n, 2)).copy()
    return batch.with_agent(agent.id, agent.kind, position, heading, speed, extent)


def _remove_ghost(batch, fault, hint, noise, stream, n):
    ghost_id = hint.ghost_id or fault.target
    _column(batch, ghost_id, fault)
    return batch.without_agent(ghost_id)


def _restore_orientation(batch, fault, hint, noise, stream, n):
    agent = _true_agent(hint, fault)
    j = _column(batch, agent.id, fault)
    heading = wrap_angles(agent.heading + stream.child("heading").normal(0.0, noise.heading_std, n))
    return replace(batch, heading=_with_column(batch.heading, j, heading))


def _restore_size(batch, fault, hint, noise, stream, n):
    agent = _true_agent(hint, fault)
    j = _column(batch, agent.id, fault)
    extent = np.asarray(agent.extent) + stream.child("extent").normal(0.0, noise.pos_std, (n, 2))
    return replace(batch, extent=_with_column(batch.extent, j, np.maximum(extent, MIN_HALF_EXTENT)))


def _restore_velocity(batch, fault, hint, noise, stream, n):
    agent = _true_agent(hint, fault)
    j = _column(batch, agent.id, fault)
    speed = np.maximum(agent.speed + stream.child("speed").normal(0.0, noise.speed_std, n), 0.0)
    heading = wrap_angles(agent.heading + stream.child("heading").normal(0.0, noise.heading_std, n))
    return replace(
        batch,
        speed=_with_column(batch.speed, j, speed),
        heading=_with_column(batch.heading, j, heading),
    )


def _restore_light(batch, fault, hint, noise, stream, n):
    light_id = hint.light_id or fault.target
    light = batch.map.light(light_id)
    if light is None:
        raise FaultResolutionError(f"traffic light fault references unknown light '{light_id}'")
    if hint.light_state is not None:
        state = hint.light_state
    else:
        state = LightState.GREEN if light.state == LightState.RED else LightState.RED
    lights = [item.model_copy(update={"state": state}) if item.id == light_id else item
              for item in batch.map.traffic_lights]
    return replace(batch, map=batch.map.model_copy(update={"traffic_lights": lights}))


def _restore_localization(batch, fault, hint, noise, stream, n):
    if hint.ego is not None:
        x, y, heading = hint.ego.position[0], hint.ego.position[1], hint.ego.heading
    elif hint.ego_offset is not None:
        dx, dy, dheading = hint.ego_offset
        x = batch.ego_template.position[0] - dx
        y = batch.ego_template.position[1] - dy
        heading = batch.ego_template.heading - dheading
    else:
        raise FaultResolutionError("mislocalization fault carries no ego hint")
    position = np.array([x, y]) + stream.child("position").normal(0.0, noise.pos_std, (n, 2))
    heading = wrap_angles(heading + stream.child("heading").normal(0.0, noise.heading_std, n))
    return replace(batch, ego_position=position, ego_heading=heading)


_RESTORERS: Dict[FaultMode, Callable] = {
    FaultMode.MISSING_OBSTACLE: _restore_missing,
    FaultMode.GHOST_OBSTACLE: _remove_ghost,
    FaultMode.MISDETECT_ORIENTATION: _restore_orientation,
    FaultMode.MISDETECT_SIZE: _restore_size,
    FaultMode.MISDETECT_VELOCITY: _restore_velocity,
    FaultMode.MISDETECT_TRAFFIC_LIGHT: _restore_light,
    FaultMode.MISLOCALIZATION: _restore_localization,
}


def generate_plausible_batch(perceived: WorldState, faults: Sequence[FaultSpec], hints: Sequence[TruthHint],
                             noise: NoiseModel, stream: RandomStream, n: int) -> SceneBatch:
    """
    Draw n plausible scenes at once.

    Raises:
        FaultResolutionError: no faults, or a fault that cannot be applied
        ParameterError: hints do not pair up with faults
    """
    if not faults:
        raise FaultResolutionError("no active faults")
    if len(hints) != len(faults):
        raise ParameterError(f"{len(faults)} faults but {len(hints)} hints")
    batch = SceneBatch.from_world(perceived, n)
    for index, (fault, hint) in enumerate(zip(faults, hints)):
        batch = _RESTORERS[fault.mode](batch, fault, hint, noise, stream.child("fault", index), n)
    return batch


def generate_plausible(perceived: WorldHistory, faults: List[FaultSpec], hints: List[TruthHint],
                       noise: NoiseModel, stream: RandomStream) -> WorldState:
    """One plausible scene for the current perceived state"""
    return generate_plausible_batch(perceived.current, faults, hints, noise, stream, 1).scene(0)
