"""
Multimodal kinematic trajectory predictor and the cost-sampling pipeline.

Each agent commits to one intent mode per rollout and is integrated with
semi-implicit Euler under Gaussian heading and acceleration perturbations.
The ego follows the supplied plan, rigidly moved onto each sample's ego pose.

Random numbers are drawn per agent id from child streams as arrays with the
sample index as leading axis, so sample i at step t depends only on (seed, agent id, t, i)
and two scene batches rolled out from the same stream share the noise of the
agents they have in common.
"""
from typing import List, Optional

import numpy as np

from app.core.errors import ParameterError
from app.core.logging_config import get_logger
from app.schemas.config import CostConfig, PredictorConfig
from app.schemas.sampling import CostSampleRequest
from app.schemas.world import EgoPlan, WorldHistory, WorldState
from app.services.costs import rollout_costs
from app.services.geometry import heading_vector, wrap_angles
from app.services.plausible import generate_plausible_batch
from app.services.rng import RandomStream
from app.services.scene_batch import Rollout, SceneBatch

logger = get_logger(__name__)


def _ego_rollout(batch: SceneBatch, plan: EgoPlan, steps: int):
    """Plan poses moved rigidly from the plan origin onto every sample's ego pose"""
    origin = plan.origin
    poses = plan.poses[:steps]
    plan_xy = np.array([pose.position for pose in poses], dtype=float)           # (T, 2)
    plan_heading = np.array([pose.heading for pose in poses], dtype=float)       # (T,)
    plan_speed = np.array([pose.speed for pose in poses], dtype=float)           # (T,)

    rotation = batch.ego_heading - origin.heading                                # (n,)
    c, s = np.cos(rotation), np.sin(rotation)
    local = plan_xy - np.asarray(origin.position, dtype=float)                   # (T, 2)
    x = c[None, :] * local[:, None, 0] - s[None, :] * local[:, None, 1]
    y = s[None, :] * local[:, None, 0] + c[None, :] * local[:, None, 1]
    position = batch.ego_position[None, :, :] + np.stack([x, y], axis=-1)        # (T, n, 2)
    heading = wrap_angles(plan_heading[:, None] + rotation[None, :])
    speed = np.broadcast_to(plan_speed[:, None], (len(poses), batch.n)).copy()
    return position, heading, speed


def _agent_noise(stream: RandomStream, agent_id: str, cfg: PredictorConfig, n: int, steps: int):
    """
    Intent accelerations (n,) and per-step heading and acceleration noise (n, T).

    Every step draws from its own child stream, so the noise of sample i at
    step t does not change with the rollout length.
    """
    agent_stream = stream.child("agent", agent_id)
    probabilities = np.array([mode.probability for mode in cfg.intent_modes])
    accels = np.array([mode.accel for mode in cfg.intent_modes])
    cumulative = np.cumsum(probabilities)
    draws = agent_stream.child("intent").uniform(n)
    intent = np.minimum(np.searchsorted(cumulative, draws, side="right"), len(accels) - 1)
    heading_noise = np.stack([agent_stream.child("heading", t).normal(0.0, 1.0, n) for t in range(steps)], axis=1)
    accel_noise = np.stack([agent_stream.child("accel", t).normal(0.0, 1.0, n) for t in range(steps)], axis=1)
    return accels[intent], heading_noise, accel_noise


def rollout(batch: SceneBatch, plan: EgoPlan, cfg: PredictorConfig, stream: RandomStream,
            steps: Optional[int] = None) -> Rollout:
    """
    One Monte-Carlo future per scene of the batch.

    Args:
        batch: n scenes to roll out
        plan: ego plan, at least `steps` poses long
        cfg: predictor configuration
        stream: random stream; agent noise is keyed by agent id below it
        steps: number of steps, defaults to min(cfg.horizon, plan.horizon)

    Returns:
        Rollout with (T, n, ...) arrays
    """
    if abs(plan.dt - cfg.dt) > 1e-9:
        raise ParameterError(f"plan step {plan.dt} s differs from predictor step {cfg.dt} s")
    steps = min(cfg.horizon, plan.horizon) if steps is None else steps
    if steps < 1 or steps > plan.horizon:
        raise ParameterError(f"cannot roll out {steps} steps of a {plan.horizon}-step plan")

    n, k, dt = batch.n, batch.k, cfg.dt
    ego_position, ego_heading, ego_speed = _ego_rollout(batch, plan, steps)

    position = np.empty((steps, n, k, 2))
    heading = np.empty((steps, n, k))
    speed = np.empty((steps, n, k))
    if k:
        noise = [_agent_noise(stream, agent_id, cfg, n, steps) for agent_id in batch.agent_ids]
        accel = np.stack([item[0] for item in noise], axis=1)                        # (n, k)
        heading_noise = np.stack([item[1] for item in noise], axis=-1)               # (n, T, k)
        accel_noise = np.stack([item[2] for item in noise], axis=-1)
        heading_step = cfg.heading_noise_std * np.sqrt(dt)

        current_position = batch.position.copy()
        current_heading = batch.heading.copy()
        current_speed = batch.speed.copy()
        for t in range(steps):
            current_heading = current_heading + heading_step * heading_noise[:, t]
            current_speed = np.maximum(
                current_speed + (accel + cfg.accel_noise_std * accel_noise[:, t]) * dt, 0.0
            )
            current_position = current_position + (current_speed * dt)[..., None] * heading_vector(current_heading)
            position[t] = current_position
            heading[t] = wrap_angles(current_heading)
            speed[t] = current_speed

    return Rollout(
        batch=batch,
        dt=dt,
        ego_position=ego_position,
        ego_heading=ego_heading,
        ego_speed=ego_speed,
        position=position,
        heading=heading,
        speed=speed,
    )


def sample_future(history: WorldHistory, plan: EgoPlan, cfg: PredictorConfig,
                  stream: RandomStream) -> List[WorldState]:
    """One predicted future of the current scene: T world states at dt, ..., T*dt"""
    batch = SceneBatch.from_world(history.current, 1)
    return rollout(batch, plan, cfg, stream).worlds(0)


def cost_matrix(batch: SceneBatch, plan: EgoPlan, predictor: PredictorConfig, cost: CostConfig,
                stream: RandomStream, steps: Optional[int] = None) -> np.ndarray:
    """Costs of the rolled-out batch at every lookahead, shape (T, n)"""
    return rollout_costs(rollout(batch, plan, predictor, stream, steps), cost)


def cost_samples(req: CostSampleRequest) -> List[float]:
    """
    n cost samples at lookahead tau.

    Without faults the samples roll out the perceived scene; with faults each
    sample first draws one plausible scene.
    """
    stream = RandomStream(req.seed)
    current = req.history.current
    if req.faults:
        batch = generate_plausible_batch(current, req.faults, req.hints, req.noise,
                                         stream.child("plausible"), req.n)
    else:
        batch = SceneBatch.from_world(current, req.n)
    logger.debug(f"Sampling {req.n} costs at tau={req.tau} over {batch.k} agents")
    costs = cost_matrix(batch, req.plan, req.predictor, req.cost, stream.child("predict"), steps=req.tau)
    return costs[req.tau - 1].tolist()
