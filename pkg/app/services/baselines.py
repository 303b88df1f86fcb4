"""Collision-probability baseline detector."""
from typing import Optional

import numpy as np

from app.core.errors import ParameterError
from app.schemas.config import BaselineParams, PredictorConfig
from app.schemas.world import EgoPlan, WorldState
from app.services.geometry import rectangles_overlap
from app.services.predictor import rollout
from app.services.rng import RandomStream
from app.services.scene_batch import Rollout, SceneBatch


def rollout_collisions(future: Rollout) -> np.ndarray:
    """Per-sample flag: the ego footprint touches any agent at any predicted step, shape (n,)"""
    if future.batch.k == 0:
        return np.zeros(future.n, dtype=bool)
    extent = np.broadcast_to(future.batch.extent, future.position.shape)
    overlap = rectangles_overlap(
        future.ego_position[:, :, None, :],
        future.ego_heading[:, :, None],
        future.batch.ego_extent,
        future.position,
        future.heading,
        extent,
    )
    return overlap.any(axis=(0, 2))


def collision_probability(batch: SceneBatch, plan: EgoPlan, cfg: PredictorConfig, stream: RandomStream,
                          steps: Optional[int] = None) -> float:
    """Fraction of the batch's rollouts in which the ego collides within the horizon"""
    if batch.n < 2:
        raise ParameterError("collision probability needs at least two rollouts")
    return float(rollout_collisions(rollout(batch, plan, cfg, stream, steps)).mean())


def scene_collision_probability(world: WorldState, plan: EgoPlan, cfg: PredictorConfig, n: int,
                                seed: int = 0) -> float:
    return collision_probability(SceneBatch.from_world(world, n), plan, cfg, RandomStream(seed))


def baseline_detect(p_perceived: float, p_plausible: float, params: BaselineParams) -> bool:
    """High risk when the plausible scene is more collision-prone than the perceived one and above gamma"""
    return p_plausible > p_perceived and p_plausible > params.gamma
