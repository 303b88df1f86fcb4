import math

import pytest

from app.core.errors import ParameterError
from app.schemas.config import BaselineParams, IdmParams, PredictorConfig
from app.services.baselines import baseline_detect, collision_probability, scene_collision_probability
from app.services.rng import RandomStream
from app.services.scene_batch import SceneBatch
from app.services.simulator import plan_ego
from tests.conftest import agent, world


def naive_plan(scene):
    return plan_ego(world(ego=scene.ego), IdmParams(), 30, 0.1)


def test_empty_scene_never_collides():
    scene = world()
    assert scene_collision_probability(scene, naive_plan(scene), PredictorConfig(), n=20) == 0.0


def test_head_on_always_collides():
    scene = world([agent("oncoming", 20.0, 0.0, heading=math.pi, speed=5.0)])
    assert scene_collision_probability(scene, naive_plan(scene), PredictorConfig(), n=50, seed=3) == 1.0


def test_far_agent_behind_never_collides():
    scene = world([agent("behind", -60.0, 0.0, speed=5.0)])
    assert scene_collision_probability(scene, naive_plan(scene), PredictorConfig(), n=50) == 0.0


def test_collision_probability_needs_two_rollouts():
    scene = world()
    with pytest.raises(ParameterError):
        collision_probability(SceneBatch.from_world(scene, 1), naive_plan(scene), PredictorConfig(),
                              RandomStream(0))


@pytest.mark.parametrize("p_perceived,p_plausible,expected", [
    (0.1, 0.95, True),
    (0.95, 0.95, False),
    (0.0, 0.5, False),
    (0.99, 0.92, False),
])
def test_baseline_detect(p_perceived, p_plausible, expected):
    assert baseline_detect(p_perceived, p_plausible, BaselineParams(gamma=0.9)) == expected
