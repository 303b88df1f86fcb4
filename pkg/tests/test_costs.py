import math

import numpy as np
import pytest

from app.schemas.config import CostConfig, CostMetric
from app.schemas.world import AgentKind, LightState, MapContext
from app.services.costs import (
    batch_costs,
    decompose,
    msd_cost,
    rule_penalty,
    scene_cost,
    ttc_cost,
    ttc_kernel,
    ttc_pair,
)
from app.services.scene_batch import SceneBatch
from tests.conftest import agent, ego_at, red_light, straight_map, world

UNIT_DISC = (0.6, 0.8)  # circumscribed radius 1.0
NO_PENALTY = CostConfig(rule_penalty=0.0)


def head_on(distance: float = 30.0):
    ego = ego_at(speed=5.0).model_copy(update={"extent": UNIT_DISC})
    other = agent("oncoming", distance, 0.0, heading=math.pi, speed=5.0, extent=UNIT_DISC)
    return ego, other


def test_ttc_head_on():
    ego, other = head_on()
    assert ttc_pair(ego, other) == pytest.approx(2.8)


def test_ttc_receding_and_overlapping():
    ego, _ = head_on()
    assert ttc_pair(ego, agent("away", 30.0, 0.0, speed=15.0, extent=UNIT_DISC)) == math.inf
    assert ttc_pair(ego, agent("touching", 1.0, 0.0, extent=UNIT_DISC)) == 0.0


def test_ttc_kernel_broadcasts():
    rel_position = np.array([[30.0, 0.0], [7.0, 0.0], [-30.0, 0.0]])
    rel_velocity = np.array([[-10.0, 0.0], [-10.0, 0.0], [-10.0, 0.0]])
    ttc = ttc_kernel(rel_position, rel_velocity, np.full(3, 2.0))
    assert ttc[:2].tolist() == pytest.approx([2.8, 0.5])
    assert ttc[2] == math.inf


def test_ttc_cost_single_agent():
    ego, other = head_on()
    scene = world([other], ego=ego, map_context=MapContext())
    assert ttc_cost(scene, NO_PENALTY) == pytest.approx(1 - 2.8 / 3, abs=1e-4)
    assert ttc_cost(scene, NO_PENALTY) == pytest.approx(0.0667, abs=1e-4)


def test_ttc_cost_most_dangerous_agent_dominates():
    ego, near = head_on(distance=7.0)
    receding = agent("behind", -30.0, 0.0, heading=math.pi, speed=5.0, extent=UNIT_DISC)
    scene = world([near, receding], ego=ego, map_context=MapContext())
    assert ttc_cost(scene, NO_PENALTY) == pytest.approx(1 - 0.5 / 3, abs=1e-4)


def test_empty_scene_costs_nothing():
    scene = world([], map_context=MapContext())
    assert ttc_cost(scene, CostConfig()) == 0.0
    assert msd_cost(scene, CostConfig()) == 0.0


def test_decompose():
    assert decompose((1.0, 0.0), 0.0) == pytest.approx((1.0, 0.0))
    parallel, perpendicular = decompose((1.0, 0.0), math.pi / 2)
    assert parallel == pytest.approx(0.0, abs=1e-12)
    assert perpendicular == pytest.approx(-1.0)


def test_msd_zero_relative_velocity():
    scene = world([agent("lead", 20.0, 0.0, speed=10.0)], map_context=MapContext())
    assert msd_cost(scene, NO_PENALTY) == pytest.approx(0.5)


def test_msd_pedestrian_formula():
    pedestrian = agent("ped", 2.0, 0.0, speed=1.0, kind=AgentKind.PEDESTRIAN, extent=(0.3, 0.3))
    scene = world([pedestrian], ego=ego_at(speed=0.0), map_context=MapContext())
    assert msd_cost(scene, NO_PENALTY) == pytest.approx(math.exp(-2.0))
    literal = NO_PENALTY.model_copy(update={"msd_literal_formula": True})
    assert msd_cost(scene, literal) == pytest.approx(math.exp(2.0))


def test_msd_red_light_penalty_only():
    scene = world([], map_context=straight_map([red_light(stop_s=50.0)]))
    assert msd_cost(scene, CostConfig(rule_penalty=1.0)) == pytest.approx(1.0)


def test_rule_penalty_cases():
    green = straight_map([red_light(stop_s=50.0, state=LightState.GREEN)])
    red = straight_map([red_light(stop_s=50.0)])
    assert rule_penalty(world([], map_context=green)) == 0
    assert rule_penalty(world([], ego=ego_at(heading=math.pi), map_context=green)) == 1
    assert rule_penalty(world([], ego=ego_at(heading=math.pi), map_context=red)) == 2


def test_rule_penalty_edge_cases():
    red = straight_map([red_light(stop_s=50.0)])
    # stopped on the stop point
    assert rule_penalty(world([], ego=ego_at(speed=0.0), map_context=red)) == 0
    # far from every lane
    assert rule_penalty(world([], ego=ego_at(y=20.0), map_context=straight_map())) == 1
    assert rule_penalty(world([], map_context=MapContext())) == 0


def test_batch_costs_match_scene_cost():
    scene = world([agent("lead", 20.0, 0.5, speed=8.0),
                   agent("ped", 30.0, -3.0, heading=1.0, speed=1.0, kind=AgentKind.PEDESTRIAN)])
    for metric in CostMetric:
        cfg = CostConfig(metric=metric)
        costs = batch_costs(SceneBatch.from_world(scene, 4), cfg)
        assert costs.shape == (4,)
        assert np.allclose(costs, scene_cost(scene, cfg))
