import json
import math
from pathlib import Path
from typing import List, Optional

import pytest

from app.schemas.config import DetectorParams, MonitorConfig, PredictorConfig
from app.schemas.world import (
    AgentKind,
    AgentState,
    EgoState,
    Lane,
    LightState,
    MapContext,
    TrafficLight,
    WorldState,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def straight_map(lights: Optional[List[TrafficLight]] = None) -> MapContext:
    """One eastbound lane along the x axis from x=-50 to x=400"""
    lane = Lane(id="main", centerline=[(-50.0, 0.0), (400.0, 0.0)], speed_limit=10.0)
    return MapContext(lanes=[lane], traffic_lights=lights or [])


def red_light(stop_s: float = 50.0, state: LightState = LightState.RED) -> TrafficLight:
    return TrafficLight(id="signal", lane="main", stop_s=stop_s, state=state)


def ego_at(x: float = 0.0, y: float = 0.0, heading: float = 0.0, speed: float = 10.0) -> EgoState:
    return EgoState(position=(x, y), heading=heading, speed=speed, extent=(2.4, 1.0), route=["main"])


def agent(agent_id: str, x: float, y: float, heading: float = 0.0, speed: float = 0.0,
          kind: AgentKind = AgentKind.VEHICLE, extent=(2.4, 1.0)) -> AgentState:
    return AgentState(id=agent_id, kind=kind, position=(x, y), heading=heading, speed=speed, extent=extent)


def crossing_pedestrian() -> AgentState:
    return agent("ped", 34.0, -5.0, heading=math.pi / 2, speed=1.5, kind=AgentKind.PEDESTRIAN,
                 extent=(0.3, 0.3))


def world(agents=(), ego: Optional[EgoState] = None, map_context: Optional[MapContext] = None,
          time: float = 0.0) -> WorldState:
    return WorldState(
        time=time,
        ego=ego or ego_at(),
        agents=list(agents),
        map=map_context if map_context is not None else straight_map(),
    )


@pytest.fixture
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture
def road_world() -> WorldState:
    """Ego at 10 m/s on an empty straight road"""
    return world()


@pytest.fixture
def quick_corpus(tmp_path) -> Path:
    """Two half-second scenarios copied from the bundled corpus"""
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for name in ("no_fault", "missing_inpath_static"):
        data = json.loads((SCENARIO_DIR / f"{name}.json").read_text(encoding="utf-8"))
        data["duration"] = 0.5
        (corpus / f"{name}.json").write_text(json.dumps(data), encoding="utf-8")
    return corpus


@pytest.fixture
def quick_config():
    return MonitorConfig(detector=DetectorParams(n=20), predictor=PredictorConfig(horizon=5))
