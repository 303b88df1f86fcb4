from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.services.geometry import Footprint, normalize_heading

Vec2 = Tuple[float, float]

SCHEMA_VERSION = 1
EGO_ID = "ego"


class FrozenModel(BaseModel):
    """Immutable value object; unknown keys are rejected when parsing scenario files"""
    model_config = ConfigDict(frozen=True, extra="forbid")


class AgentKind(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    BICYCLE = "bicycle"


class LightState(str, Enum):
    RED = "red"
    GREEN = "green"


class AgentState(FrozenModel):
    """Kinematic state of a non-ego agent at one instant"""
    id: str = Field(description="Agent identifier, unique within a scene")
    kind: AgentKind = AgentKind.VEHICLE
    position: Vec2 = Field(description="Center position in meters")
    heading: float = Field(0.0, description="Heading in radians, normalized to (-pi, pi]")
    speed: float = Field(0.0, description="Speed along the heading in m/s")
    extent: Vec2 = Field((2.4, 1.0), description="Half-length and half-width in meters")

    @field_validator("heading")
    @classmethod
    def _normalize_heading(cls, value: float) -> float:
        return normalize_heading(value)

    @property
    def footprint(self) -> Footprint:
        return Footprint(self.position, self.heading, self.extent)


class EgoState(AgentState):
    """Ego vehicle state plus the ordered list of lanes it intends to follow"""
    id: str = EGO_ID
    route: List[str] = Field(default_factory=list, description="Ordered lane ids")


class Lane(FrozenModel):
    id: str
    centerline: List[Vec2] = Field(description="Polyline in meters, at least two points")
    speed_limit: float = Field(13.9, description="m/s")
    direction: int = Field(1, description="+1: traffic flows along the polyline, -1: against it")


class TrafficLight(FrozenModel):
    id: str
    lane: str = Field(description="Lane carrying the stop point")
    stop_s: float = Field(description="Arc length of the stop point along the lane, in its direction of travel")
    state: LightState = LightState.GREEN


class MapContext(FrozenModel):
    lanes: List[Lane] = Field(default_factory=list)
    traffic_lights: List[TrafficLight] = Field(default_factory=list)

    def lane(self, lane_id: str) -> Optional[Lane]:
        return next((lane for lane in self.lanes if lane.id == lane_id), None)

    def light(self, light_id: str) -> Optional[TrafficLight]:
        return next((light for light in self.traffic_lights if light.id == light_id), None)


class WorldState(FrozenModel):
    """Estimate of the world at one instant"""
    time: float = 0.0
    ego: EgoState
    agents: List[AgentState] = Field(default_factory=list)
    map: MapContext = Field(default_factory=MapContext)

    def agent(self, agent_id: str) -> Optional[AgentState]:
        return next((agent for agent in self.agents if agent.id == agent_id), None)


class WorldHistory(FrozenModel):
    """Time-ordered world states sampled at a fixed step"""
    dt: float = Field(0.1, gt=0)
    states: List[WorldState] = Field(min_length=1)

    @property
    def current(self) -> WorldState:
        return self.states[-1]


class PlanPose(FrozenModel):
    position: Vec2
    heading: float
    speed: float


class EgoPlan(FrozenModel):
    """Future ego poses at steps dt, 2dt, ..., T*dt after the plan origin"""
    dt: float = Field(0.1, gt=0)
    origin: PlanPose = Field(description="Ego pose the plan starts from")
    poses: List[PlanPose] = Field(min_length=1)

    @property
    def horizon(self) -> int:
        return len(self.poses)

    def is_continuous(self, tolerance: float = 0.05) -> bool:
        """Per-step displacement never exceeds the larger endpoint speed times dt plus tolerance"""
        previous = self.origin
        for pose in self.poses:
            step = ((pose.position[0] - previous.position[0]) ** 2
                    + (pose.position[1] - previous.position[1]) ** 2) ** 0.5
            if step > max(pose.speed, previous.speed) * self.dt + tolerance:
                return False
            previous = pose
        return True


class FaultMode(str, Enum):
    MISDETECT_ORIENTATION = "misdetect_orientation"
    MISDETECT_SIZE = "misdetect_size"
    MISDETECT_VELOCITY = "misdetect_velocity"
    MISDETECT_TRAFFIC_LIGHT = "misdetect_traffic_light"
    GHOST_OBSTACLE = "ghost_obstacle"
    MISSING_OBSTACLE = "missing_obstacle"
    MISLOCALIZATION = "mislocalization"


MISDETECT_AGENT_MODES = {
    FaultMode.MISDETECT_ORIENTATION,
    FaultMode.MISDETECT_SIZE,
    FaultMode.MISDETECT_VELOCITY,
}


class FaultSubtype(str, Enum):
    IN_PATH = "in_path"
    NOT_IN_PATH = "not_in_path"
    NONE = "none"


class ScheduleKind(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class FaultParams(FrozenModel):
    """
    Mode-specific noise parameters; None fields take the per-mode defaults.

    - orientation: heading offset ~ N(mean, std)
    - size: extent scale factor ~ N(mean, std)
    - velocity: speed offset ~ N(mean, std); velocity direction offset ~ N(heading_mean, heading_std)
    - mislocalization: position offset ~ N(offset, std^2 I); heading offset ~ N(heading_mean, heading_std)
    - ghost: placement `offset` = (distance ahead along the route, lateral offset); `kind`, `speed`
    """
    mean: Optional[float] = None
    std: Optional[float] = None
    heading_mean: Optional[float] = None
    heading_std: Optional[float] = None
    offset: Optional[Vec2] = None
    kind: AgentKind = AgentKind.VEHICLE
    speed: float = 0.0
    activation_rate: Optional[float] = Field(None, description="Dynamic schedules: per-second activation probability")


class FaultSpec(FrozenModel):
    mode: FaultMode
    subtype: FaultSubtype = FaultSubtype.NONE
    schedule: ScheduleKind = ScheduleKind.STATIC
    target: Optional[str] = Field(None, description="Agent id, light id, or the id given to a ghost")
    params: FaultParams = Field(default_factory=FaultParams)


class PolicyKind(str, Enum):
    IDM = "idm"
    REPLAY = "replay"


class Waypoint(FrozenModel):
    t: float
    position: Vec2


class AgentPolicy(FrozenModel):
    """How the simulator moves an agent: IDM along a lane, or replay of a recorded trajectory"""
    kind: PolicyKind = PolicyKind.IDM
    lane: Optional[str] = None
    desired_speed: Optional[float] = Field(None, gt=0, description="IDM cruise speed, m/s; lane limit when unset")
    trajectory: List[Waypoint] = Field(default_factory=list)


class ScenarioSpec(FrozenModel):
    schema_version: int = SCHEMA_VERSION
    id: str
    description: str = ""
    map: MapContext
    ego: EgoState
    agents: List[AgentState] = Field(default_factory=list)
    policies: Dict[str, AgentPolicy] = Field(default_factory=dict)
    faults: List[FaultSpec] = Field(default_factory=list)
    duration: float = 20.0
    dt: float = 0.1

    @property
    def initial_world(self) -> WorldState:
        return WorldState(time=0.0, ego=self.ego, agents=self.agents, map=self.map)

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def policy_for(self, agent: AgentState) -> AgentPolicy:
        """Explicit policy, else IDM for vehicles and constant-velocity replay for the rest"""
        if agent.id in self.policies:
            return self.policies[agent.id]
        if agent.kind == AgentKind.VEHICLE:
            return AgentPolicy(kind=PolicyKind.IDM)
        return AgentPolicy(kind=PolicyKind.REPLAY)
