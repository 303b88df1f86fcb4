from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.schemas.config import DetectorKind, DetectorParams, MonitorConfig
from app.schemas.faults import FaultSchedule
from app.schemas.world import EgoPlan, FaultSpec, WorldState


class RiskBounds(BaseModel):
    """PAC bounds on the p-quantile relative scenario risk"""
    model_config = ConfigDict(frozen=True)

    lower: float = Field(ge=0, le=1)
    upper: float = Field(ge=0, le=1)
    epsilon: float = Field(gt=0, description="DKW half-width")
    v_low: float = Field(ge=0, le=1)
    v_high: float = Field(ge=0, le=1)


class StepRecord(BaseModel):
    """One simulation step as seen by the simulator and the monitor"""
    step: int
    time: float
    truth: WorldState
    perceived: WorldState
    active_faults: List[int] = Field(default_factory=list, description="Indices into the scenario fault list")
    plan: Optional[EgoPlan] = None
    collision: bool = False
    alarm: bool = False
    lower: float = 0.0
    upper: float = 0.0
    tau: Optional[int] = Field(None, description="Lookahead (steps) whose bounds are recorded")
    prediction_seconds: float = 0.0
    estimation_seconds: float = 0.0
    p_perceived: Optional[float] = Field(None, description="Baseline only: collision probability of the perceived scene")
    p_plausible: Optional[float] = Field(None, description="Baseline only: collision probability of the plausible scenes")


class SimLog(BaseModel):
    scenario_id: str
    detector: DetectorKind = DetectorKind.RSR
    gamma: float
    steps: List[StepRecord] = Field(default_factory=list)
    faults: List[FaultSpec] = Field(default_factory=list)
    schedules: List[FaultSchedule] = Field(default_factory=list)

    @property
    def first_collision_time(self) -> Optional[float]:
        return next((record.time for record in self.steps if record.collision), None)

    @property
    def alarm_times(self) -> List[float]:
        return [record.time for record in self.steps if record.alarm]

    @property
    def first_alarm_time(self) -> Optional[float]:
        return next((record.time for record in self.steps if record.alarm), None)


class ScenarioOutcome(BaseModel):
    scenario_id: str
    predicted_high_risk: bool = False
    truth_high_risk: bool = False
    alarm_times: List[float] = Field(default_factory=list)
    fault_active_alarms: int = 0
    first_collision_time: Optional[float] = None
    alarm_to_collision: Optional[float] = None
    mean_step_runtime: Optional[float] = None
    error: Optional[str] = None


class ConfusionMatrix(BaseModel):
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


class BenchmarkMetrics(BaseModel):
    f1: float = Field(ge=0, le=1)
    accuracy: float = Field(ge=0, le=1)
    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    alarm_to_collision_mean: Optional[float] = None
    alarm_to_collision_median: Optional[float] = None
    runtime_mean: Optional[float] = None
    runtime_median: Optional[float] = None
    prediction_runtime_mean: Optional[float] = None
    estimation_runtime_mean: Optional[float] = None
    confusion: ConfusionMatrix = Field(default_factory=ConfusionMatrix)


class BenchmarkResult(BaseModel):
    detector: DetectorKind
    parameters: str = Field(description="Human-readable parameter set, e.g. 'p=0.99, gamma=0.9, alpha=0.1'")
    seed: int
    outcomes: List[ScenarioOutcome]
    metrics: BenchmarkMetrics
    failures: List[ScenarioOutcome] = Field(default_factory=list)
    traces: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict, exclude=True)


# API request/response schemas

class BoundsRequest(BaseModel):
    samples_a: List[float] = Field(min_length=2)
    samples_b: List[float] = Field(min_length=2)
    p: float = Field(0.99, gt=0, lt=1)
    alpha: float = Field(0.1, gt=0, lt=1)
    clamp_to_support: bool = True


class DetectRequest(BaseModel):
    samples_a: List[float] = Field(min_length=2)
    samples_b: List[float] = Field(min_length=2)
    params: DetectorParams


class DetectResponse(BaseModel):
    critical: bool
    bounds: RiskBounds


class EpsilonResponse(BaseModel):
    alpha: float
    n: int
    epsilon: float


class BenchmarkRequest(BaseModel):
    corpus_dir: Optional[str] = None
    config: MonitorConfig = Field(default_factory=MonitorConfig)
    seed: int = 0
    detector: Optional[DetectorKind] = Field(None, description="Overrides config.kind")


class BenchmarkRunResponse(BaseModel):
    run_id: str
    detector: str
    parameters: str
    seed: int
    corpus_dir: Optional[str] = None
    metrics: Dict[str, Any]
    outcomes: List[Dict[str, Any]]
    created_at: datetime

    model_config = {"from_attributes": True}


class BenchmarkRunListResponse(BaseModel):
    total: int
    page: int
    page_size: int
    runs: List[BenchmarkRunResponse]


class ErrorResponse(BaseModel):
    """Schema for error responses"""
    detail: str
