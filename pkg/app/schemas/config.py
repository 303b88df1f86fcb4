from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.world import AgentKind


class ConfigModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class DetectorParams(ConfigModel):
    """Parameters of the p-RSR detection test"""
    p: float = Field(0.99, gt=0, lt=1, description="Risk aversion: quantile of the perceived-scene cost")
    gamma: float = Field(0.9, gt=0, lt=1, description="Risk threshold on the p-RSR lower bound")
    alpha: float = Field(0.1, gt=0, lt=1, description="One minus the confidence level")
    n: int = Field(1000, ge=2, description="Cost samples per scene")
    clamp_to_support: bool = Field(
        True,
        description="Evaluate quantile levels above 1 at the largest sample instead of +inf",
    )


class CostMetric(str, Enum):
    TTC = "ttc"
    MSD = "msd"


def _default_msd_weights() -> Dict[AgentKind, float]:
    return {AgentKind.VEHICLE: 0.5, AgentKind.PEDESTRIAN: 1.0, AgentKind.BICYCLE: 1.0}


class CostConfig(ConfigModel):
    metric: CostMetric = CostMetric.MSD
    ttc_cap: float = Field(3.0, gt=0, description="TTC normalisation cap m, seconds")
    msd_weights: Dict[AgentKind, float] = Field(default_factory=_default_msd_weights)
    msd_literal_formula: bool = False
    rule_penalty: float = Field(1.0, ge=0, description="Added cost per active traffic-rule violation")

    @model_validator(mode="after")
    def _check_weights(self) -> "CostConfig":
        for kind in AgentKind:
            weight = self.msd_weights.get(kind)
            if weight is None or weight <= 0:
                raise ValueError(f"msd weight for {kind.value} must be positive")
        return self

    def weight(self, kind: AgentKind) -> float:
        return self.msd_weights[kind]


class IntentMode(ConfigModel):
    """Discrete maneuver an agent commits to for one rollout"""
    name: str
    accel: float = Field(description="Commanded longitudinal acceleration, m/s^2")
    probability: float = Field(ge=0, le=1)


def _default_intents() -> List[IntentMode]:
    return [
        IntentMode(name="keep-speed", accel=0.0, probability=0.6),
        IntentMode(name="brake", accel=-3.0, probability=0.2),
        IntentMode(name="accelerate", accel=1.0, probability=0.2),
    ]


class PredictorConfig(ConfigModel):
    horizon: int = Field(30, ge=1, description="Prediction horizon T in steps")
    dt: float = Field(0.1, gt=0)
    heading_noise_std: float = Field(0.05, ge=0, description="rad/sqrt(s)")
    accel_noise_std: float = Field(0.5, ge=0, description="m/s^2 per step")
    intent_modes: List[IntentMode] = Field(default_factory=_default_intents, min_length=1)

    @model_validator(mode="after")
    def _check_probabilities(self) -> "PredictorConfig":
        total = sum(mode.probability for mode in self.intent_modes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"intent mode probabilities must sum to 1, got {total}")
        return self


class NoiseModel(ConfigModel):
    """Gaussian spread of the plausible-scene generator"""
    pos_std: float = Field(0.2, ge=0, description="m")
    heading_std: float = Field(0.1, ge=0, description="rad")
    speed_std: float = Field(0.1, ge=0, description="m/s")


class IdmParams(ConfigModel):
    desired_speed: Optional[float] = Field(None, gt=0, description="m/s; lane speed limit when unset")
    time_headway: float = Field(1.5, gt=0)
    max_accel: float = Field(1.0, gt=0)
    comfort_decel: float = Field(1.5, gt=0)
    min_gap: float = Field(2.0, gt=0)
    exponent: float = Field(4.0, gt=0)
    pursuit_lookahead: float = Field(6.0, gt=0, description="Pure-pursuit lookahead distance, m")
    wheelbase: float = Field(2.8, gt=0)


class BaselineParams(ConfigModel):
    gamma: float = Field(0.9, gt=0, lt=1)
    n: int = Field(1000, ge=2)


class DetectorKind(str, Enum):
    RSR = "rsr"
    COLLISION_PROB = "collision-prob"


class MonitorConfig(ConfigModel):
    """Everything the monitor needs; the JSON form of this model is the CLI config file"""
    detector: DetectorParams = Field(default_factory=DetectorParams)
    cost: CostConfig = Field(default_factory=CostConfig)
    predictor: PredictorConfig = Field(default_factory=PredictorConfig)
    noise: NoiseModel = Field(default_factory=NoiseModel)
    idm: IdmParams = Field(default_factory=IdmParams)
    baseline: BaselineParams = Field(default_factory=BaselineParams)
    kind: DetectorKind = DetectorKind.RSR
