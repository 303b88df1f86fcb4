from typing import List

from pydantic import BaseModel, Field, model_validator

from app.schemas.config import CostConfig, NoiseModel, PredictorConfig
from app.schemas.faults import TruthHint
from app.schemas.world import EgoPlan, FaultSpec, WorldHistory


class CostSampleRequest(BaseModel):
    """
    Materialises one cost distribution at lookahead tau.

    With no faults the samples come from the perceived scene; with faults and
    their hints every sample first draws a plausible scene.
    """
    history: WorldHistory
    plan: EgoPlan
    tau: int = Field(ge=1, description="Lookahead step")
    n: int = Field(ge=2)
    cost: CostConfig = Field(default_factory=CostConfig)
    seed: int = 0
    predictor: PredictorConfig = Field(default_factory=PredictorConfig)
    faults: List[FaultSpec] = Field(default_factory=list)
    hints: List[TruthHint] = Field(default_factory=list)
    noise: NoiseModel = Field(default_factory=NoiseModel)

    @model_validator(mode="after")
    def _check_lookahead(self) -> "CostSampleRequest":
        if self.tau > min(self.plan.horizon, self.predictor.horizon):
            raise ValueError(
                f"tau={self.tau} exceeds the horizon ({min(self.plan.horizon, self.predictor.horizon)} steps)"
            )
        if len(self.faults) != len(self.hints):
            raise ValueError("every fault needs exactly one hint")
        return self
