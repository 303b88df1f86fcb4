from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from app.schemas.world import AgentState, EgoState, FaultMode, LightState


class FaultSchedule(BaseModel):
    """Half-open activity intervals [t_on, t_off) of one fault, in seconds"""
    model_config = ConfigDict(frozen=True)

    dt: float = Field(0.1, gt=0)
    intervals: List[Tuple[float, float]] = Field(default_factory=list)

    def active_at(self, step: int) -> bool:
        for t_on, t_off in self.intervals:
            if int(round(t_on / self.dt)) <= step < int(round(t_off / self.dt)):
                return True
        return False


class TruthHint(BaseModel):
    """
    Diagnostic information about an active fault, derived from ground truth.

    Stands in for the output of a failure-identification module: the true
    state of the affected agent, the true light state, the ego pose error, or
    the id of a fabricated obstacle.
    """
    model_config = ConfigDict(frozen=True)

    fault_index: int
    mode: FaultMode
    agent: Optional[AgentState] = None
    light_id: Optional[str] = None
    light_state: Optional[LightState] = None
    ego_offset: Optional[Tuple[float, float, float]] = Field(
        None, description="Perceived minus true ego pose (dx, dy, dheading)"
    )
    ego: Optional[EgoState] = Field(None, description="True ego state for mislocalization")
    ghost_id: Optional[str] = None
