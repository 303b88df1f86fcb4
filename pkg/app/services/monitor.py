"""
Runtime risk monitor.

At a step with active faults the monitor rolls out the perceived scene (cost
samples A) and n plausible scenes (cost samples B) under the same ego plan,
then runs the detector. Both rollouts draw predictor noise from one stream,
so agents present in both scenes see the same futures.
"""
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.logging_config import get_logger
from app.schemas.config import DetectorKind, DetectorParams, MonitorConfig
from app.schemas.faults import TruthHint
from app.schemas.results import RiskBounds
from app.schemas.world import EgoPlan, FaultSpec, WorldState
from app.services.baselines import baseline_detect, rollout_collisions
from app.services.costs import rollout_costs
from app.services.plausible import generate_plausible_batch
from app.services.predictor import rollout
from app.services.rng import RandomStream
from app.services.scene_batch import SceneBatch
from app.services.stats import critical, rsr_bounds

logger = get_logger(__name__)


@dataclass(frozen=True)
class Assessment:
    alarm: bool
    lower: float = 0.0
    upper: float = 0.0
    tau: Optional[int] = None
    prediction_seconds: float = 0.0
    estimation_seconds: float = 0.0
    p_perceived: Optional[float] = None
    p_plausible: Optional[float] = None


def bounds_over_lookahead(costs_a: np.ndarray, costs_b: np.ndarray,
                          params: DetectorParams) -> Tuple[bool, int, RiskBounds]:
    """
    Detection test at every lookahead of two (T, n) cost matrices.

    Returns:
        (alarm at any lookahead, 1-based lookahead with the largest lower bound, its bounds)
    """
    best_tau, best = 0, None
    alarm = False
    for t in range(costs_a.shape[0]):
        bounds = rsr_bounds(costs_a[t], costs_b[t], params.p, params.alpha, params.clamp_to_support)
        alarm = alarm or critical(bounds, params)
        if best is None or bounds.lower > best.lower:
            best_tau, best = t + 1, bounds
    return alarm, best_tau, best


class RiskMonitor:
    """Detector run on the perceived scene and its plausible alternatives"""

    def __init__(self, config: MonitorConfig, seed: int = 0, kind: Optional[DetectorKind] = None):
        self.config = config
        self.seed = seed
        self.kind = kind or config.kind

    def _batches(self, perceived: WorldState, faults: Sequence[FaultSpec], hints: Sequence[TruthHint],
                 n: int, stream: RandomStream) -> Tuple[SceneBatch, SceneBatch]:
        batch_a = SceneBatch.from_world(perceived, n)
        batch_b = generate_plausible_batch(perceived, faults, hints, self.config.noise,
                                           stream.child("plausible"), n)
        return batch_a, batch_b

    def assess(self, step: int, perceived: WorldState, plan: EgoPlan, faults: Sequence[FaultSpec],
               hints: Sequence[TruthHint]) -> Assessment:
        stream = RandomStream(self.seed).child("monitor", step)
        if self.kind == DetectorKind.COLLISION_PROB:
            return self._assess_baseline(perceived, plan, faults, hints, stream)
        return self._assess_rsr(perceived, plan, faults, hints, stream)

    def _assess_rsr(self, perceived, plan, faults, hints, stream) -> Assessment:
        cfg = self.config
        started = time.perf_counter()
        batch_a, batch_b = self._batches(perceived, faults, hints, cfg.detector.n, stream)
        predict = stream.child("predict")
        costs_a = rollout_costs(rollout(batch_a, plan, cfg.predictor, predict), cfg.cost)
        costs_b = rollout_costs(rollout(batch_b, plan, cfg.predictor, predict), cfg.cost)
        predicted = time.perf_counter()

        alarm, tau, bounds = bounds_over_lookahead(costs_a, costs_b, cfg.detector)
        estimated = time.perf_counter()
        if alarm:
            logger.debug(f"Alarm at t={perceived.time:.1f}s: lower={bounds.lower:.4f} tau={tau}")
        return Assessment(
            alarm=alarm,
            lower=bounds.lower,
            upper=bounds.upper,
            tau=tau,
            prediction_seconds=predicted - started,
            estimation_seconds=estimated - predicted,
        )

    def _assess_baseline(self, perceived, plan, faults, hints, stream) -> Assessment:
        cfg = self.config
        started = time.perf_counter()
        batch_a, batch_b = self._batches(perceived, faults, hints, cfg.baseline.n, stream)
        predict = stream.child("predict")
        p_perceived = float(rollout_collisions(rollout(batch_a, plan, cfg.predictor, predict)).mean())
        p_plausible = float(rollout_collisions(rollout(batch_b, plan, cfg.predictor, predict)).mean())
        predicted = time.perf_counter()
        alarm = baseline_detect(p_perceived, p_plausible, cfg.baseline)
        return Assessment(
            alarm=alarm,
            lower=p_plausible,
            upper=p_plausible,
            prediction_seconds=predicted - started,
            estimation_seconds=time.perf_counter() - predicted,
            p_perceived=p_perceived,
            p_plausible=p_plausible,
        )
