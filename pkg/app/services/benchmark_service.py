"""
Benchmark runner: simulate every scenario of a corpus, label it, and score
the detector against collision-derived ground truth.
"""
import csv
import io
import json
import statistics
import uuid
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from sqlalchemy.orm import Session

from app.core.errors import ReportError, RiskMonitorError
from app.core.logging_config import get_logger
from app.models.benchmark import BenchmarkRun
from app.schemas.config import DetectorKind, MonitorConfig
from app.schemas.results import (
    BenchmarkMetrics,
    BenchmarkResult,
    ConfusionMatrix,
    ScenarioOutcome,
    SimLog,
)
from app.services.scenario_service import list_corpus, load_scenario
from app.services.simulator import run_scenario

logger = get_logger(__name__)

CSV_HEADER = [
    "Method",
    "Parameters",
    "F1 Score",
    "Accuracy",
    "Precision",
    "Recall",
    "Alarm-to-Collision (s)",
]
RUNTIME_HEADER = ["Runtime (s)", "Prediction (s)", "Estimation (s)"]

METHOD_NAMES = {
    DetectorKind.RSR: "Relative Scenario Risk",
    DetectorKind.COLLISION_PROB: "Collision Probability",
}


def format_parameters(config: MonitorConfig, kind: Optional[DetectorKind] = None) -> str:
    kind = kind or config.kind
    if kind == DetectorKind.COLLISION_PROB:
        return f"gamma={config.baseline.gamma:g}"
    detector = config.detector
    return f"p={detector.p:g}, gamma={detector.gamma:g}, alpha={detector.alpha:g}"


def outcome_from_log(log: SimLog) -> ScenarioOutcome:
    """Scenario label: predicted high risk iff any alarm fired, truly high risk iff the truth stream collides"""
    collision_time = log.first_collision_time
    alarm_time = log.first_alarm_time
    alarm_to_collision = None
    if collision_time is not None and alarm_time is not None and alarm_time <= collision_time:
        alarm_to_collision = collision_time - alarm_time
    monitored = [record for record in log.steps if record.active_faults]
    runtimes = [record.prediction_seconds + record.estimation_seconds for record in monitored]
    return ScenarioOutcome(
        scenario_id=log.scenario_id,
        predicted_high_risk=alarm_time is not None,
        truth_high_risk=collision_time is not None,
        alarm_times=log.alarm_times,
        fault_active_alarms=sum(1 for record in monitored if record.alarm),
        first_collision_time=collision_time,
        alarm_to_collision=alarm_to_collision,
        mean_step_runtime=statistics.fmean(runtimes) if runtimes else None,
    )


def trace_from_log(log: SimLog) -> List[Dict[str, Any]]:
    """Risk trace: one row per step with the recorded bounds, the threshold and the collision time"""
    collision_time = log.first_collision_time
    return [
        {
            "scenario_id": log.scenario_id,
            "step": record.step,
            "time": round(record.time, 6),
            "lower": record.lower,
            "upper": record.upper,
            "gamma": log.gamma,
            "tau": record.tau,
            "alarm": record.alarm,
            "active_faults": record.active_faults,
            "collision": record.collision,
            "collision_time": collision_time,
            "prediction_seconds": record.prediction_seconds,
            "estimation_seconds": record.estimation_seconds,
        }
        for record in log.steps
    ]


def _run_one(path: str, config_json: str, seed: int,
             kind: str) -> Tuple[ScenarioOutcome, List[Dict[str, Any]], List[float], List[float]]:
    """Worker entry point; module level so it can be pickled by the process pool"""
    config = MonitorConfig.model_validate_json(config_json)
    scenario_id = Path(path).stem
    try:
        spec = load_scenario(path)
        scenario_id = spec.id
        log = run_scenario(spec, config, seed, DetectorKind(kind))
    except Exception as exc:
        logger.error(f"Scenario {scenario_id} failed: {exc}", exc_info=not isinstance(exc, RiskMonitorError))
        return ScenarioOutcome(scenario_id=scenario_id, error=str(exc)), [], [], []
    monitored = [record for record in log.steps if record.active_faults]
    return (
        outcome_from_log(log),
        trace_from_log(log),
        [record.prediction_seconds for record in monitored],
        [record.estimation_seconds for record in monitored],
    )


def compute_metrics(confusion: ConfusionMatrix) -> Dict[str, float]:
    """Precision, recall, F1 and accuracy; 0/0 counts as 0"""
    tp, fp, tn, fn = confusion.tp, confusion.fp, confusion.tn, confusion.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = tp + fp + tn + fn
    accuracy = (tp + tn) / total if total else 0.0
    return {"precision": precision, "recall": recall, "f1": f1, "accuracy": accuracy}


def confusion_of(outcomes: Sequence[ScenarioOutcome]) -> ConfusionMatrix:
    confusion = ConfusionMatrix()
    for outcome in outcomes:
        if outcome.predicted_high_risk and outcome.truth_high_risk:
            confusion.tp += 1
        elif outcome.predicted_high_risk:
            confusion.fp += 1
        elif outcome.truth_high_risk:
            confusion.fn += 1
        else:
            confusion.tn += 1
    return confusion


def _mean(values: Sequence[float]) -> Optional[float]:
    return statistics.fmean(values) if values else None


def _median(values: Sequence[float]) -> Optional[float]:
    return statistics.median(values) if values else None


def aggregate(outcomes: Sequence[ScenarioOutcome], prediction: Sequence[float] = (),
              estimation: Sequence[float] = ()) -> BenchmarkMetrics:
    """Benchmark metrics over successful scenario outcomes"""
    confusion = confusion_of(outcomes)
    lead_times = [
        outcome.alarm_to_collision
        for outcome in outcomes
        if outcome.predicted_high_risk and outcome.truth_high_risk and outcome.alarm_to_collision is not None
    ]
    runtimes = [p + e for p, e in zip(prediction, estimation)]
    return BenchmarkMetrics(
        **compute_metrics(confusion),
        alarm_to_collision_mean=_mean(lead_times),
        alarm_to_collision_median=_median(lead_times),
        runtime_mean=_mean(runtimes),
        runtime_median=_median(runtimes),
        prediction_runtime_mean=_mean(prediction),
        estimation_runtime_mean=_mean(estimation),
        confusion=confusion,
    )


def run_benchmark(corpus_dir, config: MonitorConfig, seed: int = 0, workers: int = 1,
                  kind: Optional[DetectorKind] = None) -> BenchmarkResult:
    """
    Run every scenario of a corpus and score the detector.

    Scenarios that fail are reported in `failures` and left out of the metrics.
    Aggregation runs over outcomes sorted by scenario id, so the result does not
    depend on the worker count.

    Raises:
        ReportError: the corpus has no scenarios
    """
    kind = kind or config.kind
    paths = list_corpus(corpus_dir)
    if not paths:
        raise ReportError("no scenarios")
    logger.info(f"Benchmarking {len(paths)} scenarios from {corpus_dir} with {kind.value}, seed={seed}")

    config_json = config.model_dump_json()
    jobs = [(str(path), config_json, seed, kind.value) for path in paths]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    else:
        results = [_run_one(*job) for job in jobs]
    results.sort(key=lambda item: item[0].scenario_id)

    outcomes = [outcome for outcome, *_ in results if outcome.error is None]
    failures = [outcome for outcome, *_ in results if outcome.error is not None]
    prediction = [value for outcome, _, p, _ in results for value in p]
    estimation = [value for outcome, _, _, e in results for value in e]
    metrics = aggregate(outcomes, prediction, estimation)
    logger.info(
        f"Benchmark done: F1={metrics.f1:.4f} precision={metrics.precision:.4f} "
        f"recall={metrics.recall:.4f} ({len(failures)} failed)"
    )
    return BenchmarkResult(
        detector=kind,
        parameters=format_parameters(config, kind),
        seed=seed,
        outcomes=outcomes,
        metrics=metrics,
        failures=failures,
        traces={outcome.scenario_id: trace for outcome, trace, _, _ in results if outcome.error is None},
    )


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.4f}"


def render_csv(results: Sequence[BenchmarkResult], timing: bool = False) -> str:
    """Metrics table, one row per result; runtime columns only when timing is requested"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER + (RUNTIME_HEADER if timing else []))
    for result in results:
        metrics = result.metrics
        row = [
            METHOD_NAMES[result.detector],
            result.parameters,
            _fmt(metrics.f1),
            _fmt(metrics.accuracy),
            _fmt(metrics.precision),
            _fmt(metrics.recall),
            _fmt(metrics.alarm_to_collision_mean),
        ]
        if timing:
            row += [_fmt(metrics.runtime_mean), _fmt(metrics.prediction_runtime_mean),
                    _fmt(metrics.estimation_runtime_mean)]
        writer.writerow(row)
    return buffer.getvalue()


def render_traces(results: Sequence[BenchmarkResult]) -> str:
    """JSON lines, one per step per scenario"""
    lines = []
    for result in results:
        for scenario_id in sorted(result.traces):
            for row in result.traces[scenario_id]:
                lines.append(json.dumps({"parameters": result.parameters, **row}, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def emit_report(results: Sequence[BenchmarkResult], fmt: str, path, timing: bool = False) -> Path:
    """
    Write a benchmark report.

    Args:
        results: one result per parameter set
        fmt: "csv" for the metrics table, "jsonl" for risk traces
        path: output file
        timing: add runtime columns to the CSV

    Raises:
        ReportError: nothing to report, unknown format, or unwritable path
    """
    if not results or all(not result.outcomes and not result.failures for result in results):
        raise ReportError("no scenarios")
    if fmt == "csv":
        content = render_csv(results, timing)
    elif fmt == "jsonl":
        content = render_traces(results)
    else:
        raise ReportError(f"unknown report format '{fmt}'")
    path = Path(path)
    try:
        path.write_text(content, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    logger.info(f"Wrote {fmt} report to {path}")
    return path


class BenchmarkService:
    """Service for storing and retrieving benchmark runs"""

    def save_run(self, db: Session, result: BenchmarkResult, corpus_dir: Optional[str] = None) -> BenchmarkRun:
        run_id = str(uuid.uuid4())
        logger.debug(f"Generated run ID: {run_id}")
        run = BenchmarkRun(
            run_id=run_id,
            detector=result.detector.value,
            parameters=result.parameters,
            seed=result.seed,
            corpus_dir=corpus_dir,
            metrics=result.metrics.model_dump(mode="json"),
            outcomes=[outcome.model_dump(mode="json") for outcome in [*result.outcomes, *result.failures]],
        )
        try:
            db.add(run)
            db.commit()
            db.refresh(run)
        except Exception as e:
            logger.error(f"Failed to save benchmark run: {str(e)}", exc_info=True)
            db.rollback()
            raise
        logger.info(f"Saved benchmark run {run_id}")
        return run

    def get_run(self, db: Session, run_id: str) -> Optional[BenchmarkRun]:
        logger.debug(f"Retrieving benchmark run: {run_id}")
        run = db.query(BenchmarkRun).filter(BenchmarkRun.run_id == run_id).first()
        if run is None:
            logger.warning(f"Benchmark run not found: {run_id}")
        return run

    def list_runs(self, db: Session, page: int = 1, page_size: int = 10) -> Tuple[List[BenchmarkRun], int]:
        logger.debug(f"Listing benchmark runs: page={page}, page_size={page_size}")
        query = db.query(BenchmarkRun).order_by(BenchmarkRun.created_at.desc())
        total = query.count()
        runs = query.offset((page - 1) * page_size).limit(page_size).all()
        return runs, total
