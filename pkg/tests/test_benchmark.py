import json

import pytest
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from app.core.database import init_db
from app.core.errors import ParameterError, ReportError
from app.schemas.config import DetectorKind, MonitorConfig
from app.schemas.results import ConfusionMatrix, ScenarioOutcome, SimLog, StepRecord
from app.services.benchmark_service import (
    BenchmarkService,
    aggregate,
    compute_metrics,
    confusion_of,
    emit_report,
    format_parameters,
    outcome_from_log,
    render_csv,
    run_benchmark,
)
from tests.conftest import SCENARIO_DIR, world

HEADER = "Method,Parameters,F1 Score,Accuracy,Precision,Recall,Alarm-to-Collision (s)"


def outcome(scenario_id: str, predicted: bool, truth: bool, lead=None) -> ScenarioOutcome:
    return ScenarioOutcome(scenario_id=scenario_id, predicted_high_risk=predicted, truth_high_risk=truth,
                           alarm_to_collision=lead)


def test_metrics_from_confusion_counts():
    metrics = compute_metrics(ConfusionMatrix(tp=22, fn=2, fp=5, tn=71))
    assert metrics["precision"] == pytest.approx(0.8148, abs=1e-4)
    assert metrics["recall"] == pytest.approx(0.9167, abs=1e-4)
    assert metrics["f1"] == pytest.approx(0.8627, abs=1e-4)
    assert metrics["accuracy"] == pytest.approx(0.93)


def test_perfect_detector():
    metrics = aggregate([outcome("a", True, True, lead=2.0), outcome("b", False, False)])
    assert (metrics.f1, metrics.accuracy, metrics.precision, metrics.recall) == (1.0, 1.0, 1.0, 1.0)
    assert metrics.alarm_to_collision_mean == 2.0


def test_zero_over_zero_counts_as_zero():
    metrics = aggregate([outcome("a", True, False), outcome("b", False, False)])
    assert metrics.precision == 0.0
    assert metrics.recall == 0.0
    assert metrics.f1 == 0.0
    assert metrics.accuracy == 0.5
    assert metrics.alarm_to_collision_mean is None


def test_confusion_of():
    outcomes = [outcome("tp", True, True), outcome("fp", True, False), outcome("fn", False, True),
                outcome("tn", False, False), outcome("tn2", False, False)]
    assert confusion_of(outcomes) == ConfusionMatrix(tp=1, fp=1, fn=1, tn=2)


def test_lead_time_uses_first_alarm_and_first_collision():
    scene = world()
    records = [
        StepRecord(step=i, time=i * 0.5, truth=scene, perceived=scene, active_faults=[0],
                   alarm=i in (2, 3), collision=i >= 6)
        for i in range(8)
    ]
    log = SimLog(scenario_id="unit", gamma=0.9, steps=records)
    result = outcome_from_log(log)
    assert result.predicted_high_risk
    assert result.truth_high_risk
    assert result.alarm_times == [1.0, 1.5]
    assert result.fault_active_alarms == 2
    assert result.first_collision_time == 3.0
    assert result.alarm_to_collision == pytest.approx(2.0)


def test_alarm_after_collision_has_no_lead_time():
    scene = world()
    records = [
        StepRecord(step=i, time=float(i), truth=scene, perceived=scene, alarm=i == 3, collision=i >= 1)
        for i in range(4)
    ]
    result = outcome_from_log(SimLog(scenario_id="late", gamma=0.9, steps=records))
    assert result.predicted_high_risk
    assert result.alarm_to_collision is None


def test_format_parameters():
    config = MonitorConfig()
    assert format_parameters(config) == "p=0.99, gamma=0.9, alpha=0.1"
    assert format_parameters(config, DetectorKind.COLLISION_PROB) == "gamma=0.9"


def test_csv_header_and_runtime_columns(quick_corpus, quick_config):
    result = run_benchmark(quick_corpus, quick_config, seed=0)
    lines = render_csv([result]).splitlines()
    assert lines[0] == HEADER
    assert lines[1].startswith('Relative Scenario Risk,"p=0.99, gamma=0.9, alpha=0.1",')
    timed = render_csv([result], timing=True).splitlines()[0]
    assert timed == HEADER + ",Runtime (s),Prediction (s),Estimation (s)"


def test_run_benchmark_scores_every_scenario(quick_corpus, quick_config):
    result = run_benchmark(quick_corpus, quick_config, seed=0)
    assert [o.scenario_id for o in result.outcomes] == ["missing_inpath_static", "no_fault"]
    assert result.failures == []
    assert not any(o.truth_high_risk for o in result.outcomes)
    assert result.metrics.runtime_mean is not None
    assert set(result.traces) == {"missing_inpath_static", "no_fault"}
    assert len(result.traces["no_fault"]) == 5


def test_broken_scenarios_are_reported_not_scored(quick_corpus, quick_config):
    (quick_corpus / "broken.json").write_text("{ not json", encoding="utf-8")
    result = run_benchmark(quick_corpus, quick_config)
    assert [failure.scenario_id for failure in result.failures] == ["broken"]
    assert "line 1" in result.failures[0].error
    assert len(result.outcomes) == 2


def test_empty_corpus(tmp_path):
    with pytest.raises(ReportError, match="no scenarios"):
        run_benchmark(tmp_path, MonitorConfig())
    with pytest.raises(ParameterError):
        run_benchmark(tmp_path / "absent", MonitorConfig())


def test_emit_report(tmp_path, quick_corpus, quick_config):
    result = run_benchmark(quick_corpus, quick_config)
    csv_path = emit_report([result], "csv", tmp_path / "out.csv")
    assert csv_path.read_text(encoding="utf-8").splitlines()[0] == HEADER
    traces = emit_report([result], "jsonl", tmp_path / "traces.jsonl").read_text(encoding="utf-8")
    rows = [json.loads(line) for line in traces.splitlines()]
    assert len(rows) == 10
    assert {"lower", "upper", "gamma", "tau", "collision_time"} <= set(rows[0])
    with pytest.raises(ReportError, match="unknown report format"):
        emit_report([result], "xml", tmp_path / "out.xml")
    with pytest.raises(ReportError, match="no scenarios"):
        emit_report([], "csv", tmp_path / "empty.csv")


def test_benchmark_runs_are_stored(quick_corpus, quick_config):
    engine = create_engine("sqlite://")
    init_db(engine)
    db = sessionmaker(bind=engine)()
    service = BenchmarkService()
    result = run_benchmark(quick_corpus, quick_config)
    run = service.save_run(db, result, str(quick_corpus))
    assert service.get_run(db, run.run_id).parameters == result.parameters
    assert service.get_run(db, "missing") is None
    runs, total = service.list_runs(db)
    assert total == 1
    assert runs[0].metrics["confusion"] == result.metrics.confusion.model_dump()
    db.close()


@pytest.mark.slow
def test_bundled_corpus_end_to_end():
    rsr = run_benchmark(SCENARIO_DIR, MonitorConfig(), seed=0)
    assert rsr.failures == []
    assert len(rsr.outcomes) >= 20
    assert rsr.metrics.recall >= 0.8
    assert rsr.metrics.precision >= 0.7
    assert rsr.metrics.alarm_to_collision_median >= 1.0

    baseline = run_benchmark(SCENARIO_DIR, MonitorConfig(), seed=0, kind=DetectorKind.COLLISION_PROB)
    assert rsr.metrics.f1 > baseline.metrics.f1


@pytest.mark.slow
def test_identical_seeds_give_identical_reports(quick_corpus):
    first = render_csv([run_benchmark(quick_corpus, MonitorConfig(), seed=5)])
    second = render_csv([run_benchmark(quick_corpus, MonitorConfig(), seed=5, workers=2)])
    assert first == second
