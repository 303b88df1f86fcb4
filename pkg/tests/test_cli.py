import json

import pytest

from app.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VALIDATION, main, with_overrides
from app.schemas.config import CostMetric, DetectorKind, MonitorConfig
from tests.conftest import SCENARIO_DIR


@pytest.fixture
def config_file(tmp_path, quick_config):
    path = tmp_path / "config.json"
    path.write_text(quick_config.model_dump_json(), encoding="utf-8")
    return path


@pytest.fixture
def quick_scenario(quick_corpus):
    return quick_corpus / "missing_inpath_static.json"


def test_epsilon(capsys):
    assert main(["epsilon", "--alpha", "0.1", "--n", "1000"]) == EXIT_OK
    assert float(capsys.readouterr().out) == pytest.approx(0.0387023, abs=1e-6)


def test_usage_errors():
    assert main(["epsilon", "--alpha", "0.1"]) == EXIT_USAGE
    assert main(["no-such-command"]) == EXIT_USAGE
    assert main(["simulate", "--scenario", "absent.json"]) == EXIT_USAGE


def test_bad_parameter_is_a_runtime_error():
    assert main(["epsilon", "--alpha", "1.5", "--n", "10"]) == EXIT_RUNTIME


def test_invalid_scenario_exit_code(tmp_path, capsys):
    data = json.loads((SCENARIO_DIR / "missing_inpath_static.json").read_text(encoding="utf-8"))
    data["faults"][0]["target"] = "nobody"
    path = tmp_path / "invalid.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    assert main(["simulate", "--scenario", str(path)]) == EXIT_VALIDATION
    assert "fault 0: unknown target" in capsys.readouterr().err


def test_invalid_config_exit_code(tmp_path, quick_scenario):
    path = tmp_path / "config.json"
    path.write_text('{"detector": {"p": 1.5}}', encoding="utf-8")
    assert main(["simulate", "--scenario", str(quick_scenario), "--config", str(path)]) == EXIT_VALIDATION


def test_simulate_writes_a_step_log(tmp_path, quick_scenario, config_file, capsys):
    out = tmp_path / "log.jsonl"
    code = main(["simulate", "--scenario", str(quick_scenario), "--config", str(config_file), "--out", str(out)])
    assert code == EXIT_OK
    records = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert [record["step"] for record in records] == [0, 1, 2, 3, 4]
    assert records[0]["active_faults"] == [0]
    assert "missing_inpath_static: 5 steps" in capsys.readouterr().out


def test_detect_prints_the_outcome(quick_scenario, config_file, capsys):
    code = main(["detect", "--scenario", str(quick_scenario), "--config", str(config_file),
                 "--cost", "ttc", "--gamma", "0.8"])
    assert code == EXIT_OK
    outcome = json.loads(capsys.readouterr().out)
    assert outcome["scenario_id"] == "missing_inpath_static"
    assert outcome["truth_high_risk"] is False


def test_bench_writes_csv(tmp_path, quick_corpus, config_file):
    csv_path = tmp_path / "results.csv"
    code = main(["bench", "--corpus", str(quick_corpus), "--config", str(config_file), "--csv", str(csv_path),
                 "--p", "0.9", "--p", "0.99"])
    assert code == EXIT_OK
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("Method,Parameters,F1 Score")
    assert len(lines) == 3
    assert '"p=0.9, gamma=0.9, alpha=0.1"' in lines[1]


def test_bench_sweep_needs_the_rsr_detector(quick_corpus):
    code = main(["bench", "--corpus", str(quick_corpus), "--detector", "collision-prob", "--p", "0.9"])
    assert code == EXIT_USAGE


def test_bench_empty_corpus(tmp_path):
    assert main(["bench", "--corpus", str(tmp_path)]) == EXIT_RUNTIME


def test_with_overrides():
    config = with_overrides(MonitorConfig(), detector={"p": 0.9, "gamma": None}, cost=CostMetric.TTC)
    assert config.detector.p == 0.9
    assert config.detector.gamma == 0.9
    assert config.cost.metric == CostMetric.TTC
    baseline = with_overrides(MonitorConfig(), detector={"gamma": 0.5, "n": 50},
                              kind=DetectorKind.COLLISION_PROB)
    assert (baseline.baseline.gamma, baseline.baseline.n) == (0.5, 50)
