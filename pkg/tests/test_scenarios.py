import json

import pytest

from app.core.errors import ParameterError, ScenarioSchemaError, ScenarioValidationError
from app.schemas.world import AgentKind, FaultMode, FaultSubtype, PolicyKind
from app.services.scenario_service import (
    dump_scenario,
    list_corpus,
    load_scenario,
    parse_scenario,
    validate_scenario,
)
from tests.conftest import SCENARIO_DIR


def scenario_data(name: str = "missing_inpath_static") -> dict:
    return json.loads((SCENARIO_DIR / f"{name}.json").read_text(encoding="utf-8"))


def test_bundled_scenario_loads():
    spec = load_scenario(SCENARIO_DIR / "missing_inpath_static.json")
    assert spec.id == "missing_inpath_static"
    assert len(spec.faults) == 1
    assert spec.faults[0].mode == FaultMode.MISSING_OBSTACLE
    assert spec.faults[0].subtype == FaultSubtype.IN_PATH
    assert spec.steps == 100


def test_every_corpus_scenario_is_valid():
    paths = list_corpus(SCENARIO_DIR)
    assert len(paths) >= 20
    ids = set()
    for path in paths:
        spec = load_scenario(path)
        assert spec.id == path.stem
        ids.add(spec.id)
    assert len(ids) == len(paths)


def test_corpus_covers_every_fault_mode():
    modes = {fault.mode for path in list_corpus(SCENARIO_DIR) for fault in load_scenario(path).faults}
    assert modes == set(FaultMode)


def test_unknown_fault_mode_names_the_field():
    data = scenario_data()
    data["faults"][0]["mode"] = "teleport"
    with pytest.raises(ScenarioSchemaError) as exc_info:
        parse_scenario(json.dumps(data))
    assert exc_info.value.field == "faults.0.mode"
    assert "faults.0.mode" in str(exc_info.value)


def test_malformed_json_reports_the_line():
    with pytest.raises(ScenarioSchemaError) as exc_info:
        parse_scenario('{\n  "id": "broken",\n  oops\n}')
    assert exc_info.value.line == 3


def test_unsupported_schema_version():
    data = scenario_data()
    data["schema_version"] = 2
    with pytest.raises(ScenarioSchemaError, match="schema version"):
        parse_scenario(json.dumps(data))


def test_unknown_keys_are_rejected():
    data = scenario_data()
    data["ego"]["colour"] = "red"
    with pytest.raises(ScenarioSchemaError):
        parse_scenario(json.dumps(data))


def test_duration_must_be_a_multiple_of_dt():
    data = scenario_data()
    data["duration"] = 1.05
    with pytest.raises(ScenarioValidationError, match="integer multiple"):
        parse_scenario(json.dumps(data))


def test_degenerate_extent_is_rejected():
    data = scenario_data()
    data["agents"][0]["extent"] = [0.0, 0.5]
    with pytest.raises(ScenarioValidationError) as exc_info:
        parse_scenario(json.dumps(data))
    assert "agent 0: extent must be positive" in exc_info.value.violations


def test_fault_target_must_exist():
    data = scenario_data()
    data["faults"][0]["target"] = "nobody"
    with pytest.raises(ScenarioValidationError, match="fault 0: unknown target"):
        parse_scenario(json.dumps(data))


def test_fault_errors_reported_alongside_other_violations():
    data = scenario_data()
    data["ego"]["extent"] = [0.0, 2.0]
    data["faults"][0]["target"] = "nobody"
    with pytest.raises(ScenarioValidationError) as exc_info:
        parse_scenario(json.dumps(data))
    assert "ego: extent must be positive" in exc_info.value.violations
    assert "fault 0: unknown target 'nobody'" in exc_info.value.violations


def test_fault_geometry_skipped_on_unknown_route():
    data = scenario_data()
    data["ego"]["route"] = ["ghost-lane"]
    with pytest.raises(ScenarioValidationError) as exc_info:
        parse_scenario(json.dumps(data))
    assert "ego: route references unknown lane 'ghost-lane'" in exc_info.value.violations
    assert "fault 0: in-path classification needs a valid ego route" in exc_info.value.violations


def test_missing_obstacle_subtype_must_match_geometry():
    data = scenario_data()
    data["faults"][0]["subtype"] = "not_in_path"
    with pytest.raises(ScenarioValidationError, match="is in path"):
        parse_scenario(json.dumps(data))


def test_in_path_ghost_must_sit_on_the_route():
    data = scenario_data("ghost_inpath_static")
    data["faults"][0]["params"] = {"offset": [20.0, 4.0]}
    with pytest.raises(ScenarioValidationError, match="within 1.75 m"):
        parse_scenario(json.dumps(data))


def test_duplicate_ids_and_unknown_lanes():
    data = scenario_data()
    data["agents"].append(dict(data["agents"][0]))
    data["ego"]["route"] = ["main", "ghost-lane"]
    with pytest.raises(ScenarioValidationError) as exc_info:
        parse_scenario(json.dumps(data))
    spec_violations = exc_info.value.violations
    assert "agent 1: id 'ped' is not unique" in spec_violations
    assert "ego: route references unknown lane 'ghost-lane'" in spec_violations


def test_dump_and_reload(tmp_path):
    spec = load_scenario(SCENARIO_DIR / "traffic_light_red_static.json")
    dump_scenario(spec, tmp_path / "copy.json")
    assert load_scenario(tmp_path / "copy.json") == spec
    assert validate_scenario(spec) == []


def test_unreadable_file(tmp_path):
    with pytest.raises(ScenarioSchemaError, match="cannot read"):
        load_scenario(tmp_path / "absent.json")


def test_list_corpus_needs_a_directory(tmp_path):
    assert list_corpus(tmp_path) == []
    with pytest.raises(ParameterError):
        list_corpus(tmp_path / "absent")


def test_default_policies():
    spec = load_scenario(SCENARIO_DIR / "missing_inpath_static.json")
    pedestrian = spec.agents[0]
    assert pedestrian.kind == AgentKind.PEDESTRIAN
    assert spec.policy_for(pedestrian).kind == PolicyKind.REPLAY
    assert spec.policy_for(pedestrian.model_copy(update={"kind": AgentKind.VEHICLE})).kind == PolicyKind.IDM
