"""Scenario files: loading, validation and the bundled corpus."""
import json
import math
from pathlib import Path
from typing import List, Union

from pydantic import ValidationError

from app.core.errors import ParameterError, ScenarioSchemaError, ScenarioValidationError
from app.core.logging_config import get_logger
from app.schemas.world import (
    EGO_ID,
    MISDETECT_AGENT_MODES,
    SCHEMA_VERSION,
    FaultMode,
    FaultSubtype,
    PolicyKind,
    ScenarioSpec,
)
from app.services.faults import NOT_IN_PATH_MIN_LATERAL, ghost_id, resolve_params
from app.services.lanes import LANE_HALF_WIDTH, is_in_path, lane_polyline

logger = get_logger(__name__)

PathLike = Union[str, Path]


def _check_faults(spec: ScenarioSpec, violations: List[str]) -> None:
    agent_ids = {agent.id for agent in spec.agents}
    light_ids = {light.id for light in spec.map.traffic_lights}
    route_ok = bool(spec.ego.route) and all(
        spec.map.lane(lane_id) is not None and len(spec.map.lane(lane_id).centerline) >= 2
        for lane_id in spec.ego.route
    )

    for i, fault in enumerate(spec.faults):
        params = resolve_params(fault)
        for name in ("std", "heading_std"):
            value = getattr(params, name)
            if value is not None and value < 0:
                violations.append(f"fault {i}: {name} must be non-negative")
        if not 0.0 <= params.activation_rate <= 1.0:
            violations.append(f"fault {i}: activation_rate must lie in [0, 1]")

        if fault.mode in MISDETECT_AGENT_MODES or fault.mode == FaultMode.MISSING_OBSTACLE:
            if fault.target not in agent_ids:
                violations.append(f"fault {i}: unknown target '{fault.target}'")
                continue
        if fault.mode == FaultMode.MISDETECT_TRAFFIC_LIGHT and fault.target not in light_ids:
            violations.append(f"fault {i}: unknown target '{fault.target}'")

        if fault.mode in (FaultMode.GHOST_OBSTACLE, FaultMode.MISSING_OBSTACLE):
            if fault.subtype == FaultSubtype.NONE:
                violations.append(f"fault {i}: {fault.mode.value} needs subtype in_path or not_in_path")
                continue
            if not route_ok:
                violations.append(f"fault {i}: in-path classification needs a valid ego route")
                continue

        if fault.mode == FaultMode.GHOST_OBSTACLE:
            if ghost_id(fault, i) in agent_ids:
                violations.append(f"fault {i}: ghost id '{ghost_id(fault, i)}' is already an agent")
            lateral = abs(params.offset[1])
            if fault.subtype == FaultSubtype.IN_PATH and lateral >= LANE_HALF_WIDTH:
                violations.append(f"fault {i}: in-path ghost must sit within {LANE_HALF_WIDTH} m of the route")
            if fault.subtype == FaultSubtype.NOT_IN_PATH and lateral < NOT_IN_PATH_MIN_LATERAL:
                violations.append(
                    f"fault {i}: not-in-path ghost must sit at least {NOT_IN_PATH_MIN_LATERAL} m off the route"
                )
        elif fault.mode == FaultMode.MISSING_OBSTACLE:
            agent = next(agent for agent in spec.agents if agent.id == fault.target)
            if not all(math.isfinite(value) for value in (*agent.position, agent.heading)):
                continue
            in_path = is_in_path(spec.map, spec.ego.route, agent)
            if in_path != (fault.subtype == FaultSubtype.IN_PATH):
                where = "in path" if in_path else "not in path"
                violations.append(f"fault {i}: target '{fault.target}' is {where}, subtype says {fault.subtype.value}")


def validate_scenario(spec: ScenarioSpec) -> List[str]:
    """
    Check the invariants a parsed scenario must satisfy.

    Returns:
        Human-readable violations, empty when the scenario is valid
    """
    violations: List[str] = []
    if spec.dt <= 0 or spec.duration <= 0:
        violations.append("duration and dt must be positive")
    elif abs(spec.duration / spec.dt - round(spec.duration / spec.dt)) > 1e-6:
        violations.append(f"duration {spec.duration} is not an integer multiple of dt {spec.dt}")

    lane_ids = set()
    for lane in spec.map.lanes:
        if lane.id in lane_ids:
            violations.append(f"lane '{lane.id}': duplicate id")
        lane_ids.add(lane.id)
        if len(lane.centerline) < 2:
            violations.append(f"lane '{lane.id}': centerline needs at least two points")
        if lane.direction not in (-1, 1):
            violations.append(f"lane '{lane.id}': direction must be +1 or -1")
        if lane.speed_limit <= 0:
            violations.append(f"lane '{lane.id}': speed limit must be positive")

    for light in spec.map.traffic_lights:
        lane = spec.map.lane(light.lane)
        if lane is None:
            violations.append(f"traffic light '{light.id}': unknown lane '{light.lane}'")
        elif len(lane.centerline) >= 2 and not 0.0 <= light.stop_s <= lane_polyline(lane).length:
            violations.append(f"traffic light '{light.id}': stop point lies outside its lane")

    if not spec.ego.route:
        violations.append("ego: route is empty")
    for lane_id in spec.ego.route:
        if lane_id not in lane_ids:
            violations.append(f"ego: route references unknown lane '{lane_id}'")
    if min(spec.ego.extent) <= 0:
        violations.append("ego: extent must be positive")
    if spec.ego.speed < 0:
        violations.append("ego: speed must be non-negative")

    seen = set()
    for i, agent in enumerate(spec.agents):
        if agent.id == EGO_ID or agent.id in seen:
            violations.append(f"agent {i}: id '{agent.id}' is not unique")
        seen.add(agent.id)
        if min(agent.extent) <= 0:
            violations.append(f"agent {i}: extent must be positive")
        if agent.speed < 0:
            violations.append(f"agent {i}: speed must be non-negative")
        if not all(math.isfinite(value) for value in (*agent.position, agent.heading, agent.speed)):
            violations.append(f"agent {i}: state must be finite")

    for agent_id, policy in spec.policies.items():
        if agent_id not in seen:
            violations.append(f"policy '{agent_id}': unknown agent")
        if policy.lane is not None and policy.lane not in lane_ids:
            violations.append(f"policy '{agent_id}': unknown lane '{policy.lane}'")
        if policy.kind == PolicyKind.REPLAY:
            times = [waypoint.t for waypoint in policy.trajectory]
            if times != sorted(times) or len(set(times)) != len(times):
                violations.append(f"policy '{agent_id}': trajectory times must be strictly increasing")

    _check_faults(spec, violations)
    return violations


def _error_location(error: dict) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


def parse_scenario(text: str, source: str = "<string>") -> ScenarioSpec:
    """
    Parse and validate scenario JSON.

    Raises:
        ScenarioSchemaError: malformed JSON, unsupported schema version or a field of the wrong shape
        ScenarioValidationError: the scenario parses but violates its invariants
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioSchemaError(exc.msg, line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ScenarioSchemaError("scenario must be a JSON object")

    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioSchemaError(f"unsupported schema version {version!r}, expected {SCHEMA_VERSION}",
                                  field="schema_version")
    try:
        spec = ScenarioSpec.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ScenarioSchemaError(first["msg"], field=_error_location(first)) from exc

    violations = validate_scenario(spec)
    if violations:
        raise ScenarioValidationError(violations, source=source)
    return spec


def load_scenario(path: PathLike) -> ScenarioSpec:
    path = Path(path)
    logger.debug(f"Loading scenario {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioSchemaError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse_scenario(text, source=str(path))


def dump_scenario(spec: ScenarioSpec, path: PathLike) -> None:
    Path(path).write_text(json.dumps(spec.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")


def list_corpus(corpus_dir: PathLike) -> List[Path]:
    """Scenario files of a corpus directory, sorted by name"""
    corpus = Path(corpus_dir)
    if not corpus.is_dir():
        raise ParameterError(f"corpus directory not found: {corpus}")
    return sorted(corpus.glob("*.json"))
