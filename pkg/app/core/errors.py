from typing import List, Optional


class RiskMonitorError(ValueError):
    """Base class for all domain errors raised by the risk monitor"""


class ParameterError(RiskMonitorError):
    """Invalid numeric parameter (probabilities, sample counts, thresholds)"""


class EmptySampleError(ParameterError):
    """An empirical distribution was requested from zero samples"""

    def __init__(self, message: str = "empty sample set"):
        super().__init__(message)


class FaultResolutionError(RiskMonitorError):
    """A fault cannot be applied to the scene it targets"""


class ScenarioSchemaError(RiskMonitorError):
    """A scenario file could not be parsed against the scenario schema"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class ScenarioValidationError(RiskMonitorError):
    """A parsed scenario violates one or more scenario invariants"""

    def __init__(self, violations: List[str], source: Optional[str] = None):
        self.violations = list(violations)
        where = f"{source}: " if source else ""
        super().__init__(f"{where}invalid scenario: " + "; ".join(self.violations))


class ReportError(RiskMonitorError):
    """A benchmark report could not be produced"""
