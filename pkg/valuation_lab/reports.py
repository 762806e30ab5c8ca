"""
Report value types.

Reports record outcomes instead of raising: a failed property is data, not an error.
Every report exports to JSON the same way, via ``to_dict``, ``to_json`` and ``save_json``.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .config import SCHEMA_VERSION


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays (recursively) to plain Python values."""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value


class JsonReport:
    """Mixin providing JSON export for dataclass reports."""

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable(asdict(self))

    def to_json(self, indent: int = 2) -> str:
        """
        Export the report to JSON.

        Args:
            indent: JSON indentation level

        Returns:
            JSON string with sorted keys
        """
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def save_json(self, filepath: str) -> None:
        """
        Save the report to a JSON file.

        Args:
            filepath: Path to output JSON file
        """
        with open(filepath, "w", encoding="utf-8") as f:
            f.write(self.to_json())


@dataclass
class GrowthReport(JsonReport):
    """Outcome of a sampled check of |ξ(t)| <= d |t|^p."""

    label: str
    p: float
    d: float
    max_ratio: float
    argmax_t: float
    samples: int
    t_min: float
    t_max: float
    passed: bool

    @property
    def summary(self) -> str:
        if self.passed:
            return "no violation found"
        return f"violation: |xi(t)|/|t|^p = {self.max_ratio:.6g} at t = {self.argmax_t:.6g}"


@dataclass
class ProbeReport(JsonReport):
    """
    Tabulated outcome of a probe.

    Attributes:
        name: Probe identifier
        rows: One dictionary per tabulated point
        passed: Verdict of the probe
        verdict: Short verdict word ("pass", "fail", "convergent", ...)
        details: Extra scalar results
    """

    name: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    passed: bool = True
    verdict: str = "pass"
    details: Dict[str, Any] = field(default_factory=dict)

    def column(self, key: str) -> List[Any]:
        return [row[key] for row in self.rows]


@dataclass
class ZeroReport(JsonReport):
    """
    Structure of V(0).

    Attributes:
        dim: Ambient dimension
        value: The matrix V(0)
        symmetric_norm: Frobenius norm of the symmetric part
        rotation_coefficient: Extracted ŝ (antisymmetric part / ρ), 0 for n >= 3
        invariance_residual: max ‖φ V(0) φᵗ - V(0)‖_F over the forcing transforms
        conformant: Whether V(0) has the form sρ (n = 2) or 0 (n >= 3)
    """

    dim: int
    value: List[List[float]]
    symmetric_norm: float
    rotation_coefficient: float
    invariance_residual: float
    tolerance: float
    conformant: bool


@dataclass
class ExtractionReport(JsonReport):
    """
    Recovered ξ̂ samples and rotation coefficient ŝ of a black-box valuation.

    Attributes:
        alphas: Coefficients α probed
        xi_hat: ξ̂(α) for each α
        s_hat: Mean rotation coefficient (0 for n >= 3)
        s_spread: max |ŝ(α) - ŝ| over α
        fit_residuals: Per-α relative Frobenius residual of the rank-one fit
        entry_residuals: Per-α largest entrywise residual
    """

    dim: int
    alphas: List[float]
    xi_hat: List[float]
    s_hat: float
    s_spread: float
    fit_residuals: List[float]
    entry_residuals: List[float]

    @property
    def max_fit_residual(self) -> float:
        return max(self.fit_residuals) if self.fit_residuals else 0.0


@dataclass
class PropertyResult(JsonReport):
    """Aggregated outcome of one suite property."""

    name: str
    cases: int
    tolerance: float
    max_residual: float
    argmax_case: Optional[Dict[str, Any]]
    failures: List[Dict[str, Any]]
    passed: bool


@dataclass
class SuiteReport(JsonReport):
    """Machine-readable outcome of a verification suite run."""

    config: Dict[str, Any]
    properties: Dict[str, PropertyResult]
    coverage: Dict[str, List[str]]
    platform: Dict[str, str]
    wall_time: float = 0.0
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.properties.values())

    def failed_properties(self) -> List[str]:
        return [name for name, result in self.properties.items() if not result.passed]

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        data = to_jsonable(asdict(self))
        data["passed"] = self.passed
        data["failed_properties"] = self.failed_properties()
        if not include_timing:
            data.pop("wall_time", None)
        return data

    def to_json(self, indent: int = 2, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=indent, sort_keys=True)
