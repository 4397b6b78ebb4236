"""JSON problem files and result serialization.

A problem file looks like::

    {
      "dim": 2,
      "family": "gaussian",            # optional: gaussian | location-scatter | ellipsoid
      "weights": [0.5, 0.5],           # optional, defaults to uniform
      "measures": [
        {"mean": [0, 0], "cov": [9, 0, 0, 1]},
        {"mean": [0, 0], "cov": [[1, 0], [0, 4]]}
      ]
    }

``cov`` is row-major, either flat (``dim*dim`` numbers) or nested. A
barycenter result JSON (top-level ``dim``, ``mean`` and ``cov``) is also
accepted and read as a single-measure problem.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidProblem
from .fixpoint import FAMILIES, BarycenterResult
from .gausswass import BarycenterProblem, GaussianMeasure

SYMMETRY_TOL = 1e-9


class ProblemFileError(InvalidProblem):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    dim: int
    measures: tuple[GaussianMeasure, ...]
    weights: np.ndarray
    family: str = "gaussian"

    def to_problem(self) -> BarycenterProblem:
        return BarycenterProblem(self.measures, self.weights)


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ProblemFileError(f"{where}: missing field '{key}'")
    return obj[key]


def _numbers(value, where: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"{where}: expected numbers ({exc})") from None
    if not np.all(np.isfinite(arr)):
        raise ProblemFileError(f"{where}: non-finite value")
    return arr


def _parse_cov(value, dim: int, where: str) -> np.ndarray:
    arr = _numbers(value, where)
    if arr.size != dim * dim:
        raise ProblemFileError(f"{where}: expected {dim * dim} entries, got {arr.size}")
    if arr.ndim not in (1, 2) or (arr.ndim == 2 and arr.shape != (dim, dim)):
        raise ProblemFileError(f"{where}: expected a flat row-major array or a {dim}x{dim} nested array")
    cov = arr.reshape(dim, dim)
    scale = max(1.0, float(np.max(np.abs(cov))))
    if float(np.max(np.abs(cov - cov.T))) > SYMMETRY_TOL * scale:
        raise ProblemFileError(f"{where}: matrix is not symmetric")
    return 0.5 * (cov + cov.T)


def _parse_measure(obj, dim: int, where: str) -> GaussianMeasure:
    if not isinstance(obj, dict):
        raise ProblemFileError(f"{where}: expected an object")
    mean = _numbers(_require(obj, "mean", where), f"{where}.mean").reshape(-1)
    if mean.size != dim:
        raise ProblemFileError(f"{where}.mean: expected {dim} entries, got {mean.size}")
    cov = _parse_cov(_require(obj, "cov", where), dim, f"{where}.cov")
    return GaussianMeasure(mean, cov)


def parse_problem(obj) -> ProblemSpec:
    """Validate a decoded problem document; raises ``ProblemFileError`` naming the offending field."""
    if not isinstance(obj, dict):
        raise ProblemFileError("problem file: expected a JSON object")
    dim = _require(obj, "dim", "problem")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ProblemFileError("problem.dim: expected a positive integer")
    family = obj.get("family", "gaussian")
    if family not in FAMILIES:
        raise ProblemFileError(f"problem.family: expected one of {', '.join(FAMILIES)}")

    if "measures" not in obj and "cov" in obj:
        measures = (_parse_measure(obj, dim, "problem"),)
    else:
        raw = _require(obj, "measures", "problem")
        if not isinstance(raw, list) or not raw:
            raise ProblemFileError("problem.measures: expected a non-empty array")
        measures = tuple(_parse_measure(m, dim, f"measures[{i}]") for i, m in enumerate(raw))

    k = len(measures)
    if "weights" in obj and "measures" in obj:
        weights = _numbers(obj["weights"], "problem.weights").reshape(-1)
        if weights.size != k:
            raise ProblemFileError(f"problem.weights: expected {k} entries, got {weights.size}")
        if np.any(weights <= 0):
            raise ProblemFileError("problem.weights: weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ProblemFileError(f"problem.weights: weights sum to {weights.sum()!r}, not 1")
    else:
        weights = np.full(k, 1.0 / k)
    return ProblemSpec(dim, measures, weights, family)


def load_problem(path) -> ProblemSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_problem(obj)


def _flat(a: np.ndarray) -> list[float]:
    return [float(x) for x in np.asarray(a).reshape(-1)]


def _json_float(x: float):
    return float(x) if math.isfinite(x) else None


def result_to_json(result: BarycenterResult) -> dict:
    """JSON-ready result; floats use Python's shortest round-trip repr, so re-reading is bit-exact."""
    report = result.bound_report
    return {
        "family": result.family,
        "variant": result.variant.value,
        "dim": int(result.cov.shape[0]),
        "mean": _flat(result.mean),
        "cov": _flat(result.cov),
        "n_iter": int(result.n_iter),
        "n_steps": int(result.n_steps),
        "converged": bool(result.converged),
        "final_residual": _json_float(result.final_residual),
        "det_slack": _json_float(report.det_slack),
        "trace_slack": _json_float(report.trace_slack),
        "bound_violations": list(report.violations),
    }
