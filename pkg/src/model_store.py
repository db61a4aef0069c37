"""
Fitted-model persistence.

JSON layout (field names fixed):

{
  "nu": 10.0,                      # or "inf"
  "alpha": 2.5, "beta": 180.3,     # alpha may be "inf" for a gamma = 0 oracle fit
  "mu": [...],
  "normalization": {"means": [...], "norms": [...], "dropped": [...]},
  "iterations": 42,
  "converged": true
}

Infinity is not valid JSON, so it is written as the string "inf", the same
token the command line accepts for nu.
"""

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from src.data import DataError, NormalizationReport

logger = logging.getLogger("blrs")

INF_TOKEN = "inf"
_FIELDS = ("nu", "alpha", "beta", "mu", "normalization", "iterations", "converged")


class ModelFormatError(DataError):
    """Raised when a model file is missing fields or holds bad values."""
    pass


@dataclass(eq=False)
class StoredModel:
    nu: float
    alpha: float
    beta: float
    mu: np.ndarray
    normalization: NormalizationReport
    iterations: int
    converged: bool


def encode_float(x: float):
    return INF_TOKEN if math.isinf(x) and x > 0 else float(x)


def decode_float(value, name: str) -> float:
    if isinstance(value, str):
        if value.strip().lower() == INF_TOKEN:
            return math.inf
        raise ModelFormatError(f"field '{name}': unexpected string {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelFormatError(f"field '{name}': expected a number, got {type(value).__name__}")
    return float(value)


def decode_list(value, name: str) -> list:
    if not isinstance(value, list):
        raise ModelFormatError(f"field '{name}': expected a list, got {type(value).__name__}")
    return value


def decode_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ModelFormatError(f"field '{name}': expected an integer, got {value!r}")
    return value


def save_model(path: str, model: StoredModel) -> None:
    report = model.normalization
    document = {
        "nu": encode_float(model.nu),
        "alpha": encode_float(model.alpha),
        "beta": encode_float(model.beta),
        "mu": [float(v) for v in np.asarray(model.mu).reshape(-1)],
        "normalization": {
            "means": [float(v) for v in report.means],
            "norms": [float(v) for v in report.norms],
            "dropped": list(report.dropped_columns),
        },
        "iterations": int(model.iterations),
        "converged": bool(model.converged),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)
    logger.debug(f"Model saved: {path}")


def load_model(path: str) -> StoredModel:
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"{path} is not valid JSON: {e}")

    if not isinstance(document, dict):
        raise ModelFormatError(f"{path}: top level must be an object")
    missing = [k for k in _FIELDS if k not in document]
    if missing:
        raise ModelFormatError(f"{path}: missing field(s) {', '.join(missing)}")

    norm = document["normalization"]
    if not isinstance(norm, dict) or any(k not in norm for k in ("means", "norms", "dropped")):
        raise ModelFormatError(f"{path}: normalization needs means, norms and dropped")

    mu = np.array([decode_float(v, "mu") for v in decode_list(document["mu"], "mu")], dtype=float)
    report = NormalizationReport(
        means=np.array([decode_float(v, "means") for v in decode_list(norm["means"], "means")], dtype=float),
        norms=np.array([decode_float(v, "norms") for v in decode_list(norm["norms"], "norms")], dtype=float),
        dropped_columns=[decode_int(j, "dropped") for j in decode_list(norm["dropped"], "dropped")],
    )
    if mu.shape[0] != report.means.shape[0]:
        raise ModelFormatError(
            f"{path}: mu has {mu.shape[0]} weight(s) but normalization describes {report.means.shape[0]} column(s)"
        )

    return StoredModel(
        nu=decode_float(document["nu"], "nu"),
        alpha=decode_float(document["alpha"], "alpha"),
        beta=decode_float(document["beta"], "beta"),
        mu=mu,
        normalization=report,
        iterations=decode_int(document["iterations"], "iterations"),
        converged=bool(document["converged"]),
    )
