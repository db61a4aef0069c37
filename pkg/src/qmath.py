"""
Nonextensive calculus primitives: q-exponent, q-logarithm and the Tsallis
divergence between two 1-D densities.

The q-EM fit never evaluates these numerically; they exist so the
foundations of the deformed EM bound (inverse pair, product rules,
positivity of the divergence) can be checked by the property suite.

q within 1e-12 of 1 is treated as q = 1: (x^(1-q) - 1)/(1-q) loses all
precision there.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.special import rel_entr

Q_ONE_TOLERANCE = 1e-12
DEFAULT_GRID_POINTS = 4096
MIN_GRID_POINTS = 64
NORMALIZATION_TOLERANCE = 1e-6


class QDomainError(ValueError):
    """Raised when a q-function is evaluated outside its domain."""
    pass


class QuadratureError(ArithmeticError):
    """Raised when the divergence integrand is not finite on the grid."""
    pass


@dataclass(frozen=True)
class Density1D:
    """A 1-D density on [lo, hi]. evaluator must accept numpy arrays."""
    evaluator: Callable[[np.ndarray], np.ndarray]
    lo: float
    hi: float

    def grid(self, grid_points: int) -> np.ndarray:
        return np.linspace(self.lo, self.hi, grid_points)

    def values(self, x: np.ndarray) -> np.ndarray:
        v = np.asarray(self.evaluator(x), dtype=float)
        if v.shape != x.shape:
            v = np.broadcast_to(v, x.shape)
        return v


def _is_one(q: float) -> bool:
    return abs(q - 1.0) <= Q_ONE_TOLERANCE


def q_exp(q: float, x: float) -> float:
    """[1 + (1-q)x]_+ ^ (1/(1-q)); exp(x) at q = 1."""
    if not (math.isfinite(q) and math.isfinite(x)):
        raise QDomainError(f"q_exp needs finite arguments, got q={q}, x={x}")
    if _is_one(q):
        return math.exp(x)

    one_minus_q = 1.0 - q
    base = 1.0 + one_minus_q * x
    if base <= 0.0:
        # Clipped to zero: fine for a positive exponent, a pole otherwise.
        if one_minus_q > 0.0:
            return 0.0
        raise QDomainError(
            f"q_exp({q}, {x}): base [1+(1-q)x]_+ is 0 with negative exponent {1.0 / one_minus_q}"
        )
    # log1p keeps precision when (1-q)x is tiny (q close to 1).
    return math.exp(math.log1p(one_minus_q * x) / one_minus_q)


def q_log(q: float, x: float) -> float:
    """(x^(1-q) - 1)/(1-q); ln(x) at q = 1."""
    if not math.isfinite(q):
        raise QDomainError(f"q_log needs finite q, got {q}")
    if not (x > 0.0) or not math.isfinite(x):
        raise QDomainError(f"q_log({q}, {x}): x must be positive and finite")
    if _is_one(q):
        return math.log(x)
    one_minus_q = 1.0 - q
    return math.expm1(one_minus_q * math.log(x)) / one_minus_q


def entropic_index(nu: float, M: int, m: int) -> float:
    """The q matching a BLRS model: 1/(q-1) = (nu+M+m)/2, q = 1 for nu = inf."""
    if math.isinf(nu):
        return 1.0
    return 1.0 + 2.0 / (nu + M + m)


def _check_normalized(density: Density1D, x: np.ndarray, values: np.ndarray, name: str) -> None:
    if np.any(values < 0.0) or not np.all(np.isfinite(values)):
        raise QuadratureError(f"density {name} is negative or non-finite on the grid")
    mass = float(simpson(values, x=x))
    if abs(mass - 1.0) > NORMALIZATION_TOLERANCE:
        raise QDomainError(
            f"density {name} integrates to {mass:.9f} on [{density.lo}, {density.hi}], expected 1"
        )


def tsallis_divergence_1d(
    p: Density1D,
    t: Density1D,
    q: float,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> float:
    """Tsallis divergence D_q(p || t) by composite Simpson quadrature.

    q = 1 gives the KL divergence. Both densities must share their support.
    """
    if not math.isfinite(q) or q <= 0.0:
        raise QDomainError(f"Tsallis divergence needs q > 0, got {q}")
    if grid_points < MIN_GRID_POINTS:
        raise ValueError(f"grid_points must be >= {MIN_GRID_POINTS}, got {grid_points}")
    if (p.lo, p.hi) != (t.lo, t.hi):
        raise ValueError(
            f"densities must share a support: [{p.lo}, {p.hi}] vs [{t.lo}, {t.hi}]"
        )

    x = p.grid(grid_points)
    pv = p.values(x)
    tv = t.values(x)
    _check_normalized(p, x, pv, "p")
    _check_normalized(t, x, tv, "t")

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if _is_one(q):
            integrand = rel_entr(pv, tv)
        else:
            integrand = np.power(pv, q) * np.power(tv, 1.0 - q)
            # 0^q * t^(1-q) is 0 wherever p vanishes.
            integrand = np.where(pv == 0.0, 0.0, integrand)

    if not np.all(np.isfinite(integrand)):
        bad = int(np.argmax(~np.isfinite(integrand)))
        raise QuadratureError(f"integrand not finite at x={x[bad]:.6g} (q={q})")

    integral = float(simpson(integrand, x=x))
    if _is_one(q):
        return integral
    return (integral - 1.0) / (q - 1.0)
