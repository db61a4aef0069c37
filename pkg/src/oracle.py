"""
Independent maximum-likelihood solver for (alpha, beta) and a dense evidence
evaluator. Used to check the q-EM fixed points, never by the fit itself.

The evidence depends on (alpha, beta) through beta and gamma = beta/alpha.
Eliminating beta at its stationary point,

    beta(gamma) = m / (sum_i ybar_i^2/(1 + lambda_i gamma) + residual)

leaves a 1-D problem in gamma whose objective does not involve nu:

    f(gamma) = m ln(sum_i ybar_i^2/(1 + lambda_i gamma) + residual)
               + sum_i ln(1 + lambda_i gamma)

The sums run over the positive eigenvalues of Phi^T Phi (they are the
nonzero eigenvalues of Phi Phi^T); residual is the part of ||y||^2 lying in
the null space of Phi Phi^T, where lambda = 0 contributes 1 and ln 1 = 0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, stats

from src.data import DesignMatrix, Precompute

logger = logging.getLogger("blrs")

ZERO_EIGEN_RTOL = 1e-12
GRID_POINTS = 256
GAMMA_MIN = 1e-12
GAMMA_MAX = 1e12
REL_WIDTH = 1e-10
FLAT_TOLERANCE = 1e-12
DENSE_MAX_ROWS = 200

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class OracleDomainError(ValueError):
    """Raised when the reduced objective is undefined (y = 0)."""
    pass


class FlatObjectiveError(ArithmeticError):
    """Raised when the gamma objective is constant over the whole grid."""
    pass


@dataclass(frozen=True, eq=False)
class SpectrumProjection:
    lambdas: np.ndarray
    ybar_sq: np.ndarray
    residual_sq: float

    @property
    def total(self) -> float:
        return float(self.ybar_sq.sum()) + self.residual_sq


@dataclass(frozen=True)
class GammaSolution:
    gamma: float
    beta: float
    alpha: float
    objective: float
    boundary: Optional[str] = None


def project_spectrum(pre: Precompute) -> SpectrumProjection:
    """Squared projections of y onto the eigenvectors of Phi Phi^T with nonzero eigenvalue.

    The eigenvector of Phi Phi^T paired with D_j > 0 is Phi v_j / sqrt(D_j), so
    ybar_j^2 = (y_pV)_j^2 / D_j without touching an m x m matrix.
    """
    D = np.asarray(pre.D, dtype=float)
    top = float(D.max()) if D.size else 0.0
    keep = D > ZERO_EIGEN_RTOL * top if top > 0.0 else np.zeros_like(D, dtype=bool)

    lambdas = D[keep]
    ybar_sq = pre.y_pV[keep] ** 2 / lambdas
    residual = pre.y_norm_sq - float(ybar_sq.sum())
    if residual < 0.0:
        if residual < -1e-8 * pre.y_norm_sq:
            logger.warning(f"project_spectrum: residual {residual:.3e} below rounding slack")
        residual = 0.0
    return SpectrumProjection(lambdas=lambdas, ybar_sq=ybar_sq, residual_sq=residual)


def _weighted_mass(sp: SpectrumProjection, gamma: float) -> float:
    return float(np.sum(sp.ybar_sq / (1.0 + sp.lambdas * gamma))) + sp.residual_sq


def gamma_objective(sp: SpectrumProjection, m: int, gamma: float) -> float:
    """m ln(sum ybar^2/(1+lambda gamma) + residual) + sum ln(1 + lambda gamma)."""
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    mass = _weighted_mass(sp, gamma)
    if not (mass > 0.0):
        raise OracleDomainError("gamma objective undefined: y is zero")
    return m * math.log(mass) + float(np.sum(np.log1p(sp.lambdas * gamma)))


def gamma_objective_derivative(sp: SpectrumProjection, m: int, gamma: float) -> float:
    """d/dgamma of gamma_objective."""
    mass = _weighted_mass(sp, gamma)
    if not (mass > 0.0):
        raise OracleDomainError("gamma objective undefined: y is zero")
    denom = 1.0 + sp.lambdas * gamma
    dmass = -float(np.sum(sp.ybar_sq * sp.lambdas / denom ** 2))
    return m * dmass / mass + float(np.sum(sp.lambdas / denom))


def beta_from_gamma(sp: SpectrumProjection, m: int, gamma: float) -> float:
    """The beta that maximizes the evidence for a fixed gamma."""
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    mass = _weighted_mass(sp, gamma)
    if sp.total <= 0.0:
        raise OracleDomainError("beta undefined: y is zero")
    if mass <= 0.0:
        return math.inf
    return m / mass


def _golden_section(f, a: float, b: float, rel_width: float) -> float:
    """Minimize f on [a, b] by golden-section search."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > rel_width * max(abs(a), abs(b), 1.0):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return c if fc < fd else d


def _refine_log_gamma(sp: SpectrumProjection, m: int, lo: float, hi: float, rel_width: float) -> float:
    """Minimizer of the objective over log(gamma) in [lo, hi].

    A derivative sign change inside the cell is solved with brentq;
    otherwise golden section on the objective values.
    """

    def slope(t: float) -> float:
        return gamma_objective_derivative(sp, m, math.exp(t))

    if slope(lo) < 0.0 < slope(hi):
        return optimize.brentq(slope, lo, hi, xtol=rel_width, rtol=4.0 * np.finfo(float).eps)
    return _golden_section(lambda t: gamma_objective(sp, m, math.exp(t)), lo, hi, rel_width)


def ml_solve(
    sp: SpectrumProjection,
    m: int,
    grid_points: int = GRID_POINTS,
    gamma_min: float = GAMMA_MIN,
    gamma_max: float = GAMMA_MAX,
    rel_width: float = REL_WIDTH,
) -> GammaSolution:
    """Minimize the gamma objective: log-grid scan, then a root of the derivative in the best cell.

    The search runs in log(gamma). Only the best grid cell and its neighbours
    are refined, so a multimodal objective cannot pull the search away from
    the best grid value. gamma = 0 is checked as well; an optimum at either
    end of the range is returned with boundary set.
    """
    if sp.total <= 0.0:
        raise OracleDomainError("maximum likelihood undefined: y is zero")
    if sp.lambdas.size == 0:
        raise OracleDomainError("maximum likelihood needs at least one positive eigenvalue")

    log_grid = np.linspace(math.log(gamma_min), math.log(gamma_max), grid_points)
    values = np.array([gamma_objective(sp, m, math.exp(t)) for t in log_grid])
    at_zero = gamma_objective(sp, m, 0.0)

    if np.ptp(np.append(values, at_zero)) <= FLAT_TOLERANCE * max(1.0, abs(at_zero)):
        raise FlatObjectiveError("gamma objective is flat over the search range; (alpha, beta) not identifiable")

    best = int(np.argmin(values))
    lo = log_grid[max(best - 1, 0)]
    hi = log_grid[min(best + 1, grid_points - 1)]
    t_star = _refine_log_gamma(sp, m, lo, hi, rel_width)
    gamma = math.exp(t_star)
    objective = gamma_objective(sp, m, gamma)
    if values[best] < objective:
        gamma, objective = math.exp(log_grid[best]), float(values[best])

    boundary = None
    if at_zero < objective:
        gamma, objective, boundary = 0.0, at_zero, "lower"
    elif best == grid_points - 1:
        boundary = "upper"
    elif best == 0 and gamma <= gamma_min * (1.0 + 1e-9):
        boundary = "lower"

    beta = beta_from_gamma(sp, m, gamma)
    alpha = beta / gamma if gamma > 0.0 else math.inf
    if boundary:
        logger.warning(f"ml_solve: optimum on the {boundary} end of the gamma range (gamma={gamma:.3e})")
    logger.debug(f"ml_solve: gamma={gamma:.12g} alpha={alpha:.12g} beta={beta:.12g} f={objective:.12g}")
    return GammaSolution(gamma=gamma, beta=beta, alpha=alpha, objective=objective, boundary=boundary)


def brute_evidence(phi: DesignMatrix, y: np.ndarray, nu: float, alpha: float, beta: float) -> float:
    """ln p(y) with B = beta^-1 I + alpha^-1 Phi Phi^T built densely (m <= 200)."""
    y = np.asarray(y, dtype=float).reshape(-1)
    m = y.shape[0]
    if m > DENSE_MAX_ROWS:
        raise ValueError(f"brute_evidence is limited to m <= {DENSE_MAX_ROWS}, got {m}")
    if not (alpha > 0.0 and beta > 0.0):
        raise ValueError("alpha and beta must be positive")
    P = phi.phi
    B = np.eye(m) / beta + (P @ P.T) / alpha
    zero = np.zeros(m)
    try:
        if math.isinf(nu):
            return float(stats.multivariate_normal.logpdf(y, mean=zero, cov=B))
        return float(stats.multivariate_t.logpdf(y, loc=zero, shape=B, df=nu))
    except np.linalg.LinAlgError as e:
        raise np.linalg.LinAlgError(f"B is singular: {e}")
