"""
Bayesian linear regression with Student-t assumptions (BLRS), fitted by q-EM.

Model: Student-t prior on w with nu degrees of freedom and precision alpha,
noise precision beta whose variance grows with alpha/nu * ||w||^2. nu = inf
(math.inf) is the Gaussian model (BLRG) and is handled as its own branch,
never as a large finite number.

Every per-iteration quantity is evaluated in the eigenbasis of Phi^T Phi
(see data.Precompute), so one iteration costs O(mM + M^2):

    mu        = V (D + alpha/beta I)^-1 y_pV
    y'B^-1 y  = beta (||y||^2 - y_p' mu)
    cov_scale = (nu + y'B^-1 y) / (nu + m)              (1 at nu = inf)
    tr C      = cov_scale * sum 1/(alpha + beta D_i)
    tr Phi'Phi C = cov_scale * sum D_i/(alpha + beta D_i)

E step: b = ||mu||^2 + tr C, c = ||y - Phi mu||^2 + tr Phi'Phi C.
M step: alpha = M/b, beta = m/c.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from src.data import DesignMatrix, Precompute
from src.qmath import entropic_index

logger = logging.getLogger("blrs")

NU_MIN = 1e-12
STOP_CRITERIA = ("params", "evidence")


class DegenerateInputError(ArithmeticError):
    """Raised when the E-step statistics vanish (y = 0 together with Phi = 0)."""
    pass


class InconsistentInputError(ArithmeticError):
    """Raised when cached quantities disagree beyond rounding (e.g. yBy < 0)."""
    pass


def nu_label(nu: float) -> str:
    return "inf" if math.isinf(nu) else f"{nu:g}"


def check_nu(nu: float) -> float:
    nu = float(nu)
    if math.isnan(nu) or (not math.isinf(nu) and nu < NU_MIN) or nu < 0:
        raise ValueError(f"nu must be >= {NU_MIN} or inf, got {nu}")
    return nu


def _check_positive(**values: float) -> None:
    for name, v in values.items():
        if not (v > 0.0) or not math.isfinite(v):
            raise ValueError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class Hyperparams:
    nu: float
    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "nu", check_nu(self.nu))
        _check_positive(alpha=self.alpha, beta=self.beta)

    @property
    def gaussian(self) -> bool:
        return math.isinf(self.nu)


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    mu: np.ndarray
    yBy: float
    cov_scale: float
    tr_C: float
    tr_PhiTPhi_C: float
    resid_sq: float


@dataclass(frozen=True)
class EStepStats:
    b: float
    c: float


@dataclass(frozen=True)
class FitConfig:
    rel_tol: float = 1e-7
    max_iter: int = 10000
    alpha0: float = 1.0
    beta0: float = 1.0
    stop_on: str = "params"

    def __post_init__(self):
        if not (self.rel_tol > 0.0):
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        _check_positive(alpha0=self.alpha0, beta0=self.beta0)
        if self.stop_on not in STOP_CRITERIA:
            raise ValueError(f"stop_on must be one of {STOP_CRITERIA}, got '{self.stop_on}'")


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    alpha: float
    beta: float
    log_evidence: float


@dataclass(eq=False)
class FitResult:
    hyperparams: Hyperparams
    mu: np.ndarray
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)

    @property
    def final_log_evidence(self) -> float:
        return self.trace[-1].log_evidence


# ─── Spectral posterior quantities ──────────────────────────────────


def posterior_mean(pre: Precompute, alpha: float, beta: float) -> np.ndarray:
    """mu = V (D + alpha/beta I)^-1 y_pV, the ridge solution with penalty alpha/beta."""
    _check_positive(alpha=alpha, beta=beta)
    return pre.V @ (pre.y_pV / (pre.D + alpha / beta))


def quad_form_yBy(pre: Precompute, mu: np.ndarray, beta: float) -> float:
    """y^T B^-1 y with B = beta^-1 I + alpha^-1 Phi Phi^T, via beta(||y||^2 - y_p' mu)."""
    value = beta * (pre.y_norm_sq - float(pre.y_p @ mu))
    if value < 0.0:
        if value < -1e-8 * beta * pre.y_norm_sq:
            raise InconsistentInputError(
                f"y'B^-1 y = {value:.6e} is negative; mu does not match this Precompute"
            )
        value = 0.0
    return value


def covariance_scale(nu: float, yBy: float, m: int) -> float:
    if math.isinf(nu):
        return 1.0
    return (nu + yBy) / (nu + m)


def posterior_cov_traces(
    pre: Precompute, nu: float, alpha: float, beta: float, yBy: float
) -> tuple[float, float, float]:
    """(cov_scale, tr C, tr Phi^T Phi C) from the eigenvalues of Phi^T Phi."""
    _check_positive(alpha=alpha, beta=beta)
    if yBy < 0.0:
        raise ValueError(f"yBy must be >= 0, got {yBy}")
    scale = covariance_scale(nu, yBy, pre.m)
    inv = 1.0 / (alpha + beta * pre.D)
    return scale, scale * float(inv.sum()), scale * float((pre.D * inv).sum())


def residual_norm_sq(pre: Precompute, phi: DesignMatrix, mu: np.ndarray) -> float:
    """||y - Phi mu||^2 = ||y||^2 - 2 y_p' mu + ||Phi mu||^2, clamped at 0."""
    fitted = phi.phi @ mu
    value = pre.y_norm_sq - 2.0 * float(pre.y_p @ mu) + float(fitted @ fitted)
    return max(value, 0.0)


def log_det_B(pre: Precompute, alpha: float, beta: float) -> float:
    """ln|B| from the spectrum of Phi Phi^T (D padded with m - M zeros)."""
    return float(np.sum(np.log(1.0 / beta + pre.D / alpha))) + (pre.m - pre.M) * math.log(1.0 / beta)


def log_evidence(pre: Precompute, nu: float, alpha: float, beta: float) -> float:
    """ln p(y; nu, alpha, beta): multivariate Student-t St(y | nu, 0, B), or N(y | 0, B) at nu = inf."""
    nu = check_nu(nu)
    _check_positive(alpha=alpha, beta=beta)
    mu = posterior_mean(pre, alpha, beta)
    yBy = quad_form_yBy(pre, mu, beta)
    logdet = log_det_B(pre, alpha, beta)
    m = pre.m
    if math.isinf(nu):
        return -0.5 * m * math.log(2.0 * math.pi) - 0.5 * logdet - 0.5 * yBy
    return (
        gammaln(0.5 * (nu + m))
        - gammaln(0.5 * nu)
        - 0.5 * m * math.log(nu * math.pi)
        - 0.5 * logdet
        - 0.5 * (nu + m) * math.log1p(yBy / nu)
    )


# ─── q-EM ────────────────────────────────────────────────────────────


def e_step(
    pre: Precompute, phi: DesignMatrix, nu: float, alpha: float, beta: float
) -> tuple[PosteriorSummary, EStepStats]:
    """Moments of the deformed posterior and the sufficient statistics b, c."""
    mu = posterior_mean(pre, alpha, beta)
    yBy = quad_form_yBy(pre, mu, beta)
    scale, tr_C, tr_PhiTPhi_C = posterior_cov_traces(pre, nu, alpha, beta, yBy)
    resid_sq = residual_norm_sq(pre, phi, mu)

    b = float(mu @ mu) + tr_C
    c = resid_sq + tr_PhiTPhi_C
    if not (b > 0.0) or not (c > 0.0):
        raise DegenerateInputError(
            f"E step statistics vanished (b={b}, c={c}); y and Phi are both zero"
        )

    summary = PosteriorSummary(
        mu=mu, yBy=yBy, cov_scale=scale, tr_C=tr_C, tr_PhiTPhi_C=tr_PhiTPhi_C, resid_sq=resid_sq
    )
    return summary, EStepStats(b=b, c=c)


def m_step(stats: EStepStats, M: int, m: int) -> tuple[float, float]:
    """alpha = M/b, beta = m/c. Same closed form for every nu."""
    _check_positive(b=stats.b, c=stats.c)
    return M / stats.b, m / stats.c


def _relative_change(new: float, old: float) -> float:
    return abs(new - old) / abs(new)


def fit_qem(pre: Precompute, phi: DesignMatrix, nu: float, config: FitConfig = FitConfig()) -> FitResult:
    """Iterate E and M steps from (alpha0, beta0) until the stopping rule holds.

    Default rule: |alpha - alpha_old|/alpha < rel_tol AND |beta - beta_old|/beta
    < rel_tol. The iteration count is the number of M steps executed. Running
    out of iterations returns converged=False.
    """
    nu = check_nu(nu)
    alpha, beta = float(config.alpha0), float(config.beta0)
    evidence = log_evidence(pre, nu, alpha, beta)
    trace = [TracePoint(0, alpha, beta, evidence)]
    logger.debug(
        f"fit_qem nu={nu_label(nu)} q={entropic_index(nu, pre.M, pre.m):.12g} "
        f"start alpha={alpha:.6g} beta={beta:.6g} log_evidence={evidence:.10g}"
    )

    converged = False
    iterations = 0
    for iterations in range(1, int(config.max_iter) + 1):
        _, stats = e_step(pre, phi, nu, alpha, beta)
        alpha_new, beta_new = m_step(stats, pre.M, pre.m)
        evidence_new = log_evidence(pre, nu, alpha_new, beta_new)
        trace.append(TracePoint(iterations, alpha_new, beta_new, evidence_new))

        if config.stop_on == "params":
            done = (_relative_change(alpha_new, alpha) < config.rel_tol
                    and _relative_change(beta_new, beta) < config.rel_tol)
        else:
            done = _relative_change(evidence_new, evidence) < config.rel_tol

        alpha, beta, evidence = alpha_new, beta_new, evidence_new
        if done:
            converged = True
            break

    if converged:
        logger.debug(f"fit_qem nu={nu_label(nu)} converged after {iterations} iteration(s)")
    else:
        logger.warning(
            f"fit_qem nu={nu_label(nu)} did not converge within max_iter={config.max_iter}"
        )

    return FitResult(
        hyperparams=Hyperparams(nu=nu, alpha=alpha, beta=beta),
        mu=posterior_mean(pre, alpha, beta),
        iterations=iterations,
        converged=converged,
        trace=trace,
    )


# ─── Prediction and dense cross-checks ──────────────────────────────


def predict(mu: np.ndarray, phi_new: np.ndarray) -> np.ndarray:
    """Point prediction phi_new @ mu. phi_new must already be normalized."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    phi_new = np.atleast_2d(np.asarray(phi_new, dtype=float))
    if phi_new.shape[1] != mu.shape[0]:
        raise ValueError(
            f"dimension mismatch: phi_new has {phi_new.shape[1]} column(s), mu has {mu.shape[0]}"
        )
    return phi_new @ mu


def posterior_dense(
    pre: Precompute, phi: DesignMatrix, nu: float, alpha: float, beta: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense (mu, A, C): A = (alpha I + beta Phi'Phi)^-1, C = cov_scale A, mu = beta A Phi'y.

    Intended for small M; the fit itself never forms these matrices.
    """
    _check_positive(alpha=alpha, beta=beta)
    P = phi.phi
    precision = alpha * np.eye(phi.M) + beta * (P.T @ P)
    try:
        A = np.linalg.inv(precision)
    except np.linalg.LinAlgError as e:
        raise np.linalg.LinAlgError(f"alpha I + beta Phi'Phi is singular: {e}")
    mu = beta * (A @ pre.y_p)
    yBy = quad_form_yBy(pre, mu, beta)
    return mu, A, covariance_scale(check_nu(nu), yBy, pre.m) * A
