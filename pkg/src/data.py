"""
Dataset ingestion, column normalization and the one-time spectral
precomputation every fit iteration reads from.

CSV in: numeric, comma separated, optional header row, target picked by
name or index. Features are centered and scaled to unit Euclidean length
(identity basis, so the design matrix is the normalized feature matrix).
Targets are left as they are.

Precompute caches the eigendecomposition of Phi^T Phi together with
y_p = Phi^T y, y_pV = V^T y_p and ||y||^2. After it is built nothing in a fit
touches an M x M factorization again.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger("blrs")

EIGEN_METHODS = ("lapack", "jacobi")
JACOBI_MAX_SWEEPS = 100
JACOBI_REL_THRESHOLD = 1e-12
NEGATIVE_EIGEN_CLAMP = 1e-10


class DataError(Exception):
    """Raised on unusable input data (missing columns, empty files, bad shapes)."""
    pass


class CSVParseError(DataError):
    """Raised when a CSV cell is not a finite number."""

    def __init__(self, line: int, column: str, cell: str):
        self.line = line
        self.column = column
        self.cell = cell
        super().__init__(f"line {line}, column '{column}': cannot parse {cell!r} as a finite number")


class EigenSolverError(ArithmeticError):
    """Raised when the symmetric eigensolver fails or its output is inconsistent."""
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Raw samples: features (m x n) and targets (m)."""
    features: np.ndarray
    targets: np.ndarray
    column_names: Optional[list] = None

    def __post_init__(self):
        features = _readonly(self.features)
        targets = _readonly(self.targets).reshape(-1)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise DataError(f"features must be a non-empty m x n matrix, got shape {features.shape}")
        if targets.shape[0] != features.shape[0]:
            raise DataError(
                f"targets length {targets.shape[0]} does not match {features.shape[0]} feature rows"
            )
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
            raise DataError("dataset contains non-finite entries")
        if self.column_names is not None and len(self.column_names) != features.shape[1]:
            raise DataError("column_names length does not match feature count")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Phi (m x M). Only the identity basis is supported."""
    phi: np.ndarray
    basis: str = "identity"

    def __post_init__(self):
        phi = _readonly(self.phi)
        if phi.ndim != 2:
            raise DataError(f"design matrix must be 2-D, got shape {phi.shape}")
        if not np.all(np.isfinite(phi)):
            raise DataError("design matrix contains non-finite entries")
        if self.basis != "identity":
            raise DataError(f"unsupported basis '{self.basis}'")
        object.__setattr__(self, "phi", phi)

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def M(self) -> int:
        return self.phi.shape[1]


@dataclass(frozen=True, eq=False)
class NormalizationReport:
    """Statistics of the retained columns plus the indices of dropped ones."""
    means: np.ndarray
    norms: np.ndarray
    dropped_columns: list = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "means", _readonly(self.means).reshape(-1))
        object.__setattr__(self, "norms", _readonly(self.norms).reshape(-1))
        object.__setattr__(self, "dropped_columns", [int(j) for j in self.dropped_columns])
        if self.means.shape != self.norms.shape:
            raise DataError("means and norms must have the same length")
        if np.any(self.norms <= 0.0):
            raise DataError("retained column norms must be positive")

    @property
    def feature_count(self) -> int:
        """Raw feature count the report expects (retained + dropped)."""
        return self.means.shape[0] + len(self.dropped_columns)


@dataclass(frozen=True, eq=False)
class Precompute:
    """Spectral cache: Phi^T Phi = V diag(D) V^T, D descending and >= 0."""
    V: np.ndarray
    D: np.ndarray
    y_p: np.ndarray
    y_pV: np.ndarray
    y_norm_sq: float
    m: int
    M: int


# ─── CSV ingestion ───────────────────────────────────────────────────


def load_csv(
    path: str,
    target_column: Union[str, int],
    has_header: bool = True,
    delimiter: str = ",",
) -> Dataset:
    """Load a numeric CSV file into a Dataset.

    target_column is a header name, or a 0-based column index (also accepted
    as a digit string, which is the only option without a header row).
    Every cell must parse as a finite number.
    """
    names, numeric = _read_numeric_csv(path, has_header, delimiter)
    target_name = _resolve_target(names, target_column)

    feature_names = [n for n in names if n != target_name]
    if not feature_names:
        raise DataError(f"{path}: no feature columns besides target '{target_name}'")

    features = np.column_stack([numeric[n] for n in feature_names])
    dataset = Dataset(
        features=features,
        targets=numeric[target_name],
        column_names=feature_names if has_header else None,
    )
    logger.debug(f"Loaded {path}: m={dataset.m}, n={dataset.n}, target='{target_name}'")
    return dataset


def load_feature_matrix(
    path: str,
    has_header: bool = True,
    exclude_column: Optional[Union[str, int]] = None,
    delimiter: str = ",",
) -> np.ndarray:
    """Load a numeric CSV as a raw feature matrix, optionally leaving one column out."""
    names, numeric = _read_numeric_csv(path, has_header, delimiter)
    if exclude_column is not None:
        excluded = _resolve_target(names, exclude_column)
        names = [n for n in names if n != excluded]
    if not names:
        raise DataError(f"{path}: no feature columns")
    return np.column_stack([numeric[n] for n in names])


def _read_numeric_csv(path: str, has_header: bool, delimiter: str) -> tuple[list[str], dict]:
    """Read every column of a CSV as float, reporting the first bad cell by line."""
    try:
        frame = pd.read_csv(
            path,
            sep=delimiter,
            header=0 if has_header else None,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise DataError(f"empty file: {path}")

    if frame.shape[0] == 0:
        raise DataError(f"no data rows in {path}")

    names = [str(c) for c in frame.columns]
    frame.columns = names

    first_line = 2 if has_header else 1
    numeric = {}
    for name in names:
        values = pd.to_numeric(frame[name].str.strip(), errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.argmax(bad))
            raise CSVParseError(first_line + row, name, frame[name].iloc[row])
        numeric[name] = values
    return names, numeric


def _resolve_target(names: list[str], target_column: Union[str, int]) -> str:
    if isinstance(target_column, str) and target_column in names:
        return target_column
    index = None
    if isinstance(target_column, int):
        index = target_column
    elif isinstance(target_column, str) and target_column.strip().lstrip("-").isdigit():
        index = int(target_column)
    if index is not None and -len(names) <= index < len(names):
        return names[index]
    raise DataError(f"unknown target column: {target_column!r} (columns: {', '.join(names)})")


def take_rows(dataset: Dataset, idx: np.ndarray) -> Dataset:
    """Subset a dataset by row indices, keeping the given order."""
    idx = np.asarray(idx, dtype=int)
    return Dataset(
        features=dataset.features[idx],
        targets=dataset.targets[idx],
        column_names=dataset.column_names,
    )


def kfold_split(m: int, folds: int, seed: int) -> list[np.ndarray]:
    """Shuffle row indices with a seeded generator and cut them into contiguous folds."""
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if m < folds:
        raise DataError(f"cannot split {m} rows into {folds} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    return [np.asarray(part) for part in np.array_split(perm, folds)]


# ─── Normalization ───────────────────────────────────────────────────


def normalize_columns(dataset: Dataset) -> tuple[DesignMatrix, NormalizationReport]:
    """Center every column and scale it to unit length; drop constant columns."""
    if dataset.m < 2:
        raise DataError(f"normalization needs at least 2 rows, got {dataset.m}")

    X = dataset.features
    constant = np.ptp(X, axis=0) == 0.0
    dropped = [int(j) for j in np.flatnonzero(constant)]
    kept = np.flatnonzero(~constant)
    if kept.size == 0:
        raise DataError("all feature columns are constant; nothing to regress on")
    if dropped:
        logger.warning(f"Dropped {len(dropped)} constant column(s): {dropped}")

    Xk = X[:, kept]
    means = Xk.mean(axis=0)
    centered = Xk - means
    norms = np.linalg.norm(centered, axis=0)
    phi = centered / norms

    if phi.shape[1] > phi.shape[0]:
        logger.warning(f"M={phi.shape[1]} exceeds m={phi.shape[0]}; Phi^T Phi is rank deficient")

    return DesignMatrix(phi=phi), NormalizationReport(means=means, norms=norms, dropped_columns=dropped)


def apply_normalization(features: np.ndarray, report: NormalizationReport) -> np.ndarray:
    """Map raw features (k x n) into the training design space (k x M)."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[1] != report.feature_count:
        raise DataError(
            f"expected {report.feature_count} feature column(s), found {features.shape[1]}"
        )
    keep = np.setdiff1d(np.arange(features.shape[1]), report.dropped_columns)
    return (features[:, keep] - report.means) / report.norms


# ─── Eigendecomposition ─────────────────────────────────────────────


def sym_eigendecompose(S: np.ndarray, method: str = "lapack") -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Ties keep solver order (stable sort). Each eigenvector is flipped so its
    largest-magnitude entry is positive, which makes the output
    deterministic for identical input.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    S = 0.5 * (S + S.T)

    if method == "lapack":
        try:
            D, V = np.linalg.eigh(S)
        except np.linalg.LinAlgError as e:
            raise EigenSolverError(f"symmetric eigensolver did not converge: {e}")
    elif method == "jacobi":
        D, V = _jacobi_eigh(S)
    else:
        raise ValueError(f"unknown eigensolver '{method}', expected one of {EIGEN_METHODS}")

    order = np.argsort(-D, kind="stable")
    D = D[order]
    V = V[:, order]

    pivot = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[pivot, np.arange(V.shape[1])] < 0.0, -1.0, 1.0)
    return V * signs, D


def _jacobi_eigh(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations until the off-diagonal mass is negligible."""
    A = S.copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0 or n == 1:
        return np.diag(A).copy(), V

    threshold = JACOBI_REL_THRESHOLD * scale
    for sweep in range(1, JACOBI_MAX_SWEEPS + 1):
        off = np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2))
        if off <= threshold:
            logger.debug(f"Jacobi converged after {sweep - 1} sweep(s)")
            return np.diag(A).copy(), V

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0.0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0

                v_p = V[:, p].copy()
                v_q = V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q

    raise EigenSolverError(f"Jacobi eigensolver exceeded its budget of {JACOBI_MAX_SWEEPS} sweeps")


# ─── Spectral precomputation ────────────────────────────────────────


def precompute(phi: DesignMatrix, y: np.ndarray, method: str = "lapack") -> Precompute:
    """Eigendecompose Phi^T Phi once and cache the projections of y."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != phi.m:
        raise ValueError(f"y has {y.shape[0]} entries but Phi has {phi.m} rows")

    gram = phi.phi.T @ phi.phi
    V, D = sym_eigendecompose(gram, method=method)

    tol = NEGATIVE_EIGEN_CLAMP * max(1.0, float(np.max(np.abs(D))))
    if np.any(D < -tol):
        raise EigenSolverError(f"Phi^T Phi has a negative eigenvalue {D.min():.3e}")
    D = np.clip(D, 0.0, None)

    y_p = phi.phi.T @ y
    pre = Precompute(
        V=_readonly(V),
        D=_readonly(D),
        y_p=_readonly(y_p),
        y_pV=_readonly(V.T @ y_p),
        y_norm_sq=float(y @ y),
        m=phi.m,
        M=phi.M,
    )
    logger.debug(
        f"Precompute: m={pre.m}, M={pre.M}, eigenvalues [{D[-1]:.4g}, {D[0]:.4g}], ||y||^2={pre.y_norm_sq:.6g}"
    )
    return pre
