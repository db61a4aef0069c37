"""Problem builders shared by the test modules."""

import numpy as np

from src.data import Dataset, DesignMatrix, normalize_columns, precompute
from src.synthetic import make_synthetic


def random_problem(m: int, M: int, seed: int):
    """Un-normalized Gaussian design and target: (DesignMatrix, y, Precompute)."""
    rng = np.random.default_rng(seed)
    phi = DesignMatrix(phi=rng.standard_normal((m, M)))
    y = rng.standard_normal(m)
    return phi, y, precompute(phi, y)


def planted_problem(m: int, M: int, seed: int, noise_sd: float = 0.5, scale: float = 1.0):
    """Un-normalized design with y = Phi w + noise, so the evidence optimum is interior."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, M))
    w = rng.standard_normal(M)
    y = scale * (X @ w + noise_sd * rng.standard_normal(m))
    phi = DesignMatrix(phi=X)
    return phi, y, precompute(phi, y)


def synthetic_problem(seed: int, m: int = 500, M: int = 10, alpha_true: float = 1.0, beta_true: float = 100.0):
    """Normalized synthetic regression problem: (DesignMatrix, y, Precompute)."""
    frame = make_synthetic(m, M, alpha_true, beta_true, seed)
    dataset = Dataset(features=frame.drop(columns="y").to_numpy(), targets=frame["y"].to_numpy())
    phi, _ = normalize_columns(dataset)
    return phi, dataset.targets, precompute(phi, dataset.targets)


def rel_err(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))
