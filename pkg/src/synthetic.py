"""
Synthetic regression data drawn from the Gaussian generative model:

    Phi_ij ~ N(0, 1),  w ~ N(0, alpha^-1 I),  y = Phi w + eps,  eps ~ N(0, beta^-1 I)

Output is deterministic for a fixed seed, down to the bytes of the CSV file.
"""

import logging

import numpy as np
import pandas as pd

logger = logging.getLogger("blrs")

TARGET_NAME = "y"


def make_synthetic(m: int, M: int, alpha_true: float, beta_true: float, seed: int) -> pd.DataFrame:
    """Return a frame with feature columns x1..xM and target column y."""
    if M < 1 or m <= M:
        raise ValueError(f"need m > M >= 1, got m={m}, M={M}")
    if not (alpha_true > 0.0 and beta_true > 0.0):
        raise ValueError("alpha_true and beta_true must be positive")

    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((m, M))
    w = rng.standard_normal(M) / np.sqrt(alpha_true)
    y = phi @ w + rng.standard_normal(m) / np.sqrt(beta_true)

    frame = pd.DataFrame(phi, columns=[f"x{j + 1}" for j in range(M)])
    frame[TARGET_NAME] = y
    return frame


def write_synthetic_csv(
    path: str, m: int, M: int, alpha_true: float, beta_true: float, seed: int
) -> None:
    frame = make_synthetic(m, M, alpha_true, beta_true, seed)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.info(f"Wrote synthetic dataset {path}: m={m}, M={M}, alpha={alpha_true}, beta={beta_true}, seed={seed}")
