"""Shared fixtures."""

import numpy as np
import pytest

from src.data import DesignMatrix, precompute


@pytest.fixture
def hand_case():
    """Phi = I_2, y = (1, 1)."""
    phi = DesignMatrix(phi=np.eye(2))
    y = np.array([1.0, 1.0])
    return phi, y, precompute(phi, y)


@pytest.fixture
def config_file(tmp_path):
    """A config.ini that keeps log files inside the test's tmp directory."""
    path = tmp_path / "config.ini"
    path.write_text(
        f"[paths]\nlog_dir = {tmp_path / 'logs'}\n\n[benchmark]\nworkers = 2\n",
        encoding="utf-8",
    )
    return str(path)
