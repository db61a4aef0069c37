"""
The nu sweep: for each fold trial, fit q-EM once per nu on the training
folds and tabulate (nu, alpha, beta, cnt).

The converged (alpha, beta) should not depend on nu; the iteration count
does, and the table ends with the speedup of the smallest nu against nu = inf.

Fits within a trial run concurrently on one shared, read-only Precompute.
Rows come back in the order the nus were given, so the printed table is
identical between runs. Wall-clock times go to the log, not the table.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.blrs_core import FitConfig, check_nu, fit_qem, nu_label, predict
from src.data import (
    Dataset,
    apply_normalization,
    kfold_split,
    normalize_columns,
    precompute,
    take_rows,
)

logger = logging.getLogger("blrs")

DEFAULT_NUS = (1e-8, 1e-5, 1e-2, 10.0, 1e4, math.inf)
NEWS_DATASET_URL = "http://archive.ics.uci.edu/ml/datasets/Online+News+Popularity"


@dataclass(frozen=True)
class SplitSpec:
    folds: int = 5
    seed: int = 42
    trial: int = 1

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if not 1 <= self.trial <= self.folds:
            raise ValueError(f"trial must be in 1..{self.folds}, got {self.trial}")


@dataclass(frozen=True)
class BenchmarkRow:
    trial: int
    nu: float
    alpha: float
    beta: float
    cnt: int
    converged: bool
    wall_time_ms: float
    test_mse: float


def parse_nu(token: str) -> float:
    """'inf' (any case) is nu = infinity; anything else must be a positive number."""
    text = str(token).strip()
    value = math.inf if text.lower() == "inf" else float(text)
    return check_nu(value)


def parse_nus(text: str) -> list[float]:
    nus = [parse_nu(t) for t in text.split(",") if t.strip()]
    if not nus:
        raise ValueError("empty nu list")
    return nus


def split_trial(dataset: Dataset, split: SplitSpec) -> tuple[Dataset, Dataset]:
    """(train, test) for one trial: the trial's fold is held out, the rest train."""
    parts = kfold_split(dataset.m, split.folds, split.seed)
    test_idx = parts[split.trial - 1]
    train_idx = np.concatenate([p for i, p in enumerate(parts) if i != split.trial - 1])
    return take_rows(dataset, train_idx), take_rows(dataset, test_idx)


def run_trial(
    dataset: Dataset,
    split: SplitSpec,
    nus: Sequence[float] = DEFAULT_NUS,
    config: FitConfig = FitConfig(),
    workers: int = 4,
    eigensolver: str = "lapack",
) -> list[BenchmarkRow]:
    """Fit every nu on the training part of one trial."""
    train, test = split_trial(dataset, split)
    phi, report = normalize_columns(train)
    pre = precompute(phi, train.targets, method=eigensolver)
    phi_test = apply_normalization(test.features, report)
    logger.info(
        f"Trial {split.trial}/{split.folds} (seed={split.seed}): "
        f"train m={pre.m}, M={pre.M}, test m={test.m}"
    )

    def _one(nu: float) -> BenchmarkRow:
        started = time.perf_counter()
        result = fit_qem(pre, phi, nu, config)
        elapsed = (time.perf_counter() - started) * 1000.0
        residual = test.targets - predict(result.mu, phi_test)
        row = BenchmarkRow(
            trial=split.trial,
            nu=nu,
            alpha=result.hyperparams.alpha,
            beta=result.hyperparams.beta,
            cnt=result.iterations,
            converged=result.converged,
            wall_time_ms=elapsed,
            test_mse=float(np.mean(residual ** 2)),
        )
        logger.info(
            f"  nu={nu_label(nu):>6} cnt={row.cnt:>6} converged={row.converged} "
            f"time={elapsed:.1f}ms"
        )
        return row

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(_one, nus))


def run_benchmark(
    dataset: Dataset,
    folds: int = 5,
    seed: int = 42,
    trial: Optional[int] = None,
    nus: Sequence[float] = DEFAULT_NUS,
    config: FitConfig = FitConfig(),
    workers: int = 4,
    eigensolver: str = "lapack",
) -> dict[int, list[BenchmarkRow]]:
    """All trials (or the one given), keyed by trial number."""
    trials = [trial] if trial is not None else list(range(1, folds + 1))
    results = {}
    for t in trials:
        split = SplitSpec(folds=folds, seed=seed, trial=t)
        results[t] = run_trial(dataset, split, nus, config, workers, eigensolver)
    return results


# ─── Table output ───────────────────────────────────────────────────


def speedup(rows: Sequence[BenchmarkRow]) -> Optional[float]:
    """Relative iteration saving of the smallest finite nu against nu = inf."""
    finite = [r for r in rows if not math.isinf(r.nu)]
    gaussian = [r for r in rows if math.isinf(r.nu)]
    if not finite or not gaussian:
        return None
    fastest = min(finite, key=lambda r: r.nu)
    reference = gaussian[0]
    if not (fastest.converged and reference.converged):
        return None
    return (reference.cnt - fastest.cnt) / reference.cnt


def format_table(trial: int, rows: Sequence[BenchmarkRow]) -> str:
    lines = [
        f"Trial {trial}",
        f"{'nu':>8}  {'alpha':>16}  {'beta':>16}  {'cnt':>6}  {'test_mse':>16}",
        "-" * 70,
    ]
    for r in rows:
        cnt = str(r.cnt) if r.converged else "DNC"
        lines.append(
            f"{nu_label(r.nu):>8}  {r.alpha:>16.9E}  {r.beta:>16.9E}  {cnt:>6}  {r.test_mse:>16.9E}"
        )

    gain = speedup(rows)
    finite = [r.nu for r in rows if not math.isinf(r.nu)]
    if gain is None:
        lines.append("speedup: n/a")
    else:
        lines.append(f"speedup nu={nu_label(min(finite))} vs nu=inf: {gain * 100.0:.1f}%")
    return "\n".join(lines)
