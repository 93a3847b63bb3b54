"""Shared fixtures: the expensive seeded run batches used by several criteria."""
import os
import time

import pytest

from mnl_bandit.harness import ExperimentConfig, run_many

JOBS = min(2, os.cpu_count() or 1)

COVERAGE_SEEDS = list(range(200))
COVERAGE_CFG = dict(
    d=2, N=3, K=2, T=500, S=1.0, S_true=1.0,
    policy="cb_mnl_e", delta=0.1,
    refine_top=0, n_dirs=8, restarts=1,
    seeds=COVERAGE_SEEDS,
)

REGRET_SEEDS = list(range(20))
REGRET_CFG = dict(
    d=2, N=8, K=2, T=3000, S=1.0, S_true=1.0,
    delta=0.1, lambda_override=40.0,
    refine_top=0, n_dirs=8, restarts=1, track_c_stats=False,
    seeds=REGRET_SEEDS,
)


def _timed(cfg: ExperimentConfig, seeds):
    start = time.perf_counter()
    logs = run_many(cfg, seeds, jobs=JOBS)
    return logs, time.perf_counter() - start


@pytest.fixture(scope="session")
def coverage_runs():
    """200 seeded optimistic runs at T=500 (criteria 4, 6, and spot checks)."""
    return _timed(ExperimentConfig(**COVERAGE_CFG), COVERAGE_SEEDS)


@pytest.fixture(scope="session")
def regret_runs():
    """20 seeded optimistic runs at T=3000 (criteria 7 and 9)."""
    return _timed(ExperimentConfig(**REGRET_CFG, policy="cb_mnl_e"), REGRET_SEEDS)


@pytest.fixture(scope="session")
def random_runs():
    """Matched uniform-policy baseline for criterion 9."""
    return _timed(ExperimentConfig(**REGRET_CFG, policy="random"), REGRET_SEEDS)
