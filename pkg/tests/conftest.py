# NUMBA_NUM_THREADS must be set before numba's first import so the thread
# determinism tests can move between 1 and 4 workers on any machine.
import os

os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import numpy as np
import pytest

from feedrank import baseline_config
from feedrank.driver import run_ensemble


@pytest.fixture(scope="session")
def tiny_cfg():
    """Small but structurally complete config for fast unit tests."""
    return baseline_config(N=4000, T=6, window=800, master_seed=11)


@pytest.fixture(scope="session")
def tiny_result(tiny_cfg):
    return run_ensemble(tiny_cfg, psi_list=(0.0, 0.5, 1.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
