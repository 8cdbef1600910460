import math

import numpy as np
import pytest

from fairpol.dataio import Dataset, GeneratorSpec, generate_nyc
from fairpol.lagrangian import LagrangianState
from fairpol.nnet import TrainConfig
from fairpol.pipeline import EQB, MODBRK, ExperimentConfig


def tiny_train(epochs=40, lr=0.01, hidden=8, depth=1, seed=0, **kwargs):
    return TrainConfig(epochs=epochs, lr=lr, hidden=hidden, depth=depth, seed=seed, **kwargs)


def tiny_experiment(constraint=MODBRK, epsilons=(0.0, math.inf), seeds=(0,), **overrides):
    """Small nets and few steps; enough to exercise every code path quickly."""
    settings = dict(
        constraint=constraint,
        epsilons=epsilons,
        seeds=seeds,
        outcome=tiny_train(epochs=60, hidden=16, anchor_weight=1.0 if constraint == MODBRK else 0.0),
        baseline=tiny_train(epochs=60, hidden=16),
        policy=tiny_train(epochs=30, hidden=8),
        lagrangian=LagrangianState(update_period=10),
        grid_points=21,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def make_dataset(s, X, a, y):
    return Dataset(s=np.asarray(s), X=np.asarray(X, dtype=float), a=np.asarray(a, dtype=float),
                   y=np.asarray(y, dtype=float))


@pytest.fixture(scope="session")
def nyc_small():
    """(dataset, truth) with 2000 rows."""
    return generate_nyc(GeneratorSpec(seed=3, n=2000))


@pytest.fixture(scope="session")
def nyc_noise_free():
    return generate_nyc(GeneratorSpec(seed=5, n=2000, outcome_noise_sd=0.0))


@pytest.fixture
def modbrk_experiment():
    return tiny_experiment(MODBRK)


@pytest.fixture
def eqb_experiment():
    return tiny_experiment(EQB)


@pytest.fixture(autouse=True)
def _isolated_cwd(tmp_path, monkeypatch):
    # log files default to the working directory
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("FAIRPOL_SEED", raising=False)
