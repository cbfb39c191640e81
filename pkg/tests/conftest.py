"""Session fixtures: JIT warmup and the shared clustering-run bank.

The bank (10 seeded runs of the full pipeline per simulated dataset at
n=500, noise 0.5, default solver settings) is expensive, so it is computed
once per session and shared between the selection property tests and the
acceptance gates.
"""

from __future__ import annotations

import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import latentscale as ls

BANK_SEEDS = tuple(range(1, 11))
BANK_N = 500
BANK_SIGMA_TRUE = 0.5


@pytest.fixture(scope="session", autouse=True)
def warm_numba():
    ls.fit_npmle(ls.Dataset(np.random.default_rng(0).normal(size=(16, 2))), 0.5)
    ls.fit_npmle(ls.Dataset(np.random.default_rng(0).normal(size=(16,))), 0.5)


@lru_cache(maxsize=None)
def pipeline_bank(name: str, sigma_true: float = BANK_SIGMA_TRUE):
    """Per-seed pipeline runs for one generator; wall time recorded."""
    runs = []
    for seed in BANK_SEEDS:
        dataset = ls.generate(ls.GeneratorSpec(name, BANK_N, sigma_true, seed=seed))
        start = time.perf_counter()
        result = ls.run_pipeline(dataset, cfg=ls.SolverConfig(seed=seed))
        elapsed = time.perf_counter() - start
        runs.append({"seed": seed, "dataset": dataset, "result": result, "seconds": elapsed})
    return runs


def recut_labels(result: ls.PipelineResult, k: int, dataset: ls.Dataset) -> np.ndarray:
    """Labels the pipeline would return for a cluster-count override.

    The fits do not depend on the override, so cutting the stored dendrogram
    reproduces a rerun exactly (asserted in the selection tests).
    """
    measure = result.oversmoothed_fit.measure
    if not 1 <= k <= measure.m:
        raise ValueError(f"k={k} out of range [1, {measure.m}]")
    atom_labels = ls.cut_dendrogram(result.dendrogram, k)
    model = ls.decompose(measure, atom_labels, result.oversmoothed_fit.sigma)
    return ls.classify_dataset(model, dataset)


@pytest.fixture(scope="session")
def foursquares_bank():
    return pipeline_bank("four-squares")
