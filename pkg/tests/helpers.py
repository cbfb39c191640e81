"""Shared test utilities: independent oracles and random-instance factories."""

from __future__ import annotations

import numpy as np

from latentscale import DiscreteMeasure


def random_measure(rng: np.random.Generator, d: int = 1, m_max: int = 6, span: float = 3.0) -> DiscreteMeasure:
    m = int(rng.integers(1, m_max + 1))
    atoms = rng.uniform(-span, span, size=(m, d))
    # resample until pairwise distinct (ties have probability zero anyway)
    while m > 1 and np.min(
        np.linalg.norm(atoms[:, None, :] - atoms[None, :, :], axis=-1)[~np.eye(m, dtype=bool)]
    ) <= 1e-9:
        atoms = rng.uniform(-span, span, size=(m, d))
    w = rng.uniform(0.05, 1.0, size=m)
    return DiscreteMeasure(atoms, w / w.sum())


def brute_force_ari(labels_a, labels_b) -> float:
    """Pair-agreement ARI computed by explicit O(n^2) enumeration."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    n = len(a)
    ss = sd = ds = dd = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_a = a[i] == a[j]
            same_b = b[i] == b[j]
            if same_a and same_b:
                ss += 1
            elif same_a:
                sd += 1
            elif same_b:
                ds += 1
            else:
                dd += 1
    index = ss
    total = ss + sd + ds + dd
    expected = (ss + sd) * (ss + ds) / total if total else 0.0
    max_index = 0.5 * ((ss + sd) + (ss + ds))
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)


def all_partitions(n: int):
    """All set partitions of {0..n-1} as label arrays (restricted growth strings)."""
    labels = np.zeros(n, dtype=int)

    def rec(i: int, k: int):
        if i == n:
            yield labels.copy()
            return
        for v in range(k + 1):
            labels[i] = v
            yield from rec(i + 1, max(k, v + 1))

    yield from rec(1, 1) if n > 1 else iter([np.zeros(1, dtype=int)])


def random_labeling(rng: np.random.Generator, n: int, k_max: int = 4) -> np.ndarray:
    return rng.integers(0, k_max, size=n)
