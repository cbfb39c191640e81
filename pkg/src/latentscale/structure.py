"""Geometric analysis of a discrete measure's support.

Connectivity counting at a radius (equivalently, density-based clustering
with every point a core point), deterministic single-linkage dendrograms,
dendrogram cutting and cluster-count suggestion, box-kernel smoothing with
level-set component extraction, and the induced nearest-set partition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .measure import DiscreteMeasure, _as_matrix, chain_groups


class LevelSetEmptyError(ValueError):
    """Raised when a smoothing threshold removes every atom."""


def eps_component_count(measure: DiscreteMeasure, eps: float) -> tuple[int, np.ndarray]:
    """Connected components of the atom graph with edges at distance <= eps.

    With every atom a core point there is no noise; labels enumerate the
    components in order of their smallest member index.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    labels = chain_groups(measure.atoms, eps)
    return int(labels.max()) + 1, labels


@dataclass(frozen=True)
class Dendrogram:
    """Single-linkage merge history over atoms.

    ``merges`` has one row per merge: (left_id, right_id, height, size)
    with ids 0..m-1 for leaves and m..2m-2 for internal nodes, matching the
    usual linkage-matrix layout of plotting tools.
    """

    leaf_count: int
    merges: np.ndarray

    def __post_init__(self):
        mz = np.asarray(self.merges, dtype=float).reshape(-1, 4)
        if mz.shape[0] != self.leaf_count - 1:
            raise ValueError("expected leaf_count - 1 merge records")
        if mz.shape[0] > 1 and np.any(np.diff(mz[:, 2]) < 0):
            raise ValueError("merge heights must be nondecreasing")
        object.__setattr__(self, "merges", mz)

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]

    def to_dict(self) -> dict:
        return {
            "leaves": self.leaf_count,
            "merges": [
                [int(l), int(r), float(h), int(s)] for l, r, h, s in self.merges
            ],
        }


def dendrogram_from_dict(obj: dict) -> Dendrogram:
    leaves = int(obj["leaves"])
    merges = np.asarray(obj["merges"], dtype=float).reshape(-1, 4)
    return Dendrogram(leaves, merges)


def single_linkage(measure: DiscreteMeasure) -> Dendrogram:
    """Single-linkage clustering of the atoms under Euclidean distance.

    Equal-distance candidates are resolved by the lexicographically smallest
    (left_id, right_id) pair, so the merge history is fully deterministic.
    """
    pts = measure.atoms
    m = pts.shape[0]
    if m == 1:
        return Dendrogram(1, np.empty((0, 4)))
    dist = cdist(pts, pts)
    np.fill_diagonal(dist, np.inf)
    ids = np.arange(m)
    sizes = np.ones(m, dtype=int)
    merges = np.empty((m - 1, 4))
    for step in range(m - 1):
        # retired slots hold inf, so the global min is the active min
        dmin = dist.min()
        slots = np.argwhere(dist == dmin)
        pairs = np.sort(ids[slots], axis=1)
        best = np.lexsort((pairs[:, 1], pairs[:, 0]))[0]
        i, j = slots[best]
        left, right = pairs[best]
        size = sizes[i] + sizes[j]
        merges[step] = (left, right, dmin, size)
        # single-linkage update: cluster distance is the min over members
        np.minimum(dist[i], dist[j], out=dist[i])
        dist[:, i] = dist[i]
        dist[i, i] = np.inf
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        ids[i] = m + step
        sizes[i] = size
    return Dendrogram(m, merges)


def _labels_from_roots(roots: np.ndarray) -> np.ndarray:
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(int)


def cut_dendrogram(dg: Dendrogram, k: int) -> np.ndarray:
    """Labels for the partition left after undoing the last k-1 merges.

    Classes are numbered by their smallest member index.
    """
    m = dg.leaf_count
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}]")
    parent = np.arange(2 * m - 1)
    for step in range(m - k):
        left, right = int(dg.merges[step, 0]), int(dg.merges[step, 1])
        parent[left] = parent[right] = m + step
    roots = np.empty(m, dtype=int)
    for leaf in range(m):
        node = leaf
        while parent[node] != node:
            node = parent[node]
        roots[leaf] = node
    return _labels_from_roots(roots)


def cut_count_at_height(dg: Dendrogram, h: float) -> int:
    """Number of clusters after applying every merge of height <= h."""
    return dg.leaf_count - int(np.sum(dg.heights <= h))


def suggest_k(dg: Dendrogram, k_max: int) -> tuple[int, list[tuple[int, float]]]:
    """Suggest a cluster count from the largest gap between merge heights.

    Looks at the last min(m-1, 15) merges, computes absolute gaps between
    consecutive heights, and returns the cluster count just below the
    largest gap, clamped to [1, k_max].  The per-candidate gap report is
    returned so the choice can be overridden after inspection.
    """
    m = dg.leaf_count
    if m < 2:
        raise ValueError("need at least two leaves")
    if k_max < 1:
        raise ValueError("k_max must be positive")
    n_merges = m - 1
    heights = dg.heights
    window_start = max(0, n_merges - 15)
    report = []
    best_k, best_gap = 1, 0.0
    for i in range(window_start, n_merges - 1):
        gap = float(heights[i + 1] - heights[i])
        k_cand = n_merges - i  # clusters left between merge i and merge i+1
        report.append((k_cand, gap))
        if gap >= best_gap and gap > 0:
            best_k, best_gap = k_cand, gap
    return min(max(best_k, 1), k_max), report


def box_smooth_density(measure: DiscreteMeasure, delta: float, x) -> float | np.ndarray:
    """Density of the measure convolved with the uniform box kernel on
    [-delta, delta]^d, at ``x`` ((d,) point or (k, d) batch)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    pts = _as_matrix(arr, "x")
    inside = cdist(pts, measure.atoms, "chebyshev") <= delta
    out = (inside @ measure.weights) / (2.0 * delta) ** measure.d
    return float(out[0]) if single else out


@dataclass(frozen=True)
class ComponentSets:
    """Disjoint groups of atom indices with the member atom coordinates."""

    indices: tuple[np.ndarray, ...]
    points: tuple[np.ndarray, ...]

    @property
    def k(self) -> int:
        return len(self.indices)

    def to_list(self) -> list[list[int]]:
        return [idx.tolist() for idx in self.indices]


def extract_components(
    measure: DiscreteMeasure, delta: float, threshold: float
) -> ComponentSets:
    """Level-set preprocessing of the support.

    Atoms where the box-smoothed density exceeds ``threshold`` are kept and
    grouped by connectivity at radius 2*sqrt(d)*delta (the enlargement that
    matches the box kernel's reach); dropped atoms belong to no group.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    dens = box_smooth_density(measure, delta, measure.atoms)
    kept = np.flatnonzero(dens > threshold)
    if kept.size == 0:
        raise LevelSetEmptyError(
            f"threshold {threshold} removes every atom (max smoothed density {dens.max():.6g})"
        )
    eps = 2.0 * np.sqrt(measure.d) * delta
    labels = chain_groups(measure.atoms[kept], eps)
    groups = [kept[labels == g] for g in range(labels.max() + 1)]
    return ComponentSets(
        indices=tuple(groups),
        points=tuple(measure.atoms[g] for g in groups),
    )


def voronoi_label(x, sets: ComponentSets, measure: DiscreteMeasure) -> int:
    """Index of the group nearest to ``x`` (min distance over member atoms);
    ties go to the smallest index."""
    if sets.k == 0:
        raise ValueError("sets must be nonempty")
    pt = _as_matrix(np.asarray(x, dtype=float), "x")
    dists = [cdist(pt, grp_pts).min() for grp_pts in sets.points]
    return int(np.argmin(dists))
