"""Weighted discrete measures and Gaussian convolution mixtures.

A mixture model here is a discrete mixing measure convolved with an
isotropic Gaussian kernel of bandwidth ``sigma``.  All density arithmetic
runs in log space with max-shifted summation so that bandwidth sweeps can
reach small ``sigma`` without intermediate underflow.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.sparse import csr_matrix
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

WEIGHT_SUM_TOL = 1e-12


def _as_matrix(points, name: str = "points") -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
        raise ValueError(f"{name} must be a nonempty n x d array")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} must be finite")
    return pts


@dataclass(frozen=True)
class Dataset:
    """Sample matrix with optional integer ground-truth labels."""

    points: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        pts = _as_matrix(self.points)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=int)
            if lab.shape != (pts.shape[0],):
                raise ValueError("labels must have one entry per sample")
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box used as the compact parameter set for atoms."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box corners must be finite")
        if np.any(lo > hi):
            raise ValueError("lower must not exceed upper coordinatewise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def d(self) -> int:
        return self.lower.shape[0]

    def contains(self, points) -> bool:
        pts = _as_matrix(points)
        return bool(np.all(pts >= self.lower - 1e-12) and np.all(pts <= self.upper + 1e-12))

    def sample_uniform(self, rng: np.random.Generator, count: int) -> np.ndarray:
        # lower + u * span keeps the draw equivariant under affine maps of the box
        u = rng.random((count, self.d))
        return self.lower + u * (self.upper - self.lower)


def chain_groups(points: np.ndarray, radius: float) -> np.ndarray:
    """Labels of connected components of the graph with edges at distance <= radius.

    Components are numbered in order of their smallest member index.
    """
    pts = _as_matrix(points)
    m = pts.shape[0]
    if m == 1:
        return np.zeros(1, dtype=int)
    adj = cdist(pts, pts) <= radius
    _, raw = connected_components(csr_matrix(adj), directed=False)
    return _relabel_by_first_occurrence(raw)


def _relabel_by_first_occurrence(labels: np.ndarray) -> np.ndarray:
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(int)


def _union_find_groups(pts: np.ndarray, radius: float) -> np.ndarray | None:
    """Chained grouping at ``radius`` via union-find; None when all isolated."""
    m = pts.shape[0]
    dist = cdist(pts, pts)
    iu, ju = np.triu_indices(m, k=1)
    close = dist[iu, ju] <= radius
    if not close.any():
        return None
    parent = np.arange(m)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(iu[close], ju[close]):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(m)])
    return _relabel_by_first_occurrence(roots)


def merge_close_atoms(atoms, weights, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Collapse atoms within ``radius`` of each other (chained) to their
    weighted mean; repeats until all pairwise distances exceed ``radius``."""
    pts = _as_matrix(atoms, "atoms")
    w = np.asarray(weights, dtype=float)
    while True:
        labels = _union_find_groups(pts, radius)
        if labels is None:
            return pts, w
        k = labels.max() + 1
        new_pts = np.empty((k, pts.shape[1]))
        new_w = np.empty(k)
        for g in range(k):
            mask = labels == g
            wg = w[mask]
            new_w[g] = wg.sum()
            new_pts[g] = wg @ pts[mask] / new_w[g]
        pts, w = new_pts, new_w


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure with finitely many weighted atoms in R^d.

    Invariants: weights are nonnegative and sum to one (within 1e-12), and
    atoms are pairwise distinct.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = _as_matrix(self.atoms, "atoms")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must have one entry per atom")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be nonnegative and finite")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
        if pts.shape[0] > 1:
            dist = cdist(pts, pts)
            np.fill_diagonal(dist, np.inf)
            if dist.min() <= 0.0:
                raise ValueError("atoms must be pairwise distinct")
        object.__setattr__(self, "atoms", pts)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    @classmethod
    def from_points(cls, atoms, weights=None, merge_radius: float = 0.0) -> "DiscreteMeasure":
        """Build a measure, merging coincident (or ``merge_radius``-close)
        atoms and renormalizing the weights."""
        pts = _as_matrix(atoms, "atoms")
        if weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(weights, dtype=float)
        pts, w = merge_close_atoms(pts, w, max(merge_radius, 0.0))
        return cls(pts, w / w.sum())

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms


@dataclass(frozen=True)
class MixtureModel:
    """Gaussian convolution of a discrete mixing measure."""

    sigma: float
    mixing: DiscreteMeasure

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "sigma", float(self.sigma))


def gaussian_log_kernel(x: np.ndarray, atoms: np.ndarray, sigma: float) -> np.ndarray:
    """(n, m) matrix of log N(x_i; theta_j, sigma^2 I)."""
    sq = cdist(x, atoms, "sqeuclidean")
    d = atoms.shape[1]
    return -0.5 * sq / sigma**2 - 0.5 * d * np.log(2.0 * np.pi * sigma**2)


def mixture_log_density(model: MixtureModel, x) -> float | np.ndarray:
    """Log density of the mixture at ``x`` ((d,) point or (n, d) batch).

    Evaluated as a max-shifted log-sum-exp over atoms, so the result stays
    finite far into the kernel tails.
    """
    x_arr = np.asarray(x, dtype=float)
    single = x_arr.ndim <= 1
    pts = _as_matrix(x_arr, "x")
    if pts.shape[1] != model.mixing.d:
        raise ValueError(
            f"dimension mismatch: x has d={pts.shape[1]}, atoms have d={model.mixing.d}"
        )
    logk = gaussian_log_kernel(pts, model.mixing.atoms, model.sigma)
    with np.errstate(divide="ignore"):
        logw = np.log(model.mixing.weights)
    out = logsumexp(logk + logw, axis=1)
    return float(out[0]) if single else out


def log_likelihood(model: MixtureModel, data: Dataset) -> float:
    """Sum of mixture log densities over the dataset (index order)."""
    return float(np.sum(mixture_log_density(model, data.points)))


def data_bounding_box(data: Dataset, margin_factor: float = 0.1) -> BoundingBox:
    """Coordinatewise data hull inflated by ``margin_factor`` times the range.

    A coordinate with zero range is expanded by ``margin_factor`` itself so
    the box never degenerates to a point.
    """
    if margin_factor < 0:
        raise ValueError("margin_factor must be nonnegative")
    lo = data.points.min(axis=0)
    hi = data.points.max(axis=0)
    span = hi - lo
    pad = np.where(span > 0, margin_factor * span, margin_factor * 1.0)
    return BoundingBox(lo - pad, hi + pad)


# ---------------------------------------------------------------------------
# JSON serialization (schema: {"sigma": s, "atoms": [[...]], "weights": [...]})
# ---------------------------------------------------------------------------

def mixture_to_dict(model: MixtureModel) -> dict:
    return {
        "sigma": model.sigma,
        "atoms": model.mixing.atoms.tolist(),
        "weights": model.mixing.weights.tolist(),
    }


def mixture_from_dict(obj: dict) -> MixtureModel:
    return MixtureModel(float(obj["sigma"]), DiscreteMeasure(obj["atoms"], obj["weights"]))


def save_mixture_json(model: MixtureModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mixture_to_dict(model), fh)


def load_mixture_json(path) -> MixtureModel:
    with open(path, "r", encoding="utf-8") as fh:
        return mixture_from_dict(json.load(fh))
