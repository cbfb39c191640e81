"""Fixed-bandwidth maximum likelihood estimation of a mixing measure.

The main solver is support-point EM interleaved with atom pruning/merging
and certificate-driven atom insertion: whenever EM stalls, the first-order
gradient function

    D_G(theta) = (1/n) sum_i phi_sigma(Y_i - theta) / (phi_sigma * G)(Y_i)

is probed; ``max D - 1 <= dual_tol`` certifies (approximate) global
optimality, otherwise a new atom is inserted at the best probe.  A
fixed-grid multiplicative-update solver is provided as an independent
check for small problems.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .measure import (
    BoundingBox,
    Dataset,
    DiscreteMeasure,
    MixtureModel,
    _as_matrix,
    data_bounding_box,
    gaussian_log_kernel,
    merge_close_atoms,
    mixture_to_dict,
)

DEFAULT_THETA_MARGIN = 0.1
_GRADIENT_CHUNK = 512

try:  # optional fused inner loops; the numpy paths are the reference
    from ._emcore import em_pass as _em_pass_numba
    from ._emcore import gradient_pass as _gradient_pass_numba
    from ._emcore import loglik_pass as _loglik_pass_numba
except ImportError:  # pragma: no cover - numba not installed
    _em_pass_numba = None
    _gradient_pass_numba = None
    _loglik_pass_numba = None


def _total_loglik(y, atoms, weights, sigma):
    d = y.shape[1]
    if _loglik_pass_numba is not None:
        logw_eff = np.log(weights) - 0.5 * d * np.log(2.0 * np.pi * sigma**2)
        return float(_loglik_pass_numba(y, atoms, logw_eff, 0.5 / sigma**2))
    return float(_log_density_points(y, atoms, weights, sigma).sum())


def _seeded_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)


def _em_pass_numpy(y, atoms, logw_eff, inv_two_s2):
    """E-step quantities plus M-step accumulators in one sweep.

    Returns (logp, mass, moment): per-sample mixture log density, summed
    responsibilities per atom, and responsibility-weighted sample sums.
    """
    logwk = cdist(y, atoms, "sqeuclidean")
    logwk *= -inv_two_s2
    logwk += logw_eff
    shift = logwk.max(axis=1)
    np.exp(logwk - shift[:, None], out=logwk)
    rowsum = logwk.sum(axis=1)
    logp = shift + np.log(rowsum)
    logwk /= rowsum[:, None]
    mass = logwk.sum(axis=0)
    moment = logwk.T @ y
    return logp, mass, moment


def _em_pass(y, atoms, logw_eff, inv_two_s2):
    if _em_pass_numba is not None:
        return _em_pass_numba(y, atoms, logw_eff, inv_two_s2)
    return _em_pass_numpy(y, atoms, logw_eff, inv_two_s2)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for :func:`fit_npmle`.

    ``m_init`` and ``probe_grid_size`` default to ``min(n, 200)`` and
    ``512 * d`` when left as None.  ``theta_box`` defaults to the data
    bounding box with margin 0.1.
    """

    m_init: int | None = None
    max_iter: int = 2000
    loglik_tol: float = 1e-8
    dual_tol: float = 1e-2
    prune_weight: float = 1e-8
    merge_radius_factor: float = 1e-3
    probe_grid_size: int | None = None
    seed: int = 0
    theta_box: BoundingBox | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.loglik_tol <= 0 or self.dual_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.prune_weight < 0:
            raise ValueError("prune_weight must be nonnegative")
        if self.merge_radius_factor <= 0:
            raise ValueError("merge_radius_factor must be positive")

    def resolve_m_init(self, n: int) -> int:
        m0 = self.m_init if self.m_init is not None else min(n, 200)
        m0 = min(m0, n)
        if m0 < 1:
            raise ValueError("m_init must be positive")
        if self.prune_weight >= 1.0 / m0:
            raise ValueError("prune_weight must be below 1/m_init")
        return m0


@dataclass(frozen=True)
class FitResult:
    """A fitted mixing measure plus its optimality certificate."""

    measure: DiscreteMeasure
    sigma: float
    loglik: float
    dual_gap: float
    iterations: int
    converged: bool
    loglik_trace: np.ndarray | None = None

    @property
    def model(self) -> MixtureModel:
        return MixtureModel(self.sigma, self.measure)

    def to_dict(self) -> dict:
        out = mixture_to_dict(self.model)
        out.update(
            loglik=self.loglik,
            dual_gap=self.dual_gap,
            iterations=self.iterations,
            converged=self.converged,
        )
        return out


def fit_result_from_dict(obj: dict) -> FitResult:
    return FitResult(
        measure=DiscreteMeasure(obj["atoms"], obj["weights"]),
        sigma=float(obj["sigma"]),
        loglik=float(obj["loglik"]),
        dual_gap=float(obj["dual_gap"]),
        iterations=int(obj["iterations"]),
        converged=bool(obj["converged"]),
    )


def gradient_function(
    measure: DiscreteMeasure, sigma: float, data: Dataset, theta
) -> float | np.ndarray:
    """Gradient (dual) function D at ``theta`` ((d,) point or (k, d) batch)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    th = np.asarray(theta, dtype=float)
    single = th.ndim <= 1
    thetas = _as_matrix(th, "theta")
    if thetas.shape[1] != measure.d:
        raise ValueError("dimension mismatch between theta and atoms")
    logp = _log_density_points(data.points, measure.atoms, measure.weights, sigma)
    out = _gradient_at(sigma, data.points, logp, thetas)
    return float(out[0]) if single else out


def _log_density_points(y, atoms, weights, sigma):
    logk = gaussian_log_kernel(y, atoms, sigma)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return logsumexp(logk + logw, axis=1)


def _gradient_at(sigma, y, logp, thetas):
    # D(theta) = mean_i exp(log phi(Y_i - theta) - log p(Y_i)); log space keeps
    # severe density mismatches from overflowing.
    d = y.shape[1]
    if _gradient_pass_numba is not None:
        return _gradient_pass_numba(
            y, logp, thetas, 0.5 / sigma**2, -0.5 * d * np.log(2.0 * np.pi * sigma**2)
        )
    n = y.shape[0]
    out = np.empty(thetas.shape[0])
    for lo in range(0, thetas.shape[0], _GRADIENT_CHUNK):
        block = thetas[lo : lo + _GRADIENT_CHUNK]
        logr = gaussian_log_kernel(block, y, sigma)
        logr -= logp[None, :]
        shift = logr.max(axis=1)
        np.exp(logr - shift[:, None], out=logr)
        out[lo : lo + block.shape[0]] = np.exp(shift + np.log(logr.sum(axis=1)) - np.log(n))
    return out


def atom_count_bound(data: Dataset, sigma: float) -> float:
    """One-dimensional upper bound on the support size of the maximizer."""
    if data.d != 1:
        raise ValueError("atom_count_bound supports d=1 only")
    if data.n < 2:
        raise ValueError("need at least two samples")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    y = np.sort(data.points[:, 0])
    r = (y[-1] - y[0]) / 2.0
    return 1.90 + (y[-1] + 10.0) * r / (0.85 * sigma**2)


def fit_npmle(data: Dataset, sigma: float, cfg: SolverConfig | None = None) -> FitResult:
    """Maximize the sample log likelihood over mixing measures at bandwidth sigma.

    Parameters
    ----------
    data : Dataset
        Samples; all coordinates must be finite.
    sigma : float
        Kernel bandwidth, > 0.
    cfg : SolverConfig, optional
        Solver configuration; defaults suit a few thousand samples.

    Returns
    -------
    FitResult
        Fitted measure with log likelihood, dual gap over the probe set
        (all data points plus a seeded uniform sample in the parameter box),
        iteration count, and convergence flag.  ``converged`` means the EM
        ascent stalled below ``loglik_tol`` per sample while the dual gap was
        at most ``dual_tol``; the dual gap is reported either way.
    """
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValueError("sigma must be positive")
    cfg = cfg or SolverConfig()
    y = data.points
    n, d = y.shape
    m0 = cfg.resolve_m_init(n)
    box = cfg.theta_box if cfg.theta_box is not None else data_bounding_box(data, DEFAULT_THETA_MARGIN)
    if box.d != d:
        raise ValueError("theta_box dimension does not match the data")

    rng = _seeded_rng(cfg.seed)
    start = rng.permutation(n)[:m0]
    atoms, weights = merge_close_atoms(y[start], np.full(m0, 1.0 / m0), 1e-9 * sigma)
    weights = weights / weights.sum()

    n_probe = cfg.probe_grid_size if cfg.probe_grid_size is not None else 512 * d
    probes = np.vstack([y, box.sample_uniform(rng, n_probe)])

    merge_radius = cfg.merge_radius_factor * sigma
    gain_tol = cfg.loglik_tol * n
    inv_two_s2 = 0.5 / sigma**2
    log_norm = -0.5 * d * np.log(2.0 * np.pi * sigma**2)
    trace = []
    ll_prev = -np.inf
    converged = False
    iterations = 0
    insert_failures = 0

    while iterations < cfg.max_iter:
        iterations += 1
        logp, mass, moment = _em_pass(y, atoms, np.log(weights) + log_norm, inv_two_s2)
        ll = float(logp.sum())
        trace.append(ll)
        gain = ll - ll_prev
        ll_prev = ll

        if gain < gain_tol:
            # EM stalled on the current measure; consult the certificate.
            dvals = _gradient_at(sigma, y, logp, probes)
            gap = float(dvals.max() - 1.0)
            if gap <= cfg.dual_tol:
                atoms, weights = _consolidate(y, atoms, weights, sigma, ll, n)
                converged = True
                break
            inserted, atoms, weights = _insert_atoms(
                y, atoms, weights, sigma, logp, ll, probes, dvals, cfg.dual_tol, n
            )
            if inserted:
                insert_failures = 0
            else:
                insert_failures += 1
                if insert_failures >= 3:
                    break
                ll_prev = -np.inf  # give EM another block of iterations
            continue

        # EM step: weight and location updates.
        alive = mass > 0
        if not alive.all():
            mass, moment = mass[alive], moment[alive]
        weights = mass / n
        atoms = moment / mass[:, None]
        if iterations % 8 == 0:
            atoms, weights = _maintain(y, atoms, weights, sigma, cfg, merge_radius, n)

    atoms, weights = _maintain(y, atoms, weights, sigma, cfg, merge_radius, n)
    weights = weights / weights.sum()
    final_logp = _log_density_points(y, atoms, weights, sigma)
    loglik = float(final_logp.sum())
    dvals = _gradient_at(sigma, y, final_logp, probes)
    dual_gap = float(dvals.max() - 1.0)
    converged = converged and dual_gap <= cfg.dual_tol
    measure = DiscreteMeasure(atoms, weights)
    return FitResult(measure, float(sigma), loglik, dual_gap, iterations, converged, np.asarray(trace))


def _maintain(y, atoms, weights, sigma, cfg, merge_radius, n):
    """Prune dead atoms and merge near-coincident ones.

    A merge is applied only if it costs at most 1e-10 log likelihood per
    sample, which keeps the recorded ascent monotone.
    """
    keep = weights >= cfg.prune_weight
    if not keep.any():
        keep[int(np.argmax(weights))] = True
    if not keep.all():
        atoms, weights = atoms[keep], weights[keep]
        weights = weights / weights.sum()

    if atoms.shape[0] > 1:
        dist = cdist(atoms, atoms)
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= merge_radius:
            merged_atoms, merged_w = merge_close_atoms(atoms, weights, merge_radius)
            ll_before = _total_loglik(y, atoms, weights, sigma)
            ll_after = _total_loglik(y, merged_atoms, merged_w, sigma)
            if ll_after >= ll_before - 1e-10 * n:
                atoms, weights = merged_atoms, merged_w / merged_w.sum()
    return atoms, weights


_INSERT_BATCH = 16


def _insert_atoms(y, atoms, weights, sigma, logp, ll, probes, dvals, dual_tol, n):
    """Add atoms at the best certificate violations, each with a small weight.

    Probes are taken in decreasing order of D, skipping any within 2 sigma of
    an already accepted probe (redundant for one round) or colliding with an
    existing atom; at most ``_INSERT_BATCH`` per round, and the support size
    never exceeds n.  The per-atom weight backtracks from 1e-3 so the log
    likelihood does not decrease.
    """
    room = min(_INSERT_BATCH, n - atoms.shape[0])
    if room <= 0:
        return False, atoms, weights
    order = np.argsort(-dvals)
    selected: list[np.ndarray] = []
    for idx in order:
        if dvals[idx] <= 1.0 + dual_tol or len(selected) >= room:
            break
        theta = probes[idx]
        if cdist(theta[None, :], atoms).min() <= 1e-9 * sigma:
            continue
        if selected and cdist(theta[None, :], np.asarray(selected)).min() < 2.0 * sigma:
            continue
        selected.append(theta)
    if not selected:
        return False, atoms, weights
    new_pts = np.asarray(selected)
    logk_new = gaussian_log_kernel(new_pts, y, sigma)  # (q, n)
    shift = logk_new.max(axis=0)
    log_sum_new = shift + np.log(np.exp(logk_new - shift[None, :]).sum(axis=0))
    eps = 1e-3
    for _ in range(12):
        total = eps * len(selected)
        cand_ll = float(
            np.logaddexp(np.log1p(-total) + logp, np.log(eps) + log_sum_new).sum()
        )
        if cand_ll >= ll:
            new_atoms = np.vstack([atoms, new_pts])
            new_weights = np.concatenate(
                [weights * (1.0 - total), np.full(len(selected), eps)]
            )
            return True, new_atoms, new_weights
        eps *= 0.1
    return False, atoms, weights


def _consolidate(y, atoms, weights, sigma, ll, n):
    """Endgame cleanup: greedily merge the closest atom pair while the merged
    configuration does not lose log likelihood (1e-10 per sample budget)."""
    while atoms.shape[0] > 1:
        dist = cdist(atoms, atoms)
        np.fill_diagonal(dist, np.inf)
        i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
        wi, wj = weights[i], weights[j]
        merged = (wi * atoms[i] + wj * atoms[j]) / (wi + wj)
        cand_atoms = np.vstack([np.delete(atoms, (i, j), axis=0), merged[None, :]])
        cand_weights = np.append(np.delete(weights, (i, j)), wi + wj)
        cand_ll = _total_loglik(y, cand_atoms, cand_weights, sigma)
        if cand_ll < ll - 1e-10 * n:
            break
        atoms, weights, ll = cand_atoms, cand_weights, cand_ll
    return atoms, weights


def fit_npmle_grid(
    data: Dataset,
    sigma: float,
    grid,
    max_iter: int = 50_000,
    tol: float = 1e-10,
    gap_tol: float | None = None,
) -> DiscreteMeasure:
    """Maximize the likelihood over weights on a fixed support grid.

    Runs multiplicative updates ``w_j <- w_j * D(theta_j)`` from uniform
    weights until ``max_j |D(theta_j) - 1| * w_j <= tol`` or ``max_iter``;
    grid points with final weight below 1e-10 are dropped.  The identity
    ``sum_j w_j D(theta_j) = 1`` makes each update simplex-preserving.

    When ``gap_tol`` is given, stopping additionally requires
    ``max_j D(theta_j) - 1 <= gap_tol``, which bounds the likelihood
    shortfall against any measure on the grid by ``n * log(1 + gap_tol)``.
    Grid points whose weight underflows while clearly suboptimal are retired
    from the update (their mass is far below float resolution); use
    :func:`grid_dual_gap` for a certificate over the full grid.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    grid_pts = _as_matrix(grid, "grid")
    if grid_pts.shape[1] != data.d:
        raise ValueError("grid dimension does not match the data")
    y = data.points
    n = y.shape[0]
    logk = gaussian_log_kernel(y, grid_pts, sigma)
    # Row-shifted kernel gives exact D and density ratios with two matvecs
    # per iteration and no exp/log.
    kmat = np.exp(logk - logk.max(axis=1)[:, None])
    live = np.arange(grid_pts.shape[0])
    w = np.full(grid_pts.shape[0], 1.0 / grid_pts.shape[0])
    for it in range(max_iter):
        q = kmat @ w
        dvals = kmat.T @ (1.0 / (n * q))
        done = np.max(np.abs(dvals - 1.0) * w) <= tol
        if done and gap_tol is not None:
            done = np.max(dvals) - 1.0 <= gap_tol
        if done:
            break
        w = w * dvals
        w /= w.sum()
        if (it + 1) % 256 == 0:
            dead = (w < 1e-18) & (dvals < 1.0 - 1e-3)
            if dead.any():
                alive = ~dead
                live, w, kmat = live[alive], w[alive], kmat[:, alive]
                w /= w.sum()
    keep = w >= 1e-10
    if not keep.any():
        keep[int(np.argmax(w))] = True
    return DiscreteMeasure(grid_pts[live[keep]], w[keep] / w[keep].sum())


def grid_dual_gap(data: Dataset, sigma: float, grid, measure: DiscreteMeasure) -> float:
    """max over the grid of D - 1 for ``measure``; certifies the grid solver."""
    dvals = gradient_function(measure, sigma, data, _as_matrix(grid, "grid"))
    return float(np.max(dvals) - 1.0)


def fit_sweep_config(cfg: SolverConfig, index: int) -> SolverConfig:
    """Per-entry solver config for a bandwidth sweep: entry ``i`` draws from
    the stream seeded by ``seed + i`` so a one-entry sweep equals a direct fit."""
    return replace(cfg, seed=cfg.seed + index)
