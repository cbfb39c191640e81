"""Numba-compiled inner loop for the support-point EM solver.

Importing this module raises ImportError when numba is unavailable; the
solver then falls back to its numpy implementation of the same pass.
"""

import numba
import numpy as np

# Shifted exponents below this are dropped: exp(-60) ~ 8.8e-27, so even
# summed over thousands of atoms the effect is far below double rounding.
_EXP_FLOOR = -60.0


@numba.njit(cache=True, fastmath=True)
def loglik_pass(y, atoms, logw_eff, inv_two_s2):
    """Total mixture log likelihood only (guard checks)."""
    n, d = y.shape
    m = atoms.shape[0]
    row = np.empty(m)
    total = 0.0
    for i in range(n):
        mx = -np.inf
        for j in range(m):
            sq = 0.0
            for c in range(d):
                t = y[i, c] - atoms[j, c]
                sq += t * t
            v = logw_eff[j] - sq * inv_two_s2
            row[j] = v
            if v > mx:
                mx = v
        tot = 0.0
        for j in range(m):
            z = row[j] - mx
            if z >= _EXP_FLOOR:
                tot += np.exp(z)
        total += mx + np.log(tot)
    return total


@numba.njit(cache=True, fastmath=True)
def gradient_pass(y, logp, thetas, inv_two_s2, log_norm):
    """D(theta_t) = mean_i exp(log phi(y_i - theta_t) - logp_i)."""
    n, d = y.shape
    k = thetas.shape[0]
    out = np.empty(k)
    row = np.empty(n)
    for t in range(k):
        mx = -np.inf
        for i in range(n):
            sq = 0.0
            for c in range(d):
                diff = y[i, c] - thetas[t, c]
                sq += diff * diff
            v = log_norm - sq * inv_two_s2 - logp[i]
            row[i] = v
            if v > mx:
                mx = v
        tot = 0.0
        for i in range(n):
            z = row[i] - mx
            if z >= _EXP_FLOOR:
                tot += np.exp(z)
        out[t] = np.exp(mx + np.log(tot / n))
    return out


@numba.njit(cache=True, fastmath=True)
def em_pass(y, atoms, logw_eff, inv_two_s2):
    n, d = y.shape
    m = atoms.shape[0]
    logp = np.empty(n)
    mass = np.zeros(m)
    moment = np.zeros((m, d))
    row = np.empty(m)
    for i in range(n):
        mx = -np.inf
        for j in range(m):
            sq = 0.0
            for c in range(d):
                t = y[i, c] - atoms[j, c]
                sq += t * t
            v = logw_eff[j] - sq * inv_two_s2
            row[j] = v
            if v > mx:
                mx = v
        tot = 0.0
        for j in range(m):
            z = row[j] - mx
            if z >= _EXP_FLOOR:
                e = np.exp(z)
                row[j] = e
                tot += e
            else:
                row[j] = 0.0
        logp[i] = mx + np.log(tot)
        inv = 1.0 / tot
        for j in range(m):
            r = row[j]
            if r > 0.0:
                r *= inv
                mass[j] += r
                for c in range(d):
                    moment[j, c] += r * y[i, c]
    return logp, mass, moment
