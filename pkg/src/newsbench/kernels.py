"""O(n^2) numeric kernels for the t-SNE diagnostics, with two backends.

The numba backend JIT-compiles the per-point loops; the pure-numpy backend is
the fallback and the reference for agreement tests. Selection happens per call:
numba is used when it imported cleanly and NEWSBENCH_NO_NUMBA is not set to 1,
so tests and benchmarks can flip backends via the environment without
reloading. The two backends agree to float tolerance, not bitwise (summation
order differs); per-backend runs are deterministic.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without the extra
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


_LOG_EPS = 1e-12


def use_numba() -> bool:
    return HAVE_NUMBA and os.environ.get("NEWSBENCH_NO_NUMBA", "0") != "1"


def backend_name() -> str:
    return "numba" if use_numba() else "numpy"


# ---------------------------------------------------------------------------
# pairwise squared distances

def _pairwise_sq_dists_np(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


@njit(cache=True)
def _pairwise_sq_dists_nb(x):  # pragma: no cover - compiled
    n, d = x.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                diff = x[i, k] - x[j, k]
                s += diff * diff
            out[i, j] = s
            out[j, i] = s
    return out


def pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    """n x n matrix of squared Euclidean distances, zero diagonal."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if use_numba():
        return _pairwise_sq_dists_nb(x)
    return _pairwise_sq_dists_np(x)


# ---------------------------------------------------------------------------
# conditional Gaussian affinities with per-row bandwidth search

def _row_probs_np(drow: np.ndarray, i: int, beta: float):
    p = np.exp(-drow * beta)
    p[i] = 0.0
    total = p.sum()
    if total <= 0.0:
        return p, 1.0  # everything collapsed; perplexity -> 1
    p /= total
    # entropy in nats over nonzero entries; perplexity = exp(H)
    nz = p > 0
    h = -np.sum(p[nz] * np.log(p[nz]))
    return p, float(np.exp(h))


def _conditional_probs_np(d: np.ndarray, perplexity: float, tol: float, max_iter: int):
    n = d.shape[0]
    probs = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        beta = 1.0
        lo, hi = 0.0, np.inf
        p, perp = _row_probs_np(d[i], i, beta)
        for _ in range(max_iter):
            if abs(perp - perplexity) <= tol:
                break
            if perp > perplexity:  # too flat: sharpen
                lo = beta
                beta = beta * 2.0 if not np.isfinite(hi) else 0.5 * (lo + hi)
            else:
                hi = beta
                beta = 0.5 * (lo + hi)
            p, perp = _row_probs_np(d[i], i, beta)
        probs[i] = p
        betas[i] = beta
    return probs, betas


@njit(cache=True)
def _conditional_probs_nb(d, perplexity, tol, max_iter):  # pragma: no cover - compiled
    n = d.shape[0]
    probs = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        beta = 1.0
        lo = 0.0
        hi = np.inf
        for _ in range(max_iter + 1):
            total = 0.0
            for j in range(n):
                if j != i:
                    probs[i, j] = np.exp(-d[i, j] * beta)
                    total += probs[i, j]
                else:
                    probs[i, j] = 0.0
            if total <= 0.0:
                perp = 1.0
            else:
                h = 0.0
                for j in range(n):
                    probs[i, j] /= total
                    if probs[i, j] > 0.0:
                        h -= probs[i, j] * np.log(probs[i, j])
                perp = np.exp(h)
            if abs(perp - perplexity) <= tol:
                break
            if perp > perplexity:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (lo + hi)
            else:
                hi = beta
                beta = 0.5 * (lo + hi)
        betas[i] = beta
    return probs, betas


def conditional_probs(
    d: np.ndarray, perplexity: float, tol: float = 1e-4, max_iter: int = 200
):
    """Row-stochastic p_{j|i} with sigma_i found by bisection on beta = 1/(2 sigma^2)
    until exp(H_i) matches `perplexity` within `tol`. Returns (probs, betas)."""
    d = np.ascontiguousarray(d, dtype=np.float64)
    if use_numba():
        return _conditional_probs_nb(d, float(perplexity), float(tol), max_iter)
    return _conditional_probs_np(d, float(perplexity), float(tol), max_iter)


# ---------------------------------------------------------------------------
# fused gradient + KL for one descent iteration

def _tsne_step_np(p: np.ndarray, y: np.ndarray):
    d = _pairwise_sq_dists_np(y)
    num = 1.0 / (1.0 + d)
    np.fill_diagonal(num, 0.0)
    z = num.sum()
    q = num / z
    pq = (p - q) * num
    grad = 4.0 * (np.diag(pq.sum(axis=1)) - pq) @ y
    mask = p > 0
    kl = float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], _LOG_EPS))))
    return grad, kl


@njit(cache=True)
def _tsne_step_nb(p, y):  # pragma: no cover - compiled
    n = y.shape[0]
    num = np.zeros((n, n))
    z = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dy0 = y[i, 0] - y[j, 0]
            dy1 = y[i, 1] - y[j, 1]
            v = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1)
            num[i, j] = v
            num[j, i] = v
            z += 2.0 * v
    grad = np.zeros((n, 2))
    kl = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            q = num[i, j] / z
            w = (p[i, j] - q) * num[i, j]
            grad[i, 0] += 4.0 * w * (y[i, 0] - y[j, 0])
            grad[i, 1] += 4.0 * w * (y[i, 1] - y[j, 1])
            if p[i, j] > 0.0:
                qc = q if q > _LOG_EPS else _LOG_EPS
                kl += p[i, j] * np.log(p[i, j] / qc)
    return grad, kl


def tsne_step(p: np.ndarray, y: np.ndarray):
    """Gradient of KL(P || Q) at the 2-d embedding `y`, plus the KL value.

    Gradient per point i: 4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if use_numba():
        grad, kl = _tsne_step_nb(p, y)
        return grad, float(kl)
    return _tsne_step_np(p, y)
