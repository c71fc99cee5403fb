"""Utilities, probabilities, log-likelihood and derivatives.

The Hessian is assembled block by block. With chunks of coefficients
indexed by alternative (see :mod:`blocklogit.design`), and ``W_nm`` the
diagonal matrix with entries ``P_in (delta_nm - P_im)``::

    H_nm     = -M_n' W_nm M_m                      beta/gamma x beta/gamma
    H_n,a    = -sum_k M_n' W_nk Z_k                 beta/gamma x alpha
    H_a,a    = -sum_k,t Z_k' W_kt Z_t               alpha x alpha

where ``M`` is ``X`` for beta chunks and ``Y_m`` for gamma chunks. Only the
upper triangle of chunk pairs is computed; the rest is mirrored.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from threadpoolctl import ThreadpoolController

from .dataset import ChoiceIndex
from .design import DesignMatrices

__all__ = [
    "ProbabilityTable",
    "HessianBlocks",
    "utilities",
    "probabilities",
    "loglik",
    "gradient",
    "hessian_blocked",
    "hessian_dense_oracle",
    "irls_design_matrix",
    "irls_weight_matrix",
    "DENSE_ORACLE_CAP",
]

DENSE_ORACLE_CAP = 20000

_controller = None


def _blas_controller():
    global _controller
    if _controller is None:
        _controller = ThreadpoolController()
    return _controller


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """Choice probabilities ``P`` (N, K), base in column 0, and utilities ``V`` (N, K-1)."""

    P: np.ndarray
    V: np.ndarray


@dataclass(frozen=True, eq=False)
class HessianBlocks:
    """Assembled Hessian plus the chunk boundaries it was built from."""

    matrix: np.ndarray
    chunks: tuple

    def block(self, n: int, m: int) -> np.ndarray:
        a, b = self.chunks[n], self.chunks[m]
        return self.matrix[a.slice, b.slice]


def _split(theta, d: DesignMatrices):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (d.n_params,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({d.n_params},)")
    lay = d.layout
    K = d.K
    beta = [theta[lay.chunk("beta", k).slice] for k in range(1, K)]
    gamma = [theta[lay.chunk("gamma", k).slice] for k in range(K)]
    alpha = theta[lay.chunk("alpha").slice]
    return beta, gamma, alpha


def utilities(theta, d: DesignMatrices) -> np.ndarray:
    """Base-normalized utilities ``V`` with shape (N, K-1)."""
    beta, gamma, alpha = _split(theta, d)
    K = d.K
    V = np.empty((d.N, K - 1))
    base_y = d.Y[0] @ gamma[0]
    for k in range(1, K):
        V[:, k - 1] = d.X @ beta[k - 1] + d.Y[k] @ gamma[k] - base_y + d.Z[k - 1] @ alpha
    return V


def _shift(V):
    return np.maximum(0.0, V.max(axis=1, initial=0.0))


def probabilities(V) -> ProbabilityTable:
    """Choice probabilities from base-normalized utilities.

    Utilities are shifted by ``max(0, max_k V_ik)`` per row before
    exponentiating, so large utilities never overflow.
    """
    V = np.asarray(V, dtype=np.float64)
    if not np.all(np.isfinite(V)):
        raise ValueError("utilities contain non-finite values")
    m = _shift(V)
    e0 = np.exp(-m)
    e = np.exp(V - m[:, None])
    denom = e0 + e.sum(axis=1)
    P = np.empty((V.shape[0], V.shape[1] + 1))
    P[:, 0] = e0 / denom
    P[:, 1:] = e / denom[:, None]
    return ProbabilityTable(P, V)


def _weights(d):
    return np.ones(d.N) if d.weights is None else d.weights


def loglik(theta, d: DesignMatrices, index: ChoiceIndex) -> float:
    """Log-likelihood ``sum_i w_i [-log(1 + sum_k exp V_ik) + V_i,y_i]``."""
    V = utilities(theta, d)
    m = _shift(V)
    lse = m + np.log(np.exp(-m) + np.exp(V - m[:, None]).sum(axis=1))
    chosen_v = (V * index.y).sum(axis=1)
    return float(_weights(d) @ (chosen_v - lse))


def gradient(theta, d: DesignMatrices, index: ChoiceIndex, probs: ProbabilityTable = None) -> np.ndarray:
    """Gradient of :func:`loglik`, chunked as ``M_m' (y_m - P_m)`` and ``sum_k Z_k' (y_k - P_k)``."""
    if probs is None:
        probs = probabilities(utilities(theta, d))
    resid = (index.indicators() - probs.P) * _weights(d)[:, None]
    g = np.empty(d.n_params)
    for c in d.layout.chunks:
        if c.kind == "beta":
            g[c.slice] = d.X.T @ resid[:, c.alt]
        elif c.kind == "gamma":
            g[c.slice] = d.Y[c.alt].T @ resid[:, c.alt]
        else:
            acc = np.zeros(c.size)
            for k in range(1, d.K):
                acc += d.Z[k - 1].T @ resid[:, k]
            g[c.slice] = acc
    return g


def _block_task(H, M_n, M_m, w, rows, cols, diagonal):
    # diagonal-times-dense by broadcasting, then one dense product
    B = M_n.T @ (M_m * w[:, None])
    B = -B
    if diagonal:
        B = 0.5 * (B + B.T)
    H[rows, cols] = B
    if not diagonal:
        H[cols, rows] = B.T


def hessian_blocked(theta, d: DesignMatrices, index: ChoiceIndex = None, workers: int = 1,
                    probs: ProbabilityTable = None) -> HessianBlocks:
    """Hessian of the log-likelihood assembled from independent blocks.

    Blocks between beta/gamma chunks are distributed over ``workers``
    threads, one task per upper-triangular chunk pair, each writing a
    disjoint region of the output. Blocks involving the generic
    coefficients are computed on the calling thread. BLAS is pinned to one
    thread inside this call so results do not depend on ``workers``.

    ``index`` is accepted for signature symmetry with :func:`gradient`;
    the Hessian does not depend on the observed choices.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if probs is None:
        probs = probabilities(utilities(theta, d))
    P = probs.P
    wt = _weights(d)
    n_p = d.n_params
    H = np.zeros((n_p, n_p))
    chunks = d.layout.chunks
    alt_chunks = [c for c in chunks if c.kind != "alpha" and c.size > 0]

    def data(c):
        return d.X if c.kind == "beta" else d.Y[c.alt]

    tasks = []
    for a, ca in enumerate(alt_chunks):
        for cb in alt_chunks[a:]:
            n, m = ca.alt, cb.alt
            tasks.append((ca, cb, n, m))

    def run(task):
        ca, cb, n, m = task
        w = P[:, n] * ((1.0 if n == m else 0.0) - P[:, m]) * wt
        _block_task(H, data(ca), data(cb), w, ca.slice, cb.slice, ca is cb)

    with _blas_controller().limit(limits=1, user_api="blas"):
        if workers == 1:
            for t in tasks:
                run(t)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for _ in pool.map(run, tasks):
                    pass

        ca = d.layout.chunk("alpha")
        if ca.size > 0:
            _alpha_blocks(H, d, P, wt, alt_chunks, data, ca)
    return HessianBlocks(H, chunks)


def _alpha_blocks(H, d, P, wt, alt_chunks, data, ca):
    """Generic-coefficient blocks, serial.

    With ``A = sum_k D(P_k) Z_k`` and ``W_kt = delta_kt D(P_k) - D(P_k) D(P_t)``:

        sum_k W_nk Z_k = D(P_n) (Z_n - A)        (Z_0 = 0)
        sum_k,t Z_k' W_kt Z_t = sum_k Z_k' D(P_k) Z_k - A' A

    so both sums cost O(K) block products instead of O(K^2).
    """
    K = d.K
    A = np.zeros((d.N, ca.size))
    for k in range(1, K):
        A += d.Z[k - 1] * P[:, k:k + 1]
    for c in alt_chunks:
        n = c.alt
        S = -A if n == 0 else d.Z[n - 1] - A
        B = -(data(c).T @ (S * (P[:, n] * wt)[:, None]))
        H[c.slice, ca.slice] = B
        H[ca.slice, c.slice] = B.T
    acc = np.zeros((ca.size, ca.size))
    for k in range(1, K):
        Zk = d.Z[k - 1]
        acc += Zk.T @ (Zk * (P[:, k] * wt)[:, None])
    acc -= A.T @ (A * wt[:, None])
    acc = -acc
    H[ca.slice, ca.slice] = 0.5 * (acc + acc.T)


# -- dense oracle -------------------------------------------------------------


def irls_design_matrix(d: DesignMatrices) -> sp.csr_matrix:
    """The stacked design matrix with ``(2K-1) N`` rows and ``n_p`` columns.

    Row blocks are: K-1 blocks carrying ``X`` in the beta_k columns and
    ``Z_k / 2`` in the alpha columns; one block carrying ``Y_0``; K-1 blocks
    carrying ``Y_k`` in the gamma_k columns and ``Z_k / 2`` again.
    """
    K, N = d.K, d.N
    lay = d.layout
    grid = [[None] * len(lay.chunks) for _ in range(2 * K - 1)]
    col_of = {(c.kind, c.alt): j for j, c in enumerate(lay.chunks)}
    ja = col_of[("alpha", None)]
    for k in range(1, K):
        grid[k - 1][col_of[("beta", k)]] = sp.csr_matrix(d.X)
        grid[k - 1][ja] = sp.csr_matrix(d.Z[k - 1] / 2)
    grid[K - 1][col_of[("gamma", 0)]] = sp.csr_matrix(d.Y[0])
    for k in range(1, K):
        grid[K - 1 + k][col_of[("gamma", k)]] = sp.csr_matrix(d.Y[k])
        grid[K - 1 + k][ja] = sp.csr_matrix(d.Z[k - 1] / 2)
    # bmat needs every block row and column to have a known shape
    for r in range(2 * K - 1):
        for j, c in enumerate(lay.chunks):
            if grid[r][j] is None and (r == 0 or j == 0):
                grid[r][j] = sp.csr_matrix((N, c.size))
    return sp.bmat(grid, format="csr")


def irls_weight_matrix(P: np.ndarray, weights=None) -> sp.csr_matrix:
    """The weight matrix ``[[Q, Q0, Q], [Q0', W00, Q0'], [Q, Q0, Q]]``.

    ``Q`` collects ``W_kt`` for k, t >= 1 and ``Q0`` the ``W_k0`` column.
    """
    N, K = P.shape
    wt = np.ones(N) if weights is None else weights

    def W(k, t):
        return sp.diags(P[:, k] * ((1.0 if k == t else 0.0) - P[:, t]) * wt)

    Q = [[W(k, t) for t in range(1, K)] for k in range(1, K)]
    Q0 = [W(k, 0) for k in range(1, K)]
    rows = []
    for k in range(K - 1):
        rows.append(Q[k] + [Q0[k]] + Q[k])
    rows.append(Q0 + [W(0, 0)] + Q0)
    for k in range(K - 1):
        rows.append(Q[k] + [Q0[k]] + Q[k])
    return sp.bmat(rows, format="csr")


def hessian_dense_oracle(theta, d: DesignMatrices, index: ChoiceIndex = None,
                         cap: int = DENSE_ORACLE_CAP, row_batch: int = 20000) -> np.ndarray:
    """Hessian as ``-X~' W~ X~`` from the materialized stacked matrices.

    Reference implementation for tests and benchmarks; refuses instances
    with ``N (K-1) > cap``. The product is accumulated over row batches of
    ``W~`` to bound memory.
    """
    if d.N * (d.K - 1) > cap:
        raise ValueError(f"instance has N(K-1) = {d.N * (d.K - 1)} rows, above the oracle cap {cap}")
    P = probabilities(utilities(theta, d)).P
    Xt = irls_design_matrix(d)
    Wt = irls_weight_matrix(P, d.weights)
    n_p = d.n_params
    H = np.zeros((n_p, n_p))
    for lo in range(0, Wt.shape[0], row_batch):
        hi = min(lo + row_batch, Wt.shape[0])
        WX = Wt[lo:hi] @ Xt
        H -= (Xt[lo:hi].T @ WX).toarray() if sp.issparse(WX) else Xt[lo:hi].T @ WX
    return H

