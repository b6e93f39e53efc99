"""Pure numpy versions of the hot kernels.

Signatures and semantics match the compiled ``_ckernels`` module exactly;
tests check the two against each other.
"""
from __future__ import annotations

import numpy as np

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def colmax_abs(values):
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    bad = ~finite.all(axis=0)
    f = np.where(finite, np.abs(values), 0.0).max(axis=0)
    f[bad] = np.inf
    return f, bad


def sample_labels(logp, u):
    """Draw one label per row of ``logp`` (unnormalised log weights) given uniforms ``u``."""
    logp = np.asarray(logp, dtype=float)
    p = np.exp(logp - logp.max(axis=1, keepdims=True))
    cum = np.cumsum(p, axis=1)
    target = np.asarray(u, dtype=float) * cum[:, -1]
    z = (cum <= target[:, None]).sum(axis=1)
    return np.minimum(z, logp.shape[1] - 1).astype(np.intp)


def cluster_stats(X, y, w, z, K):
    """Per-cluster weighted X'WX, X'Wy and total weight."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    R = X.shape[1]
    xtwx = np.zeros((K, R, R))
    xtwy = np.zeros((K, R))
    sw = np.zeros(K)
    for k in range(K):
        idx = np.flatnonzero(z == k)
        if idx.size == 0:
            continue
        Xk = X[idx]
        wk = w[idx]
        xtwx[k] = (Xk * wk[:, None]).T @ Xk
        xtwy[k] = Xk.T @ (wk * y[idx])
        sw[k] = wk.sum()
    return xtwx, xtwy, sw


def cluster_wrss(X, y, w, z, beta):
    """Per-cluster weighted residual sum of squares under coefficients ``beta`` (K x R)."""
    beta = np.asarray(beta, dtype=float)
    resid = np.asarray(y, dtype=float) - np.einsum("ij,ij->i", X, beta[z])
    return np.bincount(z, weights=np.asarray(w, dtype=float) * resid**2, minlength=beta.shape[0])


def mixture_logdens(y, means, log_pi, sigma):
    """log sum_k pi_k Normal(y_i | means[i, k], sigma_k) for every record."""
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    zsc = (y[:, None] - means) / sigma[None, :]
    a = np.asarray(log_pi)[None, :] - np.log(sigma)[None, :] - _HALF_LOG_2PI - 0.5 * zsc**2
    amax = a.max(axis=1)
    safe = np.where(np.isfinite(amax), amax, 0.0)
    return safe + np.log(np.exp(a - safe[:, None]).sum(axis=1))
