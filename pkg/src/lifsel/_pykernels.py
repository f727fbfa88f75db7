"""Numpy implementations of the hot kernels (fallback for ``_ckernels``)."""
import numpy as np


def crit_select(est, dev_bound, pen, slack):
    """Crit-hat for every replicate and model, plus the selected position.

    ``est`` is (R, M); ``dev_bound[j, m]`` holds H(j, m) for j >= m.
    Returns ``(m_hat, crit)``: the smallest position whose criterion lies
    within ``slack`` of the row minimum, and the (R, M) criterion table.
    """
    est = np.asarray(est, dtype=float)
    R, M = est.shape
    crit = np.empty((R, M))
    for m in range(M):
        dev = np.abs(est[:, m:m + 1] - est[:, m:]) - dev_bound[m:, m][None, :]
        crit[:, m] = dev.max(axis=1) + pen[m]
    best = crit.min(axis=1, keepdims=True)
    m_hat = np.argmax(crit <= best + slack, axis=1).astype(np.intp)
    return m_hat, crit


def _taps(nn, L):
    return (2 * np.arange(nn // 2)[:, None] + np.arange(L)[None, :]) % nn


def dwt_periodized(x, h, coarse_level):
    x = np.asarray(x, dtype=float)
    R, n = x.shape
    h = np.asarray(h, dtype=float)
    L = len(h)
    g = h[::-1] * (-1.0) ** np.arange(L)
    out = np.empty_like(x)
    a = x
    nn = n
    while nn > 2**coarse_level:
        idx = _taps(nn, L)
        win = a[:, idx]
        out[:, nn // 2:nn] = win @ g
        a = win @ h
        nn //= 2
    out[:, :nn] = a
    return out


def idwt_periodized(c, h, coarse_level):
    c = np.asarray(c, dtype=float)
    R, n = c.shape
    h = np.asarray(h, dtype=float)
    L = len(h)
    g = h[::-1] * (-1.0) ** np.arange(L)
    nn = 2**coarse_level
    a = c[:, :nn].copy()
    while nn < n:
        d = c[:, nn:2 * nn]
        idx = _taps(2 * nn, L)
        up = np.zeros((R, 2 * nn))
        contrib = a[:, :, None] * h[None, None, :] + d[:, :, None] * g[None, None, :]
        flat = idx.reshape(-1)
        for r in range(R):
            up[r] = np.bincount(flat, weights=contrib[r].reshape(-1), minlength=2 * nn)
        a = up
        nn *= 2
    return a
