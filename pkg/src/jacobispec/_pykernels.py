"""Pure-Python reference versions of the hot loops.

Same signatures and return types as the compiled ``_ckernels`` module.
Used when the extension is not built or when ``JACOBISPEC_KERNELS=python``.
"""
from __future__ import annotations

import numpy as np


def propagate(c, d, E, u0, u1, rescale=1e150):
    """Run the three-term recurrence along a path of sites s_0, s_1, ...

    ``c[k]`` couples s_k to s_{k+1} and ``d[k]`` is the diagonal at s_k, so
    for k >= 1::

        u[k+1] = ((E - d[k]) * u[k] - c[k-1] * u[k-1]) / c[k]

    Whenever |u[k+1]| exceeds ``rescale`` the live pair is divided by
    ``rescale``. The true value at index k is ``values[k] * rescale**counts[k]``.
    """
    n = len(d)
    values = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    if n == 0:
        return values, counts
    values[0] = u0
    if n == 1:
        return values, counts
    values[1] = u1
    prev, cur = float(u0), float(u1)
    count = 0
    E = float(E)
    for k in range(1, n - 1):
        nxt = ((E - d[k]) * cur - c[k - 1] * prev) / c[k]
        if abs(nxt) > rescale:
            count += 1
            cur /= rescale
            nxt /= rescale
        values[k + 1] = nxt
        counts[k + 1] = count
        prev, cur = cur, nxt
    return values, counts


def log_cumsumsq(values, counts, rescale=1e150):
    """Running ``log(sum_{j<=k} |u_j|^2)`` for rescaled recurrence output."""
    values = np.asarray(values, dtype=float)
    counts = np.asarray(counts)
    with np.errstate(divide="ignore"):
        logsq = 2.0 * (np.log(np.abs(values)) + counts * np.log(rescale))
    return np.logaddexp.accumulate(logsq)


def cf_backward(a, b, z, seed):
    """Evaluate m_0 from m_k = 1 / (b[k] - z - a[k]^2 m_{k+1}) with m_K = seed."""
    m = complex(seed)
    z = complex(z)
    for k in range(len(b) - 1, -1, -1):
        m = 1.0 / (b[k] - z - a[k] * a[k] * m)
    return m


def tridiag_solve(off, diag, rhs):
    """Solve T x = rhs for complex symmetric tridiagonal T (Thomas algorithm).

    ``off`` holds the real off-diagonal (length N-1), ``diag`` the complex
    diagonal (length N) and ``rhs`` is an (N, r) complex array.
    """
    diag = np.asarray(diag, dtype=complex)
    rhs = np.array(rhs, dtype=complex, copy=True)
    n = diag.shape[0]
    cp = np.zeros(max(n - 1, 0), dtype=complex)
    piv = np.zeros(n, dtype=complex)
    piv[0] = diag[0]
    for k in range(1, n):
        cp[k - 1] = off[k - 1] / piv[k - 1]
        piv[k] = diag[k] - off[k - 1] * cp[k - 1]
        rhs[k] -= cp[k - 1] * rhs[k - 1]
    rhs[n - 1] /= piv[n - 1]
    for k in range(n - 2, -1, -1):
        rhs[k] = (rhs[k] - off[k] * rhs[k + 1]) / piv[k]
    return rhs
