"""Sequential scan kernels for discrete-time recurrences.

Compiled with numba when it is importable; the same loops run as plain
Python otherwise (slow but identical).
"""

import numpy as np

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is a hard dep, belt and braces
    def _njit(**kwargs):
        def deco(fn):
            return fn
        return deco


@_njit(cache=True)
def scan_diag_fwd(e, w, z0):
    """z[0] = z0; z[k+1] = e[k] * z[k] + w[k] (elementwise, complex)."""
    nstep, n = e.shape
    z = np.empty((nstep + 1, n), dtype=np.complex128)
    for j in range(n):
        z[0, j] = z0[j]
    for k in range(nstep):
        for j in range(n):
            z[k + 1, j] = e[k, j] * z[k, j] + w[k, j]
    return z


@_njit(cache=True)
def scan_diag_bwd(e, r):
    """mu[N-1] = r[N-1]; mu[k] = r[k] + e[k] * mu[k+1] (elementwise)."""
    nsamp, n = r.shape
    mu = np.empty((nsamp, n), dtype=np.complex128)
    for j in range(n):
        mu[nsamp - 1, j] = r[nsamp - 1, j]
    for k in range(nsamp - 2, -1, -1):
        for j in range(n):
            mu[k, j] = r[k, j] + e[k, j] * mu[k + 1, j]
    return mu


@_njit(cache=True)
def scan_dense_fwd(phi, g0, g1, idx, u, x0):
    """x[0] = x0; x[k+1] = phi[s] x[k] + g0[s] u[k] + g1[s] u[k+1], s = idx[k]."""
    nstep = idx.shape[0]
    n = phi.shape[1]
    m = u.shape[1]
    x = np.empty((nstep + 1, n))
    for i in range(n):
        x[0, i] = x0[i]
    for k in range(nstep):
        s = idx[k]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += phi[s, i, j] * x[k, j]
            for j in range(m):
                acc += g0[s, i, j] * u[k, j] + g1[s, i, j] * u[k + 1, j]
            x[k + 1, i] = acc
    return x


@_njit(cache=True)
def scan_dense_bwd(phi, idx, r):
    """lam[N-1] = r[N-1]; lam[k] = r[k] + phi[idx[k]]^T lam[k+1]."""
    nsamp, n = r.shape
    lam = np.empty((nsamp, n))
    for i in range(n):
        lam[nsamp - 1, i] = r[nsamp - 1, i]
    for k in range(nsamp - 2, -1, -1):
        s = idx[k]
        for i in range(n):
            acc = r[k, i]
            for j in range(n):
                acc += phi[s, j, i] * lam[k + 1, j]
            lam[k, i] = acc
    return lam
