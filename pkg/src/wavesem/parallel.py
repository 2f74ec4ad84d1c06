"""Thread control and deterministic parallel kernels.

Row-parallel CSR products and blocked reductions. Reductions split vectors
into a fixed number of blocks that does not depend on the thread count and
combine the block partial sums in a fixed order, so results are bitwise
identical for any number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numba
import numpy as np

# OpenMP is available wherever numba ships wheels; TBB often is not.
if os.environ.get("NUMBA_THREADING_LAYER") is None:
    numba.config.THREADING_LAYER = "omp"

N_BLOCKS = 256

_threads = 1


def available_threads():
    return numba.config.NUMBA_NUM_THREADS


def get_threads():
    return _threads


def set_threads(n):
    """Set the worker count for kernels and element loops.

    The count is capped by ``NUMBA_NUM_THREADS`` (fixed at import time);
    export it before starting Python to oversubscribe a small host.
    """
    global _threads
    n = max(1, min(int(n), available_threads()))
    numba.set_num_threads(n)
    _threads = n
    return n


@contextmanager
def threads(n):
    old = _threads
    set_threads(n)
    try:
        yield
    finally:
        set_threads(old)


def threads_from_env(default=1):
    value = os.environ.get("WAVESEM_THREADS")
    return int(value) if value else default


@numba.njit(parallel=True, cache=True)
def _csr_matvec(indptr, indices, data, x, out):
    n = len(indptr) - 1
    for i in numba.prange(n):
        acc = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * x[indices[jj]]
        out[i] = acc
    return out


@numba.njit(parallel=True, cache=True)
def _blocked_dot(a, b, nblocks):
    n = len(a)
    partial = np.zeros(nblocks)
    for k in numba.prange(nblocks):
        lo = (n * k) // nblocks
        hi = (n * (k + 1)) // nblocks
        acc = 0.0
        for i in range(lo, hi):
            acc += a[i] * b[i]
        partial[k] = acc
    total = 0.0
    for k in range(nblocks):
        total += partial[k]
    return total


@numba.njit(parallel=True, cache=True)
def _axpy_pair(x, p, r, ap, alpha):
    # x += alpha p ; r -= alpha ap
    for i in numba.prange(len(x)):
        x[i] += alpha * p[i]
        r[i] -= alpha * ap[i]


@numba.njit(parallel=True, cache=True)
def _xpby(z, beta, p):
    # p = z + beta p
    for i in numba.prange(len(p)):
        p[i] = z[i] + beta * p[i]


@numba.njit(parallel=True, cache=True)
def _scale(d, r, out):
    for i in numba.prange(len(r)):
        out[i] = d[i] * r[i]


def matvec(A, x, out=None):
    if out is None:
        out = np.empty(A.shape[0])
    return _csr_matvec(A.indptr, A.indices, A.data, np.ascontiguousarray(x, dtype=float), out)


def dot(a, b):
    return _blocked_dot(a, b, N_BLOCKS)


def norm(a):
    return float(np.sqrt(_blocked_dot(a, a, N_BLOCKS)))


def axpy_pair(x, p, r, ap, alpha):
    _axpy_pair(x, p, r, ap, alpha)


def xpby(z, beta, p):
    _xpby(z, beta, p)


def scale(d, r, out):
    _scale(d, r, out)
    return out


def map_chunks(func, n_items, chunk=1024):
    """Apply ``func(lo, hi)`` over index chunks, threaded when more than one worker is set."""
    bounds = [(lo, min(lo + chunk, n_items)) for lo in range(0, n_items, chunk)]
    if _threads <= 1 or len(bounds) <= 1:
        for lo, hi in bounds:
            func(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=_threads) as pool:
        list(pool.map(lambda b: func(*b), bounds))
