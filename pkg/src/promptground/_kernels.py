"""Hot numeric kernels: edit distance and cosine top-1 scan.

Both kernels exist twice: a numba ``@njit`` version and a pure-numpy
version; ``benchmarks/kernel_bench.py`` compares them. The edit-distance
DP uses the jitted version by default (about 85x faster here) — set
``PROMPTGROUND_NO_NUMBA=1`` (or run without numba installed) to select
the numpy path; the distances are identical integers either way. The
cosine scan always goes through numpy, whose BLAS matvec beats the
scalar loop.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("PROMPTGROUND_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in {"1", "true", "yes", "on"}

if not NUMBA_DISABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_DISABLED = True


def encode(s: str) -> np.ndarray:
    """Map a string to its codepoint array (one cell per codepoint)."""
    if not s:
        return np.empty(0, dtype=np.uint32)
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)


def lev_numpy(a: np.ndarray, b: np.ndarray) -> int:
    """Row-wise DP with the insertion step folded into a prefix-min scan.

    cur[j] = min(cur[j], cur[j-1]+1) for all j is equivalent to
    cur[j] = j + running_min(cur - index)[j], which vectorizes.
    """
    n, m = a.size, b.size
    if n == 0:
        return m
    if m == 0:
        return n
    idx = np.arange(m + 1)
    prev = idx.copy()
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(n):
        cur[0] = i + 1
        cur[1:] = np.minimum(prev[:-1] + (b != a[i]), prev[1:] + 1)
        np.minimum(cur, np.minimum.accumulate(cur - idx) + idx, out=cur)
        prev, cur = cur, prev
    return int(prev[m])


def _lev_scalar(a: np.ndarray, b: np.ndarray) -> int:
    n = a.size
    m = b.size
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(n):
        cur[0] = i + 1
        for j in range(1, m + 1):
            d = prev[j - 1]
            if a[i] != b[j - 1]:
                d += 1
            if prev[j] + 1 < d:
                d = prev[j] + 1
            if cur[j - 1] + 1 < d:
                d = cur[j - 1] + 1
            cur[j] = d
        prev, cur = cur, prev
    return prev[m]


def top1_numpy(unit_rows: np.ndarray, unit_query: np.ndarray) -> tuple[int, float]:
    """Argmax of cosine scores over pre-normalized rows; first max wins."""
    scores = unit_rows @ unit_query
    i = int(np.argmax(scores))
    return i, float(scores[i])


def _top1_scalar(unit_rows: np.ndarray, unit_query: np.ndarray) -> tuple[int, float]:
    best_i = 0
    best_s = -2.0
    for i in range(unit_rows.shape[0]):
        s = 0.0
        for j in range(unit_rows.shape[1]):
            s += unit_rows[i, j] * unit_query[j]
        if s > best_s:
            best_i = i
            best_s = s
    return best_i, best_s


top1_active = top1_numpy

if NUMBA_DISABLED:
    lev_active = lev_numpy
    top1_jit = None
    BACKEND = "numpy"
else:
    lev_active = njit(cache=True)(_lev_scalar)
    top1_jit = njit(cache=True)(_top1_scalar)
    BACKEND = "numba"
