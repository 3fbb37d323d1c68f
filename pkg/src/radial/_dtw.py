"""Dynamic-programming kernel for time-warping alignment costs."""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


def _warp_sqcost_py(a: np.ndarray, b: np.ndarray) -> float:
    """Minimal accumulated squared difference over monotone alignments.

    Three-way step pattern (insert, delete, match), no window constraint.
    Runs in O(len(a) * len(b)) time and O(len(b)) memory.
    """
    n = a.shape[0]
    m = b.shape[0]
    prev = np.empty(m + 1)
    cur = np.empty(m + 1)
    prev[0] = 0.0
    for j in range(1, m + 1):
        prev[j] = np.inf
    for i in range(1, n + 1):
        cur[0] = np.inf
        ai = a[i - 1]
        for j in range(1, m + 1):
            d = ai - b[j - 1]
            best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            if prev[j - 1] < best:
                best = prev[j - 1]
            cur[j] = d * d + best
        prev, cur = cur, prev
    return prev[m]


if njit is not None:
    warp_sqcost = njit(cache=True)(_warp_sqcost_py)
else:  # pragma: no cover
    warp_sqcost = _warp_sqcost_py
