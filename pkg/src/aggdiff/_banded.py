"""Solver for periodic (cyclic) banded linear systems.

The matrix is given by its diagonals: ``bands[k, i]`` is the entry in row
``i`` and column ``(i + k - p) mod n`` where ``p`` is the half-bandwidth.
The wrap-around corner entries are removed with a Woodbury correction so
the bulk solve goes through LAPACK's banded routine.
"""

import numpy as np
from scipy.linalg import solve_banded


def _corner_layout(n, p):
    """Index set touched by the wrap-around entries, with their band positions."""
    idx = np.r_[np.arange(p), np.arange(n - p, n)]
    entries = []  # (row, col, band k)
    for k in range(2 * p + 1):
        off = k - p
        if off < 0:
            for i in range(-off):
                entries.append((i, (i + off) % n, k))
        elif off > 0:
            for i in range(n - off, n):
                entries.append((i, (i + off) % n, k))
    return idx, entries


_LAYOUTS = {}


def cyclic_banded_solve(bands: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    nb, n = bands.shape
    p = (nb - 1) // 2
    # LAPACK banded storage: ab[p + i - j, j] = A[i, j]
    ab = np.zeros((nb, n))
    for k in range(nb):
        off = k - p
        if off >= 0:
            ab[p - off, off:] = bands[k, : n - off]
        else:
            ab[p - off, : n + off] = bands[k, -off:]
    key = (n, p)
    if key not in _LAYOUTS:
        _LAYOUTS[key] = _corner_layout(n, p)
    idx, entries = _LAYOUTS[key]
    m = idx.size
    pos = {v: i for i, v in enumerate(idx)}
    C = np.zeros((m, m))
    for r, c, k in entries:
        C[pos[r], pos[c]] += bands[k, r]
    rhs_all = np.zeros((n, m + 1))
    rhs_all[:, 0] = rhs
    rhs_all[idx, 1 + np.arange(m)] = 1.0
    sol = solve_banded((p, p), ab, rhs_all, overwrite_ab=True, overwrite_b=True, check_finite=False)
    y, Z = sol[:, 0], sol[:, 1:]
    small = np.eye(m) + C @ Z[idx, :]
    return y - Z @ np.linalg.solve(small, C @ y[idx])
