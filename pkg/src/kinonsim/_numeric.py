"""Shared floating-point reduction primitives.

Every per-node channel reduction in this package (gathered mass, measured
potential totals, rate totals, output totals) uses one documented scheme:
sort the addends ascending, then accumulate with Neumaier compensation.

Sorting first makes the result invariant under any permutation of the
inputs.  Lattice symmetries permute a node's channels, so this is what lets
the engine commute with grid symmetries bit-exactly instead of merely
approximately.  The compensation term keeps per-node conservation well
inside the 1e-12 relative budget, and is also used to hand the storage
channel an exact complement of the distributed outputs.

The scalar and column-wise variants perform the same IEEE operations in the
same order, so a node evaluated through either path yields identical bits.
All addends in this package are non-negative; the routines still take
absolute values in the compensation branch so they stay correct in general.
"""

from __future__ import annotations

import numpy as np


def comp_sum_parts(values) -> tuple[float, float]:
    """Sorted Neumaier sum of a scalar sequence, returned as (sum, correction).

    The mathematically exact sum is approximated by ``sum + correction`` to
    roughly double-double accuracy; ``comp_sum`` collapses the pair.
    """
    ordered = sorted(values)
    if not ordered:
        return 0.0, 0.0
    total = float(ordered[0])
    corr = 0.0
    for value in ordered[1:]:
        value = float(value)
        t = total + value
        if abs(total) >= abs(value):
            corr += (total - t) + value
        else:
            corr += (value - t) + total
        total = t
    return total, corr


def comp_sum(values) -> float:
    total, corr = comp_sum_parts(values)
    return total + corr


def comp_sum_cols_parts(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise sorted Neumaier sum over axis 1 of a 2-D array.

    Returns (sum, correction) arrays of shape (rows,).  Bit-compatible with
    ``comp_sum_parts`` applied to each row.
    """
    if a.ndim != 2:
        raise ValueError("expected a 2-D array")
    rows, cols = a.shape
    if cols == 0:
        zero = np.zeros(rows, dtype=np.float64)
        return zero, zero.copy()
    ordered = np.sort(a, axis=1)
    total = ordered[:, 0].astype(np.float64, copy=True)
    corr = np.zeros(rows, dtype=np.float64)
    for j in range(1, cols):
        value = ordered[:, j]
        t = total + value
        corr += np.where(np.abs(total) >= np.abs(value),
                         (total - t) + value,
                         (value - t) + total)
        total = t
    return total, corr


def comp_sum_cols(a: np.ndarray) -> np.ndarray:
    total, corr = comp_sum_cols_parts(a)
    return total + corr
