"""Numpy implementation of the expansion hot paths (fallback for ``_ckernels``).

All functions take the raw, unscaled atom arrays of an expansion.  Sums run
over atoms in storage order, matching the compiled version term for term.
"""

import numpy as np


def matched_mass(coef, w, rows, xs, K, x_idx, index, out):
    """``out[m] = sum over atoms i with xs[i, m] == x_idx[m] of coef[i] w[i, m] rows[i, m]``.

    Walks the inverted index ``index[m][x] -> atom ids``; ``xs`` and ``K``
    are unused here.
    """
    out[:] = 0.0
    for m in range(rows.shape[1]):
        ids = index[m].get(int(x_idx[m]))
        if not ids:
            continue
        ids = np.fromiter(ids, dtype=np.int64, count=len(ids))
        c = coef[ids] * w[ids, m]
        out[m] = (c[:, None] * rows[ids, m, :]).sum(axis=0)
    return out


def matched_mass_scan(coef, w, rows, xs, K, x_idx, out):
    out[:] = 0.0
    for m in range(rows.shape[1]):
        hit = np.flatnonzero(xs[:K, m] == x_idx[m])
        if hit.size == 0:
            continue
        c = coef[hit] * w[hit, m]
        out[m] = (c[:, None] * rows[hit, m, :]).sum(axis=0)
    return out


def quantized_mass(coef, w, rows, K, q_idx, out):
    """``out[m] = sum_i coef[i] w[i, m] rows[i, m, q_idx[m]]`` over all ``K`` atoms."""
    if K == 0:
        out[:] = 0.0
        return out
    M = rows.shape[1]
    c = coef[:K, None] * w[:K]
    out[:] = (c * rows[:K, np.arange(M), q_idx]).sum(axis=0)
    return out


def grouped_norm(coef, w, rows, xs, K, n_x, x_indicator):
    """Squared RKHS norm of the expansion under the marginalized count kernel.

    Atoms sharing an observation at sensor ``m`` are summed first, which is
    exact because the kernel factorizes over sensors and observation values.
    """
    total = 0.0
    for m in range(rows.shape[1]):
        a = (coef[:K] * w[:K, m])[:, None] * rows[:K, m, :]
        if x_indicator:
            acc = np.zeros((n_x, rows.shape[2]))
            np.add.at(acc, xs[:K, m], a)
            total += float(np.sum(acc * acc))
        else:
            s = a.sum(axis=0)
            total += float(s @ s)
    return total
