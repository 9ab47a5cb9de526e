"""Weighted kernels on quantization vectors and their marginalized forms.

Weights enter pairwise as ``w_i[m] * w_n[m]`` so the same functions serve
same-time (``w_i is w_n``) and cross-time evaluations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import ConfigurationError

KernelKind = Literal["count", "linear"]
KERNEL_KINDS = ("count", "linear")


@dataclass(frozen=True)
class SensorDistribution:
    """Quantizer output distribution of sensor ``sensor`` given observation ``x``."""

    sensor: int
    x: float
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probs must be a probability vector")
        object.__setattr__(self, "probs", p)


def _check_lengths(*arrays) -> int:
    sizes = {len(a) for a in arrays}
    if len(sizes) != 1:
        raise ValueError(f"length mismatch: {sorted(sizes)}")
    return sizes.pop()


def weighted_count_kernel(q, q2, w_i, w_n) -> float:
    _check_lengths(q, q2, w_i, w_n)
    match = np.asarray(q) == np.asarray(q2)
    return float(np.sum(np.asarray(w_i, float) * np.asarray(w_n, float) * match))


def weighted_linear_kernel(q, q2, w_i, w_n) -> float:
    _check_lengths(q, q2, w_i, w_n)
    return float(np.sum(np.asarray(w_i, float) * np.asarray(w_n, float) * np.asarray(q, float) * np.asarray(q2, float)))


def _rows(rows) -> list[np.ndarray]:
    return [np.asarray(r.probs if isinstance(r, SensorDistribution) else r, dtype=float) for r in rows]


def marginalized_count_kernel(rows_i, rows_n, x_i, x_n, w_i, w_n) -> float:
    """Per-sensor overlap of the two output distributions, gated by equal observations."""
    rows_i, rows_n = _rows(rows_i), _rows(rows_n)
    _check_lengths(rows_i, rows_n, x_i, x_n, w_i, w_n)
    total = 0.0
    for m, (a, b) in enumerate(zip(rows_i, rows_n)):
        if a.shape != b.shape:
            raise ValueError(f"sensor {m}: row lengths differ")
        if x_i[m] == x_n[m]:
            total += w_i[m] * w_n[m] * float(a @ b)
    return total


def marginalized_linear_kernel(rows_i, rows_n, w_i, w_n, points) -> float:
    """Weighted product of the per-sensor conditional means of the quantizer output."""
    rows_i, rows_n = _rows(rows_i), _rows(rows_n)
    _check_lengths(rows_i, rows_n, w_i, w_n)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = np.broadcast_to(pts, (len(rows_i), pts.size))
    total = 0.0
    for m, (a, b) in enumerate(zip(rows_i, rows_n)):
        if a.size != pts[m].size or b.size != pts[m].size:
            raise ValueError(f"sensor {m}: row length does not match the quantization points")
        total += w_i[m] * w_n[m] * float(a @ pts[m]) * float(b @ pts[m])
    return total


def joint_outcomes(rows: Sequence[np.ndarray]):
    """Yield ``(index_vector, probability)`` over the product of per-sensor rows."""
    for combo in itertools.product(*(range(r.size) for r in rows)):
        p = 1.0
        for r, k in zip(rows, combo):
            p *= r[k]
        yield combo, p


def marginalized_kernel_bruteforce(
    rows_i,
    rows_n,
    x_i,
    x_n,
    w_i,
    w_n,
    kind: KernelKind = "count",
    points=None,
    x_indicator: bool = True,
    max_outcomes: int = 1 << 16,
) -> float:
    """Expectation of the base kernel over both joint quantizer outputs, by enumeration.

    ``rows_*`` are per-sensor distributions at the observations ``x_*``; the
    joint distribution is their product.  For the count kind the base kernel
    carries the per-sensor equal-observation gate unless ``x_indicator`` is off.
    """
    rows_i, rows_n = _rows(rows_i), _rows(rows_n)
    M = _check_lengths(rows_i, rows_n, x_i, x_n, w_i, w_n)
    size = int(np.prod([r.size for r in rows_i])) * int(np.prod([r.size for r in rows_n]))
    if size > max_outcomes:
        raise ConfigurationError(f"{size} joint outcomes exceed the enumeration cap {max_outcomes}")
    ww = np.asarray(w_i, float) * np.asarray(w_n, float)
    if kind == "count":
        gate = np.array([x_i[m] == x_n[m] or not x_indicator for m in range(M)], dtype=float)
        coeff = ww * gate
    elif kind == "linear":
        if points is None:
            raise ConfigurationError("linear kernel needs quantization points")
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = np.broadcast_to(pts, (M, pts.size))
        coeff = ww
    else:
        raise ConfigurationError(f"unknown kernel kind {kind!r}")
    outcomes_n = list(joint_outcomes(rows_n))
    total = 0.0
    for qi, pi in joint_outcomes(rows_i):
        if pi == 0.0:
            continue
        for qn, pn in outcomes_n:
            if kind == "count":
                k = sum(coeff[m] for m in range(M) if qi[m] == qn[m])
            else:
                k = sum(coeff[m] * pts[m, qi[m]] * pts[m, qn[m]] for m in range(M))
            total += pi * pn * k
    return float(total)
