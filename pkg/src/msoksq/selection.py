"""Sensor weights: sub-gradient, adaptive L1 strength, sparse projected update, freeze."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

WEIGHT_TOL = 1e-9


@dataclass
class WeightVector:
    """Nonnegative sensor weights summing to ``M``; frozen once ``target`` remain enabled."""

    w: np.ndarray
    target: int
    frozen: bool = False

    @classmethod
    def ones(cls, M: int, target: int | None = None) -> "WeightVector":
        target = M if target is None else target
        if not 1 <= target <= M:
            raise ConfigurationError(f"need 1 <= M' <= M, got M'={target}, M={M}")
        return cls(np.ones(M), target, frozen=target >= M)

    @property
    def M(self) -> int:
        return self.w.size

    def nonzero(self) -> int:
        return int(np.count_nonzero(self.w))

    def check(self, tol: float = WEIGHT_TOL) -> bool:
        return bool(np.all(self.w >= 0) and abs(self.w.sum() - self.M) <= tol)


def weight_gradients(S: np.ndarray, new_rows: np.ndarray) -> np.ndarray:
    """Derivative of the training margin w.r.t. each ``w_n[m]``: ``<S[m], P_{n+1}[m]>``."""
    return np.einsum("mq,mq->m", S, new_rows)


def weight_subgradient(G, nu: float, lambda2: float) -> np.ndarray:
    """Per-sensor sub-gradient of the instantaneous risk plus the L1 term."""
    return nu * np.asarray(G, dtype=float) + lambda2


def lambda2_schedule(w, G, nu: float, enabled=None) -> float:
    """``max(0, min_m (w_m - nu * G_m))`` over the enabled sensors.

    At full step size this value zeroes the minimizing sensor; disabled
    sensors are left out since their weight can no longer move.
    """
    w = np.asarray(w, dtype=float)
    vals = w - nu * np.asarray(G, dtype=float)
    if enabled is None:
        enabled = w > 0
    if not np.any(enabled):
        return 0.0
    return max(0.0, float(vals[enabled].min()))


def update_weights(state: WeightVector, subgrads, eta_w: float, zero_tol: float = 0.0) -> np.ndarray:
    """Projected step ``max(0, w - eta_w * g)`` renormalized to ``||w||_1 = M``.

    Entries at or below ``zero_tol`` after the step count as clipped.  At
    most one sensor is disabled per call: if several entries are clipped,
    only the smallest is zeroed and the others keep their previous value.
    Freezes once the enabled count reaches the target.
    """
    if not eta_w > 0:
        raise ConfigurationError(f"eta_w must be positive, got {eta_w!r}")
    if state.frozen:
        return state.w
    w = state.w
    raw = w - eta_w * np.asarray(subgrads, dtype=float)
    raw[w == 0] = 0.0
    clipped = np.flatnonzero((raw <= zero_tol) & (w > 0))
    if clipped.size:
        drop = clipped[np.argmin(raw[clipped])]
        keep = clipped[clipped != drop]
        raw[keep] = w[keep]
        raw[drop] = 0.0
    tilde = np.maximum(raw, 0.0)
    total = tilde.sum()
    if total <= 0:
        warnings.warn("weight step would disable every sensor; update rejected", RuntimeWarning, stacklevel=2)
        return state.w
    state.w = tilde * (state.M / total)
    if state.nonzero() <= state.target:
        state.frozen = True
    return state.w


def enabled_sensors(w) -> list[int]:
    """Indices (0-based) of sensors with positive weight."""
    return [int(i) for i in np.flatnonzero(np.asarray(w) > 0)]


@dataclass
class SelectionTrace:
    steps: list = field(default_factory=list)
    lambda2: list = field(default_factory=list)
    nonzero: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def record(self, n: int, lam: float, w: np.ndarray) -> None:
        self.steps.append(n)
        self.lambda2.append(lam)
        self.nonzero.append(int(np.count_nonzero(w)))
        self.weights.append(w.copy())

    def disabled(self, k: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.weights[k] == 0)]

    def write_csv(self, path: str | Path) -> None:
        M = self.weights[0].size if self.weights else 0
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["step", "lambda2", "nonzero"] + [f"w{m}" for m in range(M)])
            for n, lam, nz, w in zip(self.steps, self.lambda2, self.nonzero, self.weights):
                out.writerow([n, repr(lam), nz] + [repr(float(v)) for v in w])


def random_selection_baseline(state: WeightVector, M_prime: int, rng: np.random.Generator) -> WeightVector:
    """Enable ``M_prime`` sensors chosen uniformly at random and freeze.

    Chosen sensors that are already enabled keep their weight; the weights
    of enabled sensors that were not chosen move, in random order, to the
    chosen sensors that were disabled (any still empty get the mean positive
    weight).  The result is renormalized to sum to ``M``.
    """
    M = state.M
    if not 1 <= M_prime <= M:
        raise ConfigurationError(f"need 1 <= M' <= M, got {M_prime}")
    w = state.w
    chosen = np.zeros(M, dtype=bool)
    chosen[rng.choice(M, size=M_prime, replace=False)] = True
    enabled = w > 0
    new = np.where(chosen & enabled, w, 0.0)
    donors = rng.permutation(w[enabled & ~chosen])
    receivers = np.flatnonzero(chosen & ~enabled)
    k = min(donors.size, receivers.size)
    new[receivers[:k]] = donors[:k]
    fill = w[enabled].mean() if enabled.any() else 1.0
    new[receivers[k:]] = fill
    state.w = new * (M / new.sum())
    state.target = M_prime
    state.frozen = True
    return state
