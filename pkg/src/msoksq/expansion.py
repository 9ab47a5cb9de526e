"""The decision function as a growing expansion over stored support atoms.

Each atom snapshots the quantization rows at its observation, the sensor
weights and its coefficient at creation.  Coefficients decay by a common
factor every step; the decay is kept in one global scale so an update costs
O(M Q) instead of a pass over all atoms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .errors import ConfigurationError
from .loss import LossKind

_RENORMALIZE_BELOW = 1e-150


@dataclass(frozen=True)
class EtaSchedule:
    """Learning rate ``eta1 / sqrt(n)`` for the decision function."""

    eta1: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.eta1 <= 1.0:
            raise ConfigurationError(f"eta1 must lie in (0, 1], got {self.eta1!r}")

    def __call__(self, n: int) -> float:
        return self.eta1 / math.sqrt(n)

    def check(self, lambda1: float) -> None:
        # eta_n <= eta1, so this bounds every step
        if lambda1 < 0 or lambda1 * self.eta1 >= 1.0:
            raise ConfigurationError(f"need 0 <= lambda1 < 1/eta1, got lambda1={lambda1!r}")


@dataclass(frozen=True)
class SupportAtom:
    time: int
    label: int
    x_idx: np.ndarray
    rows: np.ndarray
    w: np.ndarray
    base_coef: float
    creation_scale: float
    alpha: float


class Expansion:
    """Kernel expansion ``f = sum_i alpha_i * Phi_i`` for ``M`` sensors.

    ``kind="count"`` uses the marginalized weighted count kernel, gated by
    equal observations; ``kind="linear"`` uses the marginalized weighted
    linear kernel and needs the quantization ``points``.
    """

    def __init__(self, M: int, Q: int, n_x: int, kind: str = "count", points=None, capacity: int = 64):
        if kind not in ("count", "linear"):
            raise ConfigurationError(f"unknown kernel kind {kind!r}")
        if kind == "linear":
            if points is None:
                raise ConfigurationError("linear kernel needs quantization points")
            points = np.broadcast_to(np.asarray(points, dtype=float), (M, Q)).copy()
        self.M, self.Q, self.n_x, self.kind = M, Q, n_x, kind
        self.points = points
        self.scale = 1.0
        self.K = 0
        self._alloc(max(capacity, 1))
        self.index: list[dict[int, list[int]]] = [{} for _ in range(M)]

    def _alloc(self, cap: int) -> None:
        M, Q = self.M, self.Q
        old = getattr(self, "_coef", None)
        coef, base, cscale = np.zeros(cap), np.zeros(cap), np.zeros(cap)
        w, xs = np.zeros((cap, M)), np.zeros((cap, M), dtype=np.int64)
        rows = np.zeros((cap, M, Q))
        times, labels = np.zeros(cap, dtype=np.int64), np.zeros(cap, dtype=np.int64)
        if old is not None:
            K = self.K
            coef[:K], base[:K], cscale[:K] = self._coef[:K], self._base[:K], self._cscale[:K]
            w[:K], xs[:K], rows[:K] = self._w[:K], self._xs[:K], self._rows[:K]
            times[:K], labels[:K] = self._times[:K], self._labels[:K]
        self._coef, self._base, self._cscale = coef, base, cscale
        self._w, self._xs, self._rows = w, xs, rows
        self._times, self._labels = times, labels

    def __len__(self) -> int:
        return self.K

    # -- coefficients -------------------------------------------------

    def alphas(self) -> np.ndarray:
        """Effective coefficients ``alpha_{i,n}`` of the stored atoms."""
        return self._coef[: self.K] * self.scale

    def decay(self, factor: float) -> None:
        self.scale *= factor
        if self.scale < _RENORMALIZE_BELOW:
            K = self.K
            self._coef[:K] *= self.scale
            self._cscale[:K] /= self.scale
            self.scale = 1.0

    def append(self, time: int, label: int, x_idx, rows, w, alpha: float) -> None:
        if alpha == 0.0:
            raise ValueError("zero-coefficient atoms are not stored")
        if self.K == self._coef.size:
            self._alloc(2 * self.K)
        k = self.K
        self._base[k] = alpha
        self._cscale[k] = self.scale
        self._coef[k] = alpha / self.scale
        self._xs[k] = x_idx
        self._rows[k] = rows
        self._w[k] = w
        self._times[k] = time
        self._labels[k] = label
        self.K += 1
        for m in range(self.M):
            self.index[m].setdefault(int(x_idx[m]), []).append(k)

    # -- evaluation ---------------------------------------------------

    def _arrays(self):
        return self._coef, self._w, self._rows, self._xs, self.K

    def _means(self) -> np.ndarray:
        return np.einsum("kmq,mq->km", self._rows[: self.K], self.points)

    def _linear_mass(self) -> np.ndarray:
        # per-sensor sum of alpha_i w_{m,i} E_i[Q_m], spread over the points
        L = (self.alphas()[:, None] * self._w[: self.K] * self._means()).sum(axis=0)
        return L[:, None] * self.points

    def matched_mass(self, x_idx, backend=None) -> np.ndarray:
        """Per-sensor accumulated atom rows seen from observation ``x_idx``.

        Row ``m`` is ``sum_i alpha_i w_{m,i} P_{m,i}(.|x_{m,i})`` over atoms
        with ``x_{m,i} == x_idx[m]`` (count kind), so the training margin is
        ``sum_m w_n[m] <S[m], P_n(.|x_{m,n})>`` and every sub-gradient of the
        instantaneous risk is read off ``S`` directly.
        """
        if self.kind == "linear":
            return self._linear_mass()
        impl = backend or _backend.impl
        out = np.zeros((self.M, self.Q))
        x_idx = np.ascontiguousarray(x_idx, dtype=np.int64)
        impl.matched_mass(self._coef, self._w, self._rows, self._xs, self.K, x_idx, self.index, out)
        return out * self.scale

    def matched_mass_scan(self, x_idx, backend=None) -> np.ndarray:
        impl = backend or _backend.impl
        out = np.zeros((self.M, self.Q))
        x_idx = np.ascontiguousarray(x_idx, dtype=np.int64)
        impl.matched_mass_scan(self._coef, self._w, self._rows, self._xs, self.K, x_idx, out)
        return out * self.scale

    def quantized_mass(self, q_idx, backend=None) -> np.ndarray:
        """``V[m] = sum_i alpha_i w_{m,i} P_{m,i}(q_m | x_{m,i})`` over all atoms."""
        q_idx = np.ascontiguousarray(q_idx, dtype=np.int64)
        if self.kind == "linear":
            return self._linear_mass()[np.arange(self.M), q_idx]
        impl = backend or _backend.impl
        out = np.zeros(self.M)
        impl.quantized_mass(self._coef, self._w, self._rows, self.K, q_idx, out)
        return out * self.scale

    def evaluate_training_margin(self, rows, w_n, x_idx) -> float:
        S = self.matched_mass(x_idx)
        return float(np.asarray(w_n) @ np.sum(S * rows, axis=1))

    def evaluate_on_quantized(self, q_idx, w_n, x_idx=None) -> float:
        """Decision value for the forwarded quantization vector ``q_idx``.

        With ``x_idx`` given the equal-observation gate of the training
        kernel is applied as well (ablation); by default it is not.
        """
        if x_idx is not None and self.kind == "count":
            V = self.matched_mass(x_idx)[np.arange(self.M), np.asarray(q_idx)]
        else:
            V = self.quantized_mass(q_idx)
        return float(np.asarray(w_n) @ V)

    def norm_squared(self, backend=None) -> float:
        """``||f||^2 = sum_ij alpha_i alpha_j k(atom_i, atom_j)``."""
        if self.K == 0:
            return 0.0
        if self.kind == "linear":
            L = (self.alphas()[:, None] * self._w[: self.K] * self._means()).sum(axis=0)
            return float(L @ L)
        impl = backend or _backend.impl
        return impl.grouped_norm(self._coef, self._w, self._rows, self._xs, self.K, self.n_x, True) * self.scale**2

    def self_kernel(self, rows, w) -> float:
        """Kernel of a prospective atom with itself."""
        w = np.asarray(w)
        if self.kind == "linear":
            e = np.sum(rows * self.points, axis=1)
            return float(np.sum(w * w * e * e))
        return float(np.sum(w * w * np.sum(rows * rows, axis=1)))

    # -- maintenance --------------------------------------------------

    def atoms(self) -> list[SupportAtom]:
        a = self.alphas()
        return [
            SupportAtom(
                int(self._times[i]), int(self._labels[i]), self._xs[i].copy(), self._rows[i].copy(),
                self._w[i].copy(), float(self._base[i]), float(self._cscale[i]), float(a[i]),
            )
            for i in range(self.K)
        ]

    def truncate(self, budget: int) -> None:
        """Keep the ``budget`` atoms of largest effective |alpha|, in time order."""
        if budget < 1:
            raise ConfigurationError("budget must be at least 1")
        if self.K <= budget:
            return
        order = np.argsort(-np.abs(self._coef[: self.K]), kind="stable")
        keep = np.sort(order[:budget])
        for name in ("_coef", "_base", "_cscale", "_w", "_xs", "_rows", "_times", "_labels"):
            arr = getattr(self, name)
            arr[:budget] = arr[keep]
        self.K = budget
        self._rebuild_index()

    def _rebuild_index(self) -> None:
        self.index = [{} for _ in range(self.M)]
        for k in range(self.K):
            for m in range(self.M):
                self.index[m].setdefault(int(self._xs[k, m]), []).append(k)

    def to_dict(self) -> dict:
        K = self.K
        return {
            "M": self.M, "Q": self.Q, "n_x": self.n_x, "kind": self.kind,
            "points": None if self.points is None else self.points.tolist(),
            "scale": self.scale,
            "atoms": [
                {
                    "time": int(self._times[i]), "label": int(self._labels[i]),
                    "x_idx": self._xs[i].tolist(), "rows": self._rows[i].tolist(),
                    "w": self._w[i].tolist(), "base_coef": float(self._base[i]),
                    "creation_scale": float(self._cscale[i]), "coef": float(self._coef[i]),
                }
                for i in range(K)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Expansion":
        exp = cls(d["M"], d["Q"], d["n_x"], d["kind"], d["points"], capacity=max(len(d["atoms"]), 1))
        for a in d["atoms"]:
            k = exp.K
            exp._times[k], exp._labels[k] = a["time"], a["label"]
            exp._xs[k], exp._rows[k], exp._w[k] = a["x_idx"], a["rows"], a["w"]
            exp._base[k], exp._cscale[k], exp._coef[k] = a["base_coef"], a["creation_scale"], a["coef"]
            exp.K += 1
        exp.scale = d["scale"]
        exp._rebuild_index()
        return exp

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "Expansion":
        return cls.from_dict(json.loads(Path(path).read_text()))


def evaluate_training_margin(expansion: Expansion, rows, w_n, x_idx) -> float:
    return expansion.evaluate_training_margin(rows, w_n, x_idx)


def evaluate_on_quantized(expansion: Expansion, q_idx, w_n) -> float:
    return expansion.evaluate_on_quantized(q_idx, w_n)


def norm_squared(expansion: Expansion) -> float:
    return expansion.norm_squared()


def truncate(expansion: Expansion, budget: int) -> Expansion:
    expansion.truncate(budget)
    return expansion


def step_update(expansion: Expansion, n: int, y: int, x_idx, margin: float, loss: LossKind,
                eta_n: float, lambda1: float, rows, w) -> float:
    """Decay all coefficients by ``1 - eta_n*lambda1`` and append the step's atom.

    Returns the new atom's coefficient, 0.0 when the loss sub-gradient
    vanishes and nothing is appended.
    """
    if eta_n * lambda1 >= 1.0 or eta_n < 0 or lambda1 < 0:
        raise ConfigurationError(f"need eta_n*lambda1 < 1, got {eta_n}*{lambda1}")
    g = loss.subgradient(margin, y)
    expansion.decay(1.0 - eta_n * lambda1)
    if g == 0.0:
        return 0.0
    alpha = -eta_n * g
    expansion.append(n, y, x_idx, rows, w, alpha)
    return alpha
