"""Stochastic scalar quantization rules of the sensors.

A rule table holds, for every sensor ``m`` and observation index ``x``, a
probability row over that sensor's quantization points.  Rows of different
sensors share one padded array; ``n_x[m]`` says how many rows are valid.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ObservationAlphabet, QuantizationAlphabet
from .errors import ConfigurationError, DataError
from .kernels import joint_outcomes

SIMPLEX_TOL = 1e-9


class RuleTable:
    """Rows ``P_m(q | x)`` with per-row visit counters and last-visit times."""

    def __init__(self, probs: np.ndarray, n_x: Sequence[int], points: np.ndarray, values=None):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 3:
            raise ConfigurationError("rule probabilities must have shape (M, X, Q)")
        self.probs = probs
        self.n_x = np.asarray(n_x, dtype=np.int64)
        self.points = np.broadcast_to(np.asarray(points, dtype=float), (probs.shape[0], probs.shape[2])).copy()
        self.values = values
        self.visits = np.zeros(probs.shape[:2], dtype=np.int64)
        self.last_seen = np.zeros(probs.shape[:2], dtype=np.int64)
        self._sensors = np.arange(probs.shape[0])

    @property
    def M(self) -> int:
        return self.probs.shape[0]

    @property
    def Q(self) -> int:
        return self.probs.shape[2]

    def _check_idx(self, x_idx) -> np.ndarray:
        x_idx = np.asarray(x_idx, dtype=np.int64)
        if x_idx.shape != (self.M,) or np.any(x_idx < 0) or np.any(x_idx >= self.n_x):
            raise DataError(f"observation indices {x_idx!r} outside the alphabets")
        return x_idx

    def rows_at(self, x_idx) -> np.ndarray:
        """Copy of the ``(M, Q)`` rows selected by one observation vector."""
        x_idx = self._check_idx(x_idx)
        return self.probs[self._sensors, x_idx].copy()

    def observe(self, x_idx, n: int) -> None:
        x_idx = self._check_idx(x_idx)
        self.visits[self._sensors, x_idx] += 1
        self.last_seen[self._sensors, x_idx] = n

    def check(self, tol: float = SIMPLEX_TOL) -> bool:
        for m in range(self.M):
            rows = self.probs[m, : self.n_x[m]]
            if np.any(rows < 0) or np.any(rows > 1 + 1e-12):
                return False
            if np.any(np.abs(rows.sum(axis=1) - 1.0) > tol):
                return False
        return True

    def copy(self) -> "RuleTable":
        out = RuleTable(self.probs.copy(), self.n_x.copy(), self.points.copy(), self.values)
        out.visits = self.visits.copy()
        out.last_seen = self.last_seen.copy()
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["sensor", "x", "q", "prob", "i_x"])
            for m in range(self.M):
                for x in range(self.n_x[m]):
                    xv = x if self.values is None else repr(float(self.values[m][x]))
                    for k in range(self.Q):
                        out.writerow([m, xv, repr(float(self.points[m, k])), repr(float(self.probs[m, x, k])), int(self.visits[m, x])])


def _points_per_sensor(points, M: int) -> np.ndarray:
    if isinstance(points, QuantizationAlphabet):
        return np.broadcast_to(points.points, (M, len(points))).copy()
    if isinstance(points, (list, tuple)) and points and isinstance(points[0], QuantizationAlphabet):
        return np.stack([p.points for p in points])
    return np.broadcast_to(np.asarray(points, dtype=float), (M, np.asarray(points).shape[-1])).copy()


def init_row(x: float, points: np.ndarray, tau: float) -> np.ndarray:
    """``P(q|x)`` proportional to ``exp(-|x - q| / tau)`` with a unique mode.

    If ``x`` is equidistant from two points the larger one keeps the mode.
    """
    d = np.abs(x - points)
    logits = -(d - d.min()) / tau
    row = np.exp(logits)
    row /= row.sum()
    top = np.flatnonzero(d == d.min())
    if top.size > 1:
        # move a sliver of mass so the mode is strict at the larger point
        eps = 1e-9 * row[top[0]]
        row[top[:-1]] -= eps / (top.size - 1)
        row[top[-1]] += eps
    return row


def init_rules(alphabets: Sequence[ObservationAlphabet], points, tau: float | None = None) -> RuleTable:
    """Unimodal initial rules peaked at the nearest quantization point.

    ``tau`` defaults to half the spacing of the quantization points.
    """
    M = len(alphabets)
    pts = _points_per_sensor(points, M)
    if tau is None:
        tau = float(pts[0, 1] - pts[0, 0]) / 2.0
    if not tau > 0:
        raise ConfigurationError(f"tau must be positive, got {tau!r}")
    n_x = [len(a) for a in alphabets]
    probs = np.zeros((M, max(n_x), pts.shape[1]))
    for m, a in enumerate(alphabets):
        for x, v in enumerate(a.values):
            probs[m, x] = init_row(v, pts[m], tau)
    return RuleTable(probs, n_x, pts, [a.values for a in alphabets])


def deterministic_rules(alphabets: Sequence[ObservationAlphabet], points) -> RuleTable:
    """Point-mass rules at the nearest quantization point (ties go up)."""
    M = len(alphabets)
    pts = _points_per_sensor(points, M)
    n_x = [len(a) for a in alphabets]
    probs = np.zeros((M, max(n_x), pts.shape[1]))
    for m, a in enumerate(alphabets):
        for x, v in enumerate(a.values):
            d = np.abs(v - pts[m])
            probs[m, x, np.flatnonzero(d == d.min())[-1]] = 1.0
    return RuleTable(probs, n_x, pts, [a.values for a in alphabets])


def identity_rules(alphabets: Sequence[ObservationAlphabet]) -> RuleTable:
    """Quantization points equal to the observations, each value mapped to itself."""
    M = len(alphabets)
    sizes = {len(a) for a in alphabets}
    if len(sizes) != 1:
        raise ConfigurationError("identity rules need equally sized alphabets")
    X = sizes.pop()
    probs = np.broadcast_to(np.eye(X), (M, X, X)).copy()
    return RuleTable(probs, [X] * M, np.stack([a.values for a in alphabets]), [a.values for a in alphabets])


def sample_output(table: RuleTable, x_idx, rng: np.random.Generator | None = None, u=None) -> np.ndarray:
    """Draw the quantization index of every sensor independently.

    Pass ``u`` (uniforms in [0, 1), one per sensor) to reuse the same
    randomness across several tables.
    """
    rows = table.rows_at(x_idx)
    if u is None:
        if rng is None:
            raise ValueError("need an rng or explicit uniforms")
        u = rng.random(table.M)
    cdf = np.cumsum(rows, axis=1)
    q = (cdf <= np.asarray(u)[:, None]).sum(axis=1)
    # cumulative sums can end a hair below 1
    return np.minimum(q, table.Q - 1).astype(np.int64)


def rule_subgradients_count(S: np.ndarray, w_n, mu: float) -> np.ndarray:
    """All count-kernel rule sub-gradients ``mu * w_n[m] * S[m, q]`` at once."""
    return mu * np.asarray(w_n)[:, None] * S


def rule_subgradient_count(expansion, m: int, q: int, x_m: int, w_n, mu: float) -> float:
    """Sub-gradient of the instantaneous risk w.r.t. ``P_m(q | x_m)``.

    Walks only the atoms whose observation at sensor ``m`` equals ``x_m``.
    """
    if mu == 0.0:
        return 0.0
    ids = expansion.index[m].get(int(x_m), [])
    alphas = expansion.alphas()
    total = 0.0
    for i in ids:
        total += alphas[i] * expansion._w[i, m] * expansion._rows[i, m, q]
    return float(mu * w_n[m] * total)


def rule_subgradient_general(expansion, rows_n, x_idx, w_n, m: int, q: int, mu: float,
                             points=None, max_outcomes: int = 1 << 16) -> float:
    """Enumeration form of the rule sub-gradient for any marginalized kernel.

    Differentiates ``sum_i alpha_i E_{q_i ~ P_i, q_n ~ P_n}[k_w(q_i, q_n)]``
    with respect to the single entry ``P_n[m, q]``: the joint outcomes of
    the current step are restricted to ``q_n[m] == q`` and the probability of
    that coordinate is left out.  Nothing is divided, so zero entries need no
    special casing.  Count kernels keep the equal-observation gate.

    The other sensors' kernel terms stay in the sum, so for the count kernel
    this exceeds ``rule_subgradients_count`` by ``mu`` times the margin share
    of the other sensors, a shift that is the same for every ``q`` of sensor
    ``m`` and so leaves the step along the simplex unchanged.
    """
    if mu == 0.0 or len(expansion) == 0:
        return 0.0
    rows_n = [np.asarray(r, dtype=float) for r in rows_n]
    M = len(rows_n)
    kind = expansion.kind
    pts = expansion.points if points is None else np.broadcast_to(np.asarray(points, float), (M, rows_n[0].size))
    # outcomes of the other sensors, with sensor m pinned to q
    pinned = [r if k != m else np.eye(r.size)[q] for k, r in enumerate(rows_n)]
    outcomes_n = list(joint_outcomes(pinned))
    alphas = expansion.alphas()
    w_n = np.asarray(w_n, dtype=float)
    total = 0.0
    for i in range(len(expansion)):
        rows_i = list(expansion._rows[i])
        ww = expansion._w[i] * w_n
        if kind == "count":
            gate = (expansion._xs[i] == np.asarray(x_idx)).astype(float)
            coeff = ww * gate
        else:
            coeff = ww
        size = int(np.prod([r.size for r in rows_i])) * len(outcomes_n)
        if size > max_outcomes:
            raise ConfigurationError(f"{size} joint outcomes exceed the enumeration cap {max_outcomes}")
        acc = 0.0
        for qi, pi in joint_outcomes(rows_i):
            if pi == 0.0:
                continue
            for qn, pn in outcomes_n:
                if pn == 0.0:
                    continue
                if kind == "count":
                    k = sum(coeff[s] for s in range(M) if qi[s] == qn[s])
                else:
                    k = sum(coeff[s] * pts[s, qi[s]] * pts[s, qn[s]] for s in range(M))
                acc += pi * pn * k
        total += alphas[i] * acc
    return float(mu * total)


def select_target_point(subgrads) -> int:
    """Index of the largest |sub-gradient|; the first one wins ties."""
    g = np.asarray(subgrads, dtype=float)
    if g.size == 0:
        raise ValueError("no quantization points")
    return int(np.argmax(np.abs(g)))


def update_rule(table: RuleTable, m: int, x: int, target: int, subgrad: float, eta_p: float) -> np.ndarray:
    """Move mass of row ``(m, x)`` toward ``target`` when its sub-gradient is negative.

    The row keeps summing to one: ``(1 - eta_p) * 1 + eta_p``.
    """
    if not 0.0 <= eta_p <= 1.0:
        raise ConfigurationError(f"eta_p must lie in [0, 1], got {eta_p!r}")
    row = table.probs[m, x]
    if subgrad < 0.0:
        row *= 1.0 - eta_p
        row[target] += eta_p
    return row


def determinization_gap(table: RuleTable) -> np.ndarray:
    """``1 - max_q P(q|x)`` per row; padded rows are NaN."""
    gap = 1.0 - table.probs.max(axis=2)
    for m in range(table.M):
        gap[m, table.n_x[m]:] = np.nan
    return gap


def mean_determinization_gap(table: RuleTable) -> float:
    return float(np.nanmean(determinization_gap(table)))
