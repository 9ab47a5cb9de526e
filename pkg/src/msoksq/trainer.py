"""Online training loop, baselines, one-versus-all wrapper, risk and accuracy tracking.

One step at time ``n`` (sample ``x_n, y_n``):

1. forward ``q_n`` drawn from the current rules and score it with ``f_n``,
   ``w_n`` (prequential accuracy);
2. training margin and loss sub-gradient ``mu_n`` with the current rules;
3. per-sensor rule update of the observed rows;
4. loss sub-gradient ``nu_n`` on the updated rules, L1 strength and weight
   update;
5. decay of the expansion and a new atom holding the updated rules and
   weights.

Every quantity of steps 2-5 is read off one matrix ``S`` (see
``Expansion.matched_mass``), so a step costs one pass over the matching atoms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import (
    RNG_QUANTIZER,
    RNG_SELECTION,
    ObservationAlphabet,
    Sample,
    build_quantization_points,
    seeded_rng,
)
from .errors import ConfigurationError
from .expansion import EtaSchedule, Expansion
from .kernels import joint_outcomes
from .loss import make_loss
from .quantizer import (
    RuleTable,
    deterministic_rules,
    identity_rules,
    init_rules,
    mean_determinization_gap,
    sample_output,
    update_rule,
)
from .selection import (
    SelectionTrace,
    WeightVector,
    lambda2_schedule,
    random_selection_baseline,
    update_weights,
    weight_gradients,
    weight_subgradient,
)

VARIANTS = ("full", "no_w", "no_P_no_w", "deterministic_quantizer", "norma", "random_selection")

# sgn(0) counts as the positive class
SIGN_OF_ZERO = 1


def sgn(v: float) -> int:
    return 1 if v >= 0 else -1


@dataclass
class TrainerConfig:
    eta1: float = 0.1
    eta_p: float = 0.1
    eta_w: float = 0.5
    lambda1: float = 0.1
    rho: float = 1.0
    M: int = 10
    M_prime: int | None = None
    N: int = 600
    bits: int = 3
    A: float = 1.0
    tau: float | None = None
    kernel: str = "count"
    loss: str = "hinge"
    seed: int = 0
    variant: str = "full"
    strict_eq39: bool = False
    predict_with_indicator: bool = False
    ova_shared_rules: bool = False
    w_zero_tol: float = 1e-3

    def __post_init__(self) -> None:
        if self.M_prime is None:
            self.M_prime = self.M
        self.validate()

    def validate(self) -> None:
        for name in ("eta1", "eta_w", "lambda1", "rho", "A"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 <= self.eta_p <= 1:
            raise ConfigurationError(f"eta_p must lie in [0, 1], got {self.eta_p!r}")
        if self.M < 1 or self.N < 1:
            raise ConfigurationError("M and N must be at least 1")
        if not 1 <= self.M_prime <= self.M:
            raise ConfigurationError(f"need 1 <= M' <= M, got M'={self.M_prime}, M={self.M}")
        if not 0 <= self.w_zero_tol < 1:
            raise ConfigurationError("w_zero_tol must lie in [0, 1)")
        if self.bits < 1:
            raise ConfigurationError("bits must be at least 1")
        if self.tau is not None and not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        if self.kernel not in ("count", "linear"):
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.variant == "norma" and self.kernel != "count":
            raise ConfigurationError("the norma variant uses the count kernel")
        make_loss(self.loss, self.rho)
        EtaSchedule(self.eta1).check(self.lambda1)

    @property
    def updates_rules(self) -> bool:
        return self.variant in ("full", "no_w", "random_selection")

    @property
    def updates_weights(self) -> bool:
        return self.variant in ("full", "random_selection")

    def replace(self, **changes) -> "TrainerConfig":
        d = asdict(self)
        d.update(changes)
        return TrainerConfig(**d)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class RiskTrace:
    """Per-step records of one learner."""

    steps: list = field(default_factory=list)
    decision: list = field(default_factory=list)
    correct: list = field(default_factory=list)
    acr: list = field(default_factory=list)
    risk: list = field(default_factory=list)
    r_avg: list = field(default_factory=list)
    margin: list = field(default_factory=list)
    hinge_active: list = field(default_factory=list)
    nonzero_w: list = field(default_factory=list)
    gap_mean: list = field(default_factory=list)
    lambda2: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    _hits: int = 0
    _risk_sum: float = 0.0

    def __len__(self) -> int:
        return len(self.steps)

    def append(self, n, decision, y, risk, margin, active, nonzero, gap, lam) -> None:
        ok = sgn(decision) == y
        self._hits += ok
        self._risk_sum += risk
        self.steps.append(n)
        self.decision.append(decision)
        self.labels.append(y)
        self.correct.append(ok)
        self.acr.append(self._hits / len(self.steps))
        self.risk.append(risk)
        self.r_avg.append(self._risk_sum / len(self.steps))
        self.margin.append(margin)
        self.hinge_active.append(active)
        self.nonzero_w.append(nonzero)
        self.gap_mean.append(gap)
        self.lambda2.append(lam)

    def write_csv(self, path: str | Path) -> None:
        write_trace_csv(path, self)


TRACE_COLUMNS = ["step", "acr", "risk", "r_avg", "margin", "hinge_active", "nonzero_w", "determinization_gap_mean"]


def write_trace_csv(path: str | Path, trace: RiskTrace, acr: Sequence[float] | None = None) -> None:
    acr = trace.acr if acr is None else acr
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TRACE_COLUMNS)
        for k in range(len(trace)):
            out.writerow([
                trace.steps[k], repr(float(acr[k])), repr(float(trace.risk[k])), repr(float(trace.r_avg[k])),
                repr(float(trace.margin[k])), int(trace.hinge_active[k]), trace.nonzero_w[k],
                repr(float(trace.gap_mean[k])),
            ])


def build_rules(config: TrainerConfig, alphabets: Sequence[ObservationAlphabet]) -> RuleTable:
    if config.variant == "norma":
        return identity_rules(alphabets)
    points = build_quantization_points(config.bits, config.A)
    for m, a in enumerate(alphabets):
        if len(points) > len(a):
            raise ConfigurationError(f"sensor {m}: {len(points)} quantization points exceed {len(a)} observations")
    if config.variant == "deterministic_quantizer":
        return deterministic_rules(alphabets, points)
    return init_rules(alphabets, points, config.tau)


class Learner:
    """State of one decision function with its rules, weights and expansion.

    ``hooks`` receive ``(event, n)`` with event in ``"P"``, ``"w"``, ``"f"``
    in the order the updates are applied.
    """

    def __init__(self, config: TrainerConfig, alphabets: Sequence[ObservationAlphabet],
                 rules: RuleTable | None = None, owns_rules: bool = True):
        if len(alphabets) != config.M:
            raise ConfigurationError(f"{len(alphabets)} alphabets for M={config.M} sensors")
        self.config = config
        self.table = rules if rules is not None else build_rules(config, alphabets)
        self.owns_rules = owns_rules
        self.loss = make_loss(config.loss, config.rho)
        self.eta = EtaSchedule(config.eta1)
        self.expansion = Expansion(config.M, self.table.Q, int(self.table.n_x.max()), config.kernel,
                                   self.table.points if config.kernel == "linear" else None)
        target = config.M_prime if config.variant in ("full", "random_selection") else config.M
        self.weights = WeightVector.ones(config.M, target)
        self._selection_rng = seeded_rng(config.seed, RNG_SELECTION)
        if config.variant == "random_selection" and self.weights.frozen:
            random_selection_baseline(self.weights, config.M_prime, self._selection_rng)
        self.n = 0
        self.norm_sq = 0.0
        self.trace = RiskTrace()
        self.selection = SelectionTrace()
        self.hooks: list[Callable[[str, int], None]] = []

    def _emit(self, event: str) -> None:
        for h in self.hooks:
            h(event, self.n)

    def predict(self, q_idx, x_idx=None) -> float:
        gate = x_idx if self.config.predict_with_indicator else None
        return self.expansion.evaluate_on_quantized(q_idx, self.weights.w, gate)

    def step(self, sample: Sample, y: int, u) -> float:
        """Process one sample with binary label ``y``; ``u`` are the quantizer uniforms."""
        cfg = self.config
        self.n += 1
        n = self.n
        x_idx = sample.x_idx
        w_n = self.weights.w.copy()
        rows = self.table.rows_at(x_idx)

        q = sample_output(self.table, x_idx, u=u)
        decision = self.predict(q, x_idx)
        if self.owns_rules:
            self.table.observe(x_idx, n)

        S = self.expansion.matched_mass(x_idx)
        margin = float(w_n @ np.einsum("mq,mq->m", S, rows))
        mu = self.loss.subgradient(margin, y)

        if cfg.updates_rules and mu != 0.0:
            g = mu * w_n[:, None] * S
            for m in range(cfg.M):
                t = int(np.argmax(np.abs(g[m])))
                if g[m, t] < 0.0:
                    update_rule(self.table, m, int(x_idx[m]), t, g[m, t], cfg.eta_p)
            new_rows = self.table.rows_at(x_idx)
        else:
            new_rows = rows
        self._emit("P")

        G = weight_gradients(S, new_rows)
        margin_new = float(w_n @ G)
        nu = self.loss.subgradient(margin_new, y)
        lam = 0.0
        if cfg.updates_weights and not self.weights.frozen and (nu != 0.0 or cfg.strict_eq39):
            lam = lambda2_schedule(self.weights.w, G, nu)
            update_weights(self.weights, weight_subgradient(G, nu, lam), cfg.eta_w, cfg.w_zero_tol)
            if cfg.variant == "random_selection" and self.weights.frozen:
                # same trajectory as the optimized run up to here; the final
                # weights are then handed to randomly chosen sensors
                random_selection_baseline(self.weights, cfg.M_prime, self._selection_rng)
            self.selection.record(n, lam, self.weights.w)
        self._emit("w")

        risk = self.loss.value(margin, y) + 0.5 * cfg.lambda1 * self.norm_sq + lam * float(w_n.sum())

        eta_n = self.eta(n)
        shrink = 1.0 - eta_n * cfg.lambda1
        w_next = self.weights.w
        self.expansion.decay(shrink)
        alpha = -eta_n * nu
        if alpha != 0.0:
            cross = float(w_next @ np.einsum("mq,mq->m", S, new_rows))
            self_k = self.expansion.self_kernel(new_rows, w_next)
            self.norm_sq = shrink * shrink * self.norm_sq + 2.0 * shrink * alpha * cross + alpha * alpha * self_k
            self.expansion.append(n, y, x_idx, new_rows, w_next, alpha)
        else:
            self.norm_sq *= shrink * shrink
        self._emit("f")

        active = y * margin <= cfg.rho
        self.trace.append(n, decision, y, risk, margin, active, self.weights.nonzero(),
                          mean_determinization_gap(self.table), lam)
        return decision


def acr_binary(trace_or_decisions, labels=None) -> float:
    """Fraction of steps whose decision sign matches the label."""
    if labels is None:
        decisions, labels = trace_or_decisions.decision, trace_or_decisions.labels
    else:
        decisions = trace_or_decisions
    if len(decisions) == 0:
        return 0.0
    return float(np.mean([sgn(d) == y for d, y in zip(decisions, labels)]))


def acr_curve(decisions, labels) -> np.ndarray:
    ok = np.array([sgn(d) == y for d, y in zip(decisions, labels)], dtype=float)
    return np.cumsum(ok) / np.arange(1, ok.size + 1)


def multiclass_curve(trace1: RiskTrace, trace2: RiskTrace) -> np.ndarray:
    ok = np.array([sgn(a) == y1 and sgn(b) == y2 for a, b, y1, y2 in
                   zip(trace1.decision, trace2.decision, trace1.labels, trace2.labels)], dtype=float)
    return np.cumsum(ok) / np.arange(1, ok.size + 1)


def acr_multiclass(trace1: RiskTrace, trace2: RiskTrace) -> float:
    """Fraction of steps where both one-versus-all decisions have the right sign."""
    if len(trace1) != len(trace2):
        raise ValueError("traces differ in length")
    if len(trace1) == 0:
        return 0.0
    return float(multiclass_curve(trace1, trace2)[-1])


@dataclass
class RunResult:
    learners: list
    acr: np.ndarray
    samples: list

    @property
    def trace(self) -> RiskTrace:
        return self.learners[0].trace

    @property
    def learner(self) -> Learner:
        return self.learners[0]

    def final_acr(self) -> float:
        return float(self.acr[-1])


def _check_classes(alphabets: Sequence[ObservationAlphabet]) -> tuple:
    classes = alphabets[0].classes
    if len(classes) < 2:
        raise ConfigurationError("the stream needs at least two classes")
    return classes


def run(config: TrainerConfig, stream, alphabets: Sequence[ObservationAlphabet] | None = None,
        tracker: Callable | None = None) -> RunResult:
    """Train on ``config.N`` samples of ``stream``.

    Binary streams (integer labels) drive one learner; label pairs drive
    two one-versus-all learners fed the same samples and quantizer
    randomness.  ``tracker(learner, sample)`` is called on the first
    learner after each step.
    """
    alphabets = stream.alphabets if alphabets is None else alphabets
    classes = _check_classes(alphabets)
    ova = isinstance(classes[0], tuple)
    rng = seeded_rng(config.seed, RNG_QUANTIZER)
    if not ova:
        learners = [Learner(config, alphabets)]
    elif config.ova_shared_rules:
        first = Learner(config, alphabets)
        learners = [first, Learner(config, alphabets, rules=first.table, owns_rules=False)]
    else:
        learners = [Learner(config, alphabets), Learner(config, alphabets)]
    samples = []
    for _ in range(config.N):
        s = stream.next()
        samples.append(s)
        u = rng.random(config.M)
        if ova:
            for k, lr in enumerate(learners):
                lr.step(s, s.y[k], u)
        else:
            learners[0].step(s, s.y, u)
        if tracker is not None:
            tracker(learners[0], s)
    if ova:
        curve = multiclass_curve(learners[0].trace, learners[1].trace)
    else:
        curve = np.asarray(learners[0].trace.acr)
    return RunResult(learners, curve, samples)


def ova_run(config: TrainerConfig, stream, alphabets=None) -> RunResult:
    return run(config, stream, alphabets)


def batch_risk_diagnostic(learner: Learner, samples: Sequence[Sample], lambda2: float = 0.0, k: int = 0) -> float:
    """Regularized batch risk of the frozen final solution on ``samples``.

    ``k`` selects the label component for label pairs.  The L1 strength is
    a fixed input here; the online schedule has no batch counterpart.
    """
    if not samples:
        raise ValueError("need at least one sample")
    w = learner.weights.w
    total = 0.0
    for s in samples:
        y = s.y[k] if isinstance(s.y, tuple) else s.y
        rows = learner.table.rows_at(s.x_idx)
        S = learner.expansion.matched_mass(s.x_idx)
        total += learner.loss.value(float(w @ np.einsum("mq,mq->m", S, rows)), y)
    return total / len(samples) + 0.5 * learner.config.lambda1 * learner.expansion.norm_squared() + lambda2 * float(w.sum())


def expected_loss_bruteforce(learner: Learner, samples: Sequence[Sample], k: int = 0, max_outcomes: int = 1 << 16) -> float:
    """Mean over samples of the loss averaged over the forwarded quantization vector.

    The score of an outcome ``q`` is ``sum_i alpha_i sum_m w_i w g_m P_i(q_m|x_i)``
    with the same equal-observation gate ``g_m`` as the training margin, so
    by convexity the result is never below the batch loss term and equals it
    for deterministic rules.
    """
    exp = learner.expansion
    alphas = exp.alphas()
    w = learner.weights.w
    total = 0.0
    for s in samples:
        y = s.y[k] if isinstance(s.y, tuple) else s.y
        rows = list(learner.table.rows_at(s.x_idx))
        if int(np.prod([r.size for r in rows])) > max_outcomes:
            raise ConfigurationError("too many joint outcomes to enumerate")
        acc = 0.0
        for q, p in joint_outcomes(rows):
            if p == 0.0:
                continue
            v = 0.0
            for i in range(len(exp)):
                gate = exp._xs[i] == s.x_idx
                v += alphas[i] * float(np.sum(exp._w[i] * w * gate * exp._rows[i, np.arange(len(q)), list(q)]))
            acc += p * learner.loss.value(v, y)
        total += acc
    return total / len(samples)


def risk_gap(result: RunResult, k: int = 0) -> float:
    lr = result.learners[k]
    return abs(lr.trace.r_avg[-1] - batch_risk_diagnostic(lr, result.samples, k=k))


def is_hinge_active_throughout(trace: RiskTrace) -> bool:
    """Whether every margin stayed at or below ``rho`` (no inactive step)."""
    return bool(all(trace.hinge_active))


def naive_coefficients(times: Sequence[int], alphas0: Sequence[float], n_now: int, eta1: float, lambda1: float) -> np.ndarray:
    """Coefficients by the direct product of decay factors (reference for the lazy scale)."""
    out = []
    for t, a in zip(times, alphas0):
        c = a
        for j in range(t + 1, n_now + 1):
            c *= 1.0 - eta1 / math.sqrt(j) * lambda1
        out.append(c)
    return np.array(out)
