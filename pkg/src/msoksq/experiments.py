"""Experiment presets, seed fan-out and CSV/SVG outputs.

A preset is a list of arms; each arm is one labelled trainer/stream setting
that is run once per seed.  Outputs under ``<out>/<name>/``:

* ``<arm>/seed<k>.csv``   per-seed trace (multi-class accuracy for label pairs)
* ``aggregate.csv``       mean and std of ACR(n) across seeds per arm
* ``summary.csv``         final ACR mean and std per arm
* ``effective-config``    config text that reproduces the run
* ``acr.svg``             optional line plot
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, emit
from .data import StreamConfig, build_alphabets, make_stream
from .errors import ConfigurationError
from .trainer import TRACE_COLUMNS, RunResult, run, write_trace_csv

FIG6_TRACKED_VALUE = 0.4329


@dataclass(frozen=True)
class Arm:
    label: str
    trainer: dict
    stream: dict = field(default_factory=dict)


SYNTH = {"source": "synthetic", "c1": 0.1, "alphabet_size": 20}
IRIS = {"source": "iris"}
# the presets start from a diffuse prior (tau = A) so rule learning has room to act
SYNTH_T = {"A": 1.0, "tau": 1.0}
IRIS_T = {"A": 2.0, "tau": 2.0}


def _arms_fig4() -> list[Arm]:
    arms = []
    for M in (1, 5, 10):
        for v in ("no_w", "no_P_no_w"):
            arms.append(Arm(f"{v}_M{M}", dict(SYNTH_T, M=M, bits=3, variant=v), SYNTH))
    arms.append(Arm("norma_M10", dict(SYNTH_T, M=10, bits=3, variant="norma"), SYNTH))
    arms.append(Arm("det1bit_M10", dict(SYNTH_T, M=10, bits=1, variant="deterministic_quantizer"), SYNTH))
    return arms


def _selection_arms(base: dict, stream: dict, bits: int, det_bits: int) -> list[Arm]:
    arms = []
    for Mp in (1, 5, 10):
        for v, tag in (("full", "optimal"), ("random_selection", "random")):
            arms.append(Arm(f"{tag}_Mp{Mp}", dict(base, M=11, M_prime=Mp, bits=bits, variant=v), stream))
    arms.append(Arm("norma_M11", dict(base, M=11, bits=bits, variant="norma"), stream))
    arms.append(Arm(f"det{det_bits}bit_M11", dict(base, M=11, bits=det_bits, variant="deterministic_quantizer"), stream))
    return arms


def _arms_fig5() -> list[Arm]:
    return _selection_arms(SYNTH_T, SYNTH, 3, 2)


def _arms_fig6() -> list[Arm]:
    return [Arm("no_w_1bit_M11", dict(SYNTH_T, M=11, bits=1, variant="no_w"), SYNTH)]


def _arms_fig7() -> list[Arm]:
    arms = []
    for bits in (1, 2):
        for Mp in (1, 5, 10):
            arms.append(Arm(f"{bits}bit_Mp{Mp}", dict(IRIS_T, M=11, M_prime=Mp, bits=bits, variant="full"), IRIS))
    arms.append(Arm("norma_M11", dict(IRIS_T, M=11, bits=2, variant="norma"), IRIS))
    arms.append(Arm("det1bit_M11", dict(IRIS_T, M=11, bits=1, variant="deterministic_quantizer"), IRIS))
    return arms


def _arms_fig8() -> list[Arm]:
    return _selection_arms(IRIS_T, IRIS, 2, 2)


def _arms_fig9() -> list[Arm]:
    arms = []
    for M in (1, 5, 10):
        for v in ("no_w", "no_P_no_w"):
            arms.append(Arm(f"{v}_M{M}", dict(IRIS_T, M=M, bits=2, variant=v), IRIS))
    arms.append(Arm("norma_M11", dict(IRIS_T, M=11, bits=2, variant="norma"), IRIS))
    arms.append(Arm("det3bit_M11", dict(IRIS_T, M=11, bits=3, variant="deterministic_quantizer"), IRIS))
    return arms


PRESETS = {
    "fig4": _arms_fig4,
    "fig5": _arms_fig5,
    "fig6": _arms_fig6,
    "fig7": _arms_fig7,
    "fig8": _arms_fig8,
    "fig9": _arms_fig9,
}


def preset_arms(name: str) -> list[Arm]:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def config_arms(cfg: ExperimentConfig) -> list[Arm]:
    if cfg.preset is not None:
        return preset_arms(cfg.preset)
    variant = cfg.trainer.get("variant", "full")
    return [Arm(variant, {}, {})]


def make_run(arm: Arm, cfg: ExperimentConfig, seed: int):
    """Trainer config and stream of one (arm, seed) pair."""
    tc = cfg.trainer_config(seed, **arm.trainer)
    sk = dict(arm.stream)
    sk.update(cfg.stream)
    sc = StreamConfig(M=tc.M, N=tc.N, seed=seed, **sk)
    alphabets = build_alphabets(sc)
    return tc, make_stream(sc, alphabets), alphabets


def run_arm_seed(arm: Arm, cfg: ExperimentConfig, seed: int, track_value: float | None = None) -> dict:
    tc, stream, alphabets = make_run(arm, cfg, seed)
    tracker = None
    if track_value is not None:
        tracker = RuleTracker(alphabets[0].values, track_value)
    result = run(tc, stream, alphabets, tracker=tracker)
    out = {"result": result, "acr": result.acr}
    if tracker is not None:
        out["tracked"] = tracker
    return out


class RuleTracker:
    """Records ``P_0(q = top point | x*)`` for the sensor-0 value ``x*`` nearest a target."""

    def __init__(self, values, target: float):
        self.x = int(np.argmin(np.abs(np.asarray(values) - target)))
        self.value = float(values[self.x])
        self.rows: list[tuple[int, int, float]] = []

    def __call__(self, learner, sample) -> None:
        if int(sample.x_idx[0]) == self.x:
            row = learner.table.probs[0, self.x]
            self.rows.append((int(learner.table.visits[0, self.x]), learner.n, float(row[-1])))


def _job(args):
    arm, cfg, seed, track = args
    res = run_arm_seed(arm, cfg, seed, track)
    r: RunResult = res["result"]
    # ship only what the parent writes out
    return {
        "acr": r.acr,
        "trace": r.trace,
        "tracked": res.get("tracked"),
        "rules": r.learner.table if track is not None else None,
    }


def run_experiment(cfg: ExperimentConfig, name: str | None = None) -> Path:
    """Run every (arm, seed) pair and write the outputs; returns the output directory."""
    name = name or cfg.preset or "custom"
    arms = config_arms(cfg)
    outdir = Path(cfg.out) / name
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        probe = outdir / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigurationError(f"output directory {outdir} is not writable: {exc}") from None
    track = FIG6_TRACKED_VALUE if cfg.preset == "fig6" else None
    jobs = [(arm, cfg, seed, track) for arm in arms for seed in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, os.cpu_count() or 1, len(jobs))) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]

    (outdir / "effective-config").write_text(emit(cfg))
    curves: dict[str, list[np.ndarray]] = {}
    for (arm, _, seed, _), res in zip(jobs, results):
        d = outdir / arm.label
        d.mkdir(exist_ok=True)
        write_trace_csv(d / f"seed{seed}.csv", res["trace"], res["acr"])
        curves.setdefault(arm.label, []).append(np.asarray(res["acr"]))
        if res["tracked"] is not None:
            _write_tracked(d / f"rule_trajectory_seed{seed}.csv", res["tracked"])
            res["rules"].write_csv(d / f"rules_seed{seed}.csv")
    write_aggregate(outdir, curves)
    if cfg.svg:
        write_svg(outdir / "acr.svg", curves, name)
    return outdir


def _write_tracked(path: Path, tracker: RuleTracker) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["i_x", "step", "x", "prob_top_point"])
        for i_x, n, p in tracker.rows:
            out.writerow([i_x, n, repr(tracker.value), repr(p)])


def write_aggregate(outdir: Path, curves: dict[str, list[np.ndarray]]) -> None:
    with open(outdir / "aggregate.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["arm", "step", "acr_mean", "acr_std", "n_seeds"])
        for label, cs in curves.items():
            arr = np.vstack(cs)
            mean, std = arr.mean(axis=0), arr.std(axis=0)
            for k in range(arr.shape[1]):
                out.writerow([label, k + 1, repr(float(mean[k])), repr(float(std[k])), arr.shape[0]])
    with open(outdir / "summary.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["arm", "final_acr_mean", "final_acr_std", "n_seeds"])
        for label, cs in curves.items():
            final = np.array([c[-1] for c in cs])
            out.writerow([label, repr(float(final.mean())), repr(float(final.std())), final.size])


def write_svg(path: Path, curves: dict[str, list[np.ndarray]], title: str) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigurationError("SVG output needs matplotlib (pip install msoksq[plot])") from None
    # fixed hash salt keeps the SVG byte-stable between runs
    matplotlib.rcParams["svg.hashsalt"] = "msoksq"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, cs in curves.items():
        mean = np.vstack(cs).mean(axis=0)
        ax.plot(np.arange(1, mean.size + 1), mean, label=label, linewidth=1.2)
    ax.set_xlabel("time step n")
    ax.set_ylabel("ACR(n)")
    ax.set_title(title)
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def summarize(outdir: Path) -> list[dict]:
    with open(Path(outdir) / "summary.csv") as fh:
        return list(csv.DictReader(fh))


__all__ = ["PRESETS", "Arm", "preset_arms", "run_experiment", "run_arm_seed", "make_run", "TRACE_COLUMNS"]
