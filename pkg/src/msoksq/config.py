"""Experiment configuration files.

A config file holds ``key = value`` lines; ``#`` starts a comment.  Keys::

    preset = fig4                 # optional, see experiments.PRESETS
    seeds = 0-9                   # "0-9", "0,3,7" or a single seed
    trainer.<field> = value       # any TrainerConfig field
    stream.source = synthetic     # synthetic | iris
    stream.c1 = 0.1
    stream.alphabet_size = 20
    stream.iris_path = path.csv
    stream.standardize = true
    output.dir = runs
    output.svg = false
    output.workers = 1

Everything left out takes its default.  With a preset the structural keys
(sensor count, selection target, bits, variant, data source) are fixed by
the preset and setting them is an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigurationError
from .trainer import TrainerConfig

STREAM_KEYS = {"source": str, "c1": float, "alphabet_size": int, "iris_path": str, "standardize": bool}
OUTPUT_KEYS = {"dir": str, "svg": bool, "workers": int}
PRESET_FIXED = ("M", "M_prime", "bits", "variant")
PRESET_FIXED_STREAM = ("source",)

_TRAINER_TYPES = {
    "eta1": float, "eta_p": float, "eta_w": float, "lambda1": float, "rho": float, "M": int,
    "M_prime": int, "N": int, "bits": int, "A": float, "tau": float, "kernel": str, "loss": str,
    "seed": int, "variant": str, "strict_eq39": bool, "predict_with_indicator": bool,
    "ova_shared_rules": bool, "w_zero_tol": float,
}


@dataclass
class ExperimentConfig:
    preset: str | None = None
    trainer: dict = field(default_factory=dict)
    stream: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    out: str = "runs"
    svg: bool = False
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        unknown = set(self.trainer) - set(_TRAINER_TYPES)
        if unknown:
            raise ConfigurationError(f"unknown trainer keys: {sorted(unknown)}")
        unknown = set(self.stream) - set(STREAM_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown stream keys: {sorted(unknown)}")
        if "seed" in self.trainer:
            raise ConfigurationError("set seeds with the top-level 'seeds' key")
        if self.preset is not None:
            from .experiments import PRESETS

            if self.preset not in PRESETS:
                raise ConfigurationError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
            clash = [k for k in PRESET_FIXED if k in self.trainer]
            clash += [f"stream.{k}" for k in PRESET_FIXED_STREAM if k in self.stream]
            if clash:
                raise ConfigurationError(f"preset {self.preset!r} fixes {', '.join(clash)}; drop the explicit value")
        else:
            self.trainer_config(self.seeds[0] if self.seeds else 0)
        if not self.seeds:
            raise ConfigurationError("need at least one seed")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        return self

    def trainer_config(self, seed: int, **arm) -> TrainerConfig:
        kw = dict(arm)
        kw.update(self.trainer)
        kw["seed"] = seed
        return TrainerConfig(**kw)


def parse_seeds(text: str) -> list[int]:
    text = text.strip()
    try:
        if "," in text:
            return [int(t) for t in text.split(",") if t.strip()]
        if "-" in text[1:]:
            lo, hi = text.split("-", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(text)]
    except ValueError:
        raise ConfigurationError(f"bad seed list {text!r}") from None


def _convert(raw: str, kind, key: str, lineno: int):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if raw.lower() == "none":
            return None
        if kind is str:
            return raw
        return kind(raw)
    except ValueError:
        raise ConfigurationError(f"line {lineno}: bad value {raw!r} for {key}") from None


def parse_text(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in seen:
            raise ConfigurationError(f"line {lineno}: {key} already set on line {seen[key]}")
        seen[key] = lineno
        if key == "preset":
            cfg.preset = value or None
        elif key == "seeds":
            cfg.seeds = parse_seeds(value)
        elif key.startswith("trainer."):
            name = key[len("trainer."):]
            if name not in _TRAINER_TYPES:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
            cfg.trainer[name] = _convert(value, _TRAINER_TYPES[name], key, lineno)
        elif key.startswith("stream."):
            name = key[len("stream."):]
            if name not in STREAM_KEYS:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
            cfg.stream[name] = _convert(value, STREAM_KEYS[name], key, lineno)
        elif key.startswith("output."):
            name = key[len("output."):]
            if name not in OUTPUT_KEYS:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
            setattr(cfg, "out" if name == "dir" else name, _convert(value, OUTPUT_KEYS[name], key, lineno))
        else:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
    try:
        return cfg.validate()
    except ConfigurationError as exc:
        raise ConfigurationError(f"invalid configuration: {exc}") from None


def parse_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_text(text)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit(cfg: ExperimentConfig) -> str:
    """Config text that parses back to an equal ``ExperimentConfig``."""
    lines = []
    if cfg.preset is not None:
        lines.append(f"preset = {cfg.preset}")
    lines.append("seeds = " + ",".join(str(s) for s in cfg.seeds) + ("," if len(cfg.seeds) == 1 else ""))
    for k in sorted(cfg.trainer):
        lines.append(f"trainer.{k} = {_fmt(cfg.trainer[k])}")
    for k in sorted(cfg.stream):
        lines.append(f"stream.{k} = {_fmt(cfg.stream[k])}")
    lines.append(f"output.dir = {cfg.out}")
    lines.append(f"output.svg = {_fmt(cfg.svg)}")
    lines.append(f"output.workers = {cfg.workers}")
    return "\n".join(lines) + "\n"


def trainer_defaults() -> dict:
    return {f.name: f.default for f in fields(TrainerConfig)}
