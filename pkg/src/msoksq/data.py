"""Observation and quantization alphabets, labelled sample streams, data sources.

Each sensor observes values from a finite alphabet.  An alphabet remembers
which values belong to which class so that a stream can draw one label per
time step and let every sensor observe a value of that class.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, DataError

BINARY_CLASSES: tuple[int, ...] = (-1, 1)

# One-versus-all label pairs for the three Iris species.
IRIS_LABELS: dict[str, tuple[int, int]] = {
    "Iris-setosa": (-1, 1),
    "Iris-versicolor": (1, -1),
    "Iris-virginica": (1, 1),
}
_IRIS_ALIASES = {name.split("-", 1)[1]: name for name in IRIS_LABELS}

# Independent RNG sub-streams derived from one experiment seed.
RNG_ALPHABET = 0
RNG_STREAM = 1
RNG_QUANTIZER = 2
RNG_SELECTION = 3


def seeded_rng(seed: int, purpose: int) -> np.random.Generator:
    """Generator for one purpose; different purposes never share draws."""
    return np.random.default_rng([int(seed), int(purpose)])


@dataclass(frozen=True)
class QuantizationAlphabet:
    """Uniform symmetric quantization points of a ``bits``-bit scalar quantizer."""

    points: np.ndarray
    bits: int

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ConfigurationError("need at least two quantization points")
        if pts.size != 2 ** self.bits:
            raise ConfigurationError(f"{pts.size} points do not match {self.bits} bits")
        if np.any(np.diff(pts) <= 0):
            raise ConfigurationError("quantization points must be strictly increasing")
        if not np.allclose(pts, -pts[::-1], rtol=0, atol=1e-12):
            raise ConfigurationError("quantization points must be symmetric about 0")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size


def build_quantization_points(bits: int, A: float) -> QuantizationAlphabet:
    """Midpoints of ``2**bits`` equal cells partitioning ``[-A, A]``."""
    if int(bits) != bits or bits < 1:
        raise ConfigurationError(f"bits must be a positive integer, got {bits!r}")
    if not A > 0:
        raise ConfigurationError(f"A must be positive, got {A!r}")
    size = 2 ** int(bits)
    d = np.arange(size)
    return QuantizationAlphabet((2 * d + 1 - size) * float(A) / size, int(bits))


@dataclass(frozen=True)
class ObservationAlphabet:
    """Finite observation set of one sensor.

    ``values`` holds the distinct observations in increasing order.
    ``members[k]`` lists indices into ``values`` that class ``classes[k]``
    can produce; repeated indices weight a value by its multiplicity.
    """

    values: np.ndarray
    members: tuple[np.ndarray, ...]
    classes: tuple = BINARY_CLASSES

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ConfigurationError("alphabet must contain at least one value")
        if np.any(np.diff(vals) <= 0):
            raise ConfigurationError("alphabet values must be distinct and sorted")
        if len(self.members) != len(self.classes):
            raise ConfigurationError("one member list per class required")
        members = tuple(np.asarray(m, dtype=np.int64) for m in self.members)
        for m in members:
            if m.size == 0 or m.min() < 0 or m.max() >= vals.size:
                raise ConfigurationError("class member indices out of range or empty")
            m.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return self.values.size

    def index_of(self, x: float) -> int:
        i = int(np.searchsorted(self.values, x))
        if i >= self.values.size or self.values[i] != x:
            raise DataError(f"value {x!r} is not in the alphabet")
        return i

    def class_values(self, k: int) -> np.ndarray:
        return self.values[self.members[k]]

    @classmethod
    def from_class_values(cls, per_class: Sequence[Sequence[float]], classes: Sequence) -> "ObservationAlphabet":
        values = np.unique(np.concatenate([np.asarray(v, dtype=float) for v in per_class]))
        members = tuple(np.searchsorted(values, np.asarray(v, dtype=float)) for v in per_class)
        return cls(values, members, tuple(classes))


def synthetic_value(y: int, c1: float, c2: float) -> float:
    """Synthetic observation of class ``y`` for the uniform draw ``c2``."""
    shift = 0.75 * ((1.0 + c1) * c2 + c2 * c2)
    return y - shift if y == 1 else y + shift


def generate_synthetic_alphabet(c1: float, size: int, rng: np.random.Generator) -> ObservationAlphabet:
    """Draw ``size // 2`` values per class; smaller ``c1`` means more class overlap."""
    if not 0.0 < c1 <= 1.0:
        raise ConfigurationError(f"c1 must lie in (0, 1], got {c1!r}")
    if size < 2 or size % 2:
        raise ConfigurationError(f"alphabet size must be a positive even integer, got {size!r}")
    per_class = []
    for y in BINARY_CLASSES:
        c2 = rng.uniform(0.0, 1.0, size // 2)
        per_class.append([synthetic_value(y, c1, c) for c in c2])
    return ObservationAlphabet.from_class_values(per_class, BINARY_CLASSES)


def default_iris_path() -> Path:
    return Path(str(resources.files("msoksq") / "resources" / "iris.csv"))


def load_iris(path: str | Path | None = None, standardize: bool = True) -> tuple[ObservationAlphabet, dict[str, tuple[int, int]]]:
    """Petal-width alphabet and OVA label map from a UCI-format Iris CSV.

    Class membership keeps multiplicities, so streams reproduce the empirical
    class-conditional petal-width distribution.  With ``standardize`` the
    values are z-scored over the whole file.
    """
    path = default_iris_path() if path is None else Path(path)
    if not path.exists():
        raise DataError(f"Iris file not found: {path}")
    widths: list[float] = []
    names: list[str] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            try:
                feats = [float(c) for c in row[:4]]
            except ValueError:
                if lineno == 1 and not widths:
                    continue  # header
                raise DataError(f"{path}:{lineno}: non-numeric feature") from None
            name = row[4].strip()
            name = _IRIS_ALIASES.get(name, name)
            if name not in IRIS_LABELS:
                raise DataError(f"{path}:{lineno}: unknown class label {row[4]!r}")
            widths.append(feats[3])
            names.append(name)
    if not widths:
        raise DataError(f"{path}: no data rows")
    x = np.asarray(widths)
    if standardize:
        sd = x.std()
        if sd == 0:
            raise DataError("cannot standardize a constant petal-width column")
        x = (x - x.mean()) / sd
    present = [n for n in IRIS_LABELS if n in names]
    per_class = [x[[i for i, n in enumerate(names) if n == c]] for c in present]
    labels = {c: IRIS_LABELS[c] for c in present}
    return ObservationAlphabet.from_class_values(per_class, [labels[c] for c in present]), labels


@dataclass(frozen=True)
class Sample:
    """One time step: per-sensor observations (values and alphabet indices) and the label."""

    x: np.ndarray
    x_idx: np.ndarray
    y: int | tuple[int, int]
    n: int


@dataclass
class StreamConfig:
    M: int = 10
    N: int = 600
    seed: int = 0
    source: str = "synthetic"
    c1: float = 0.1
    alphabet_size: int = 20
    iris_path: str | None = None
    standardize: bool = True

    def __post_init__(self) -> None:
        if self.M < 1 or self.N < 1:
            raise ConfigurationError("M and N must be at least 1")
        if self.source not in ("synthetic", "iris"):
            raise ConfigurationError(f"unknown data source {self.source!r}")


class SampleStream:
    """Seeded stream: one class per step, each sensor draws a value of that class."""

    def __init__(self, alphabets: Sequence[ObservationAlphabet], rng: np.random.Generator, horizon: int | None = None):
        if not alphabets:
            raise ConfigurationError("need at least one sensor alphabet")
        classes = alphabets[0].classes
        if any(a.classes != classes for a in alphabets):
            raise ConfigurationError("all sensors must share the label set")
        self.alphabets = list(alphabets)
        self.classes = classes
        self.rng = rng
        self.horizon = horizon
        self.n = 0
        self._members = [[a.members[k] for a in alphabets] for k in range(len(classes))]
        self._sizes = [np.array([m.size for m in ms]) for ms in self._members]

    @property
    def M(self) -> int:
        return len(self.alphabets)

    def next(self) -> Sample:
        if self.horizon is not None and self.n >= self.horizon:
            raise StopIteration
        self.n += 1
        k = int(self.rng.integers(len(self.classes)))
        draws = self.rng.integers(0, self._sizes[k])
        x_idx = np.array([self._members[k][m][d] for m, d in enumerate(draws)], dtype=np.int64)
        x = np.array([a.values[i] for a, i in zip(self.alphabets, x_idx)])
        return Sample(x, x_idx, self.classes[k], self.n)

    def __iter__(self) -> Iterator[Sample]:
        return self

    def __next__(self) -> Sample:
        return self.next()

    def take(self, count: int) -> list[Sample]:
        return [self.next() for _ in range(count)]


def stream_next(stream: SampleStream) -> Sample:
    return stream.next()


def build_alphabets(config: StreamConfig) -> list[ObservationAlphabet]:
    if config.source == "iris":
        alphabet, _ = load_iris(config.iris_path, config.standardize)
        return [alphabet] * config.M
    rng = seeded_rng(config.seed, RNG_ALPHABET)
    return [generate_synthetic_alphabet(config.c1, config.alphabet_size, rng) for _ in range(config.M)]


def make_stream(config: StreamConfig, alphabets: Sequence[ObservationAlphabet] | None = None) -> SampleStream:
    if alphabets is None:
        alphabets = build_alphabets(config)
    return SampleStream(alphabets, seeded_rng(config.seed, RNG_STREAM), config.N)


def write_alphabets_csv(path: str | Path, alphabets: Sequence[ObservationAlphabet]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["sensor", "class", "value"])
        for m, a in enumerate(alphabets):
            for label, idx in zip(a.classes, a.members):
                tag = label if isinstance(label, int) else ";".join(map(str, label))
                for v in a.values[np.unique(idx)]:
                    out.writerow([m, tag, repr(float(v))])
