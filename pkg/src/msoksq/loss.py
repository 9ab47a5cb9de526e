"""Convex margin losses and sub-gradients with respect to the decision value."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import ConfigurationError


@dataclass(frozen=True)
class SoftMargin:
    """``max(0, rho - y*v)``; ``rho = 1`` is the hinge loss."""

    rho: float = 1.0

    def __post_init__(self) -> None:
        if not self.rho > 0:
            raise ConfigurationError(f"rho must be positive, got {self.rho!r}")

    def value(self, v: float, y: int) -> float:
        return max(0.0, self.rho - y * v)

    def subgradient(self, v: float, y: int) -> float:
        # the kink y*v == rho counts as active
        return -float(y) if y * v <= self.rho else 0.0


@dataclass(frozen=True)
class Logistic:
    def value(self, v: float, y: int) -> float:
        z = -y * v
        return z + math.log1p(math.exp(-z)) if z > 0 else math.log1p(math.exp(z))

    def subgradient(self, v: float, y: int) -> float:
        z = y * v
        if z >= 0:
            e = math.exp(-z)
            return -y * e / (1.0 + e)
        return -y / (1.0 + math.exp(z))


LossKind = Union[SoftMargin, Logistic]


def make_loss(name: str, rho: float = 1.0) -> LossKind:
    if name in ("hinge", "soft_margin"):
        return SoftMargin(rho)
    if name == "logistic":
        return Logistic()
    raise ConfigurationError(f"unknown loss {name!r}")


def _check_label(y: int) -> None:
    if y not in (-1, 1):
        raise ValueError(f"label must be -1 or +1, got {y!r}")


def loss(value: float, y: int, kind: LossKind) -> float:
    _check_label(y)
    return kind.value(value, y)


def loss_subgradient(value: float, y: int, kind: LossKind) -> float:
    _check_label(y)
    return kind.subgradient(value, y)
