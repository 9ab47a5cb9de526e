import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msoksq.errors import ConfigurationError
from msoksq.loss import Logistic, SoftMargin, loss, loss_subgradient, make_loss

hinge = SoftMargin(1.0)
logistic = Logistic()


def test_values():
    assert loss(1.0, 1, hinge) == 0.0
    assert loss(0.5, 1, hinge) == 0.5
    assert loss(0.0, 1, logistic) == pytest.approx(math.log(2))


def test_subgradients():
    assert loss_subgradient(0.5, 1, hinge) == -1.0
    assert loss_subgradient(-2.0, -1, hinge) == 0.0
    assert loss_subgradient(0.0, 1, logistic) == pytest.approx(-0.5)


def test_kink_counts_as_active():
    assert loss_subgradient(1.0, 1, hinge) == -1.0
    assert loss_subgradient(-2.0, -1, SoftMargin(2.0)) == 1.0


def test_make_loss_and_labels():
    assert make_loss("hinge") == SoftMargin(1.0)
    assert make_loss("soft_margin", 2.0).rho == 2.0
    assert isinstance(make_loss("logistic"), Logistic)
    with pytest.raises(ConfigurationError):
        make_loss("squared")
    with pytest.raises(ConfigurationError):
        SoftMargin(0.0)
    with pytest.raises(ValueError):
        loss(0.0, 0, hinge)


def test_logistic_extremes_finite():
    assert loss(800.0, -1, logistic) == pytest.approx(800.0)
    assert loss(800.0, 1, logistic) == pytest.approx(0.0, abs=1e-300)
    assert loss_subgradient(-800.0, 1, logistic) == pytest.approx(-1.0)


reals = st.floats(-50, 50, allow_nan=False)
labels = st.sampled_from([-1, 1])
kinds = st.sampled_from([SoftMargin(1.0), SoftMargin(0.3), Logistic()])


@given(reals, reals, labels, kinds)
def test_lipschitz_one(a, b, y, kind):
    assert abs(loss(a, y, kind) - loss(b, y, kind)) <= abs(a - b) + 1e-12


@given(reals, reals, labels, kinds)
def test_subgradient_inequality(a, b, y, kind):
    g = loss_subgradient(a, y, kind)
    assert loss(b, y, kind) >= loss(a, y, kind) + g * (b - a) - 1e-9


@given(st.floats(-20, 20), labels)
def test_logistic_finite_difference(v, y):
    h = 1e-5
    fd = (loss(v + h, y, logistic) - loss(v - h, y, logistic)) / (2 * h)
    assert loss_subgradient(v, y, logistic) == pytest.approx(fd, abs=1e-6)


@given(st.floats(-5, 5), labels)
def test_hinge_finite_difference_off_kink(v, y):
    if abs(y * v - 1.0) < 0.1:
        return
    h = 1e-6
    fd = (loss(v + h, y, hinge) - loss(v - h, y, hinge)) / (2 * h)
    assert loss_subgradient(v, y, hinge) == pytest.approx(fd, abs=1e-8)
