import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poscascade.signals import (HistoryError, InputHistory, ReferenceTrajectory,
                                history_append, history_sample, reference_eval)


def test_append_examples():
    h = InputHistory()
    history_append(h, 0.0, 5.0)
    assert len(h) == 1
    history_append(h, 0.01, 5.1)
    assert h.times.tolist() == [0.0, 0.01]
    with pytest.raises(HistoryError):
        history_append(h, -1.0, 3.0)
    with pytest.raises(HistoryError):
        history_append(h, 1.0, -3.0)


def test_sample_rules():
    h = InputHistory().append(0.0, 0.0).append(1.0, 10.0)
    assert history_sample(h, -3.0) == 0.0
    assert history_sample(h, 0.5) == 5.0
    assert history_sample(h, 2.0) == 10.0


def test_sample_side_at_start():
    h = InputHistory().append(0.0, 4.0).append(1.0, 4.0)
    assert h.sample(0.0) == 0.0
    assert h.sample(0.0, side="right") == 4.0
    assert InputHistory().sample(1.0) == 0.0


def test_truncate_keeps_lookups():
    h = InputHistory()
    for k in range(11):
        h.append(0.1 * k, float(k))
    before = h.sample(0.55)
    h.truncate_before(0.5)
    assert h.sample(0.55) == pytest.approx(before)
    assert len(h) < 11


@settings(max_examples=50, deadline=None)
@given(vals=st.lists(st.floats(0, 100), min_size=2, max_size=20), q=st.floats(0.001, 30))
def test_sample_within_hull(vals, q):
    h = InputHistory()
    for k, v in enumerate(vals):
        h.append(float(k), v)
    s = h.sample(q)
    assert min(vals) - 1e-12 <= s <= max(vals) + 1e-12


def test_tanh_reference():
    r = ReferenceTrajectory("tanh_squared", 200.0, 0.15)
    assert r(0.0) == 0.0
    assert r(200.0) == pytest.approx(200.0, rel=1e-12)


def test_sinusoid_reference():
    r = ReferenceTrajectory("sinusoid", 100.0, 0.15, 300.0)
    assert r(0.0) == pytest.approx(300.0)
    assert r(0.0, 1) == pytest.approx(15.0)
    assert r(1.3, 2) == pytest.approx(-100 * 0.0225 * math.sin(0.195))


@pytest.mark.parametrize("kind", ["tanh_squared", "sinusoid"])
def test_reference_derivatives_by_differences(kind):
    r = ReferenceTrajectory(kind, 200.0, 0.15, 10.0)
    t = np.linspace(0.3, 20.0, 7)
    h = 1e-4
    tab = r.table(t, 4)
    up, dn = r.table(t + h, 4), r.table(t - h, 4)
    for j in range(4):
        fd = (up[:, j] - dn[:, j]) / (2 * h)
        np.testing.assert_allclose(fd, tab[:, j + 1], rtol=1e-6, atol=1e-7)


def test_custom_reference_and_order_guard():
    r = ReferenceTrajectory("custom", derivatives=[lambda t: t * t, lambda t: 2 * t, lambda t: 2.0])
    assert reference_eval(r, 3.0, 1) == 6.0
    with pytest.raises(ValueError):
        r(1.0, 3)
    with pytest.raises(ValueError):
        ReferenceTrajectory("square")
