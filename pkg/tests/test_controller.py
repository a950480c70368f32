import pytest
from hypothesis import given
from hypothesis import strategies as st

from poscascade.controller import (ControllerGains, ControllerState, DelayEstimate,
                                   control_output, gate, nu_rate, u_dot_model)

DEMO = ControllerGains(k=0.15, lam=0.1, alpha=5.0)


def test_gate_convention():
    assert gate(3.7) == 1
    assert gate(0.0) == 1
    assert gate(-500.0) == 0


def test_control_output_examples():
    cs = ControllerState()
    cs.initialize(0.0, nu0=1e6)
    assert control_output(cs, DEMO, 1e3, -1.0) == 0.0
    cs.initialize(0.0, nu0=20.0)
    assert control_output(cs, DEMO, 10.0, 1.0) == pytest.approx(21.5)
    assert not cs.clamped
    cs.initialize(200.0, nu0=10.0)
    assert control_output(cs, DEMO, 0.0, 1.0) == 0.0
    assert cs.clamped and cs.gate == 1


def test_uninitialized_controller():
    with pytest.raises(RuntimeError):
        control_output(ControllerState(), DEMO, 1.0, 1.0)


def test_nu_rate_examples():
    assert nu_rate(DEMO, 0.0, 0.0) == 0.0
    assert nu_rate(DEMO, 10.0, -2.0) == pytest.approx(-1.35)
    assert nu_rate(ControllerGains(1, 1, 1), 1.0, 1.0) == 2.0


def test_u_dot_model_examples():
    assert u_dot_model(DEMO, -1.0, 99.0) == 0.0
    assert u_dot_model(DEMO, 1.0, 16.2) == pytest.approx(2.43)
    assert u_dot_model(DEMO, 0.0, 1.0) == pytest.approx(0.15)


def test_delay_estimate():
    est = DelayEstimate.from_initial_state(1.0, 1.0, 5.0)
    assert est.tau_hat == pytest.approx(0.2)
    with pytest.raises(ValueError):
        DelayEstimate.from_initial_state(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        ControllerGains(0.0, 1.0, 1.0)


@given(e1=st.floats(-1e6, 1e6), en=st.floats(-1e6, 1e6), nu=st.floats(-1e6, 1e6))
def test_output_never_negative(e1, en, nu):
    cs = ControllerState()
    cs.initialize(0.0, nu0=nu)
    u = control_output(cs, DEMO, en, e1)
    assert u >= 0.0
    if e1 < 0:
        assert u == 0.0
