import numpy as np
import pytest
import sympy as sp

from poscascade.errcascade import (ErrorBoundExceeded, ErrorFrame, binet, compute_coefficients,
                                   compute_e_a, compute_e_u, compute_errors,
                                   errors_from_derivatives)
from poscascade.model import coagulation
from poscascade.signals import InputHistory


def symbolic_table(n):
    """Expand e_2 = e1' + e1, e_k = e_{k-1}' + e_{k-1} + e_{k-2} with sympy."""
    t = sp.symbols("t")
    f = sp.Function("e1")(t)
    es = [f, sp.diff(f, t) + f]
    while len(es) < n:
        es.append(sp.expand(sp.diff(es[-1], t) + es[-1] + es[-2]))
    rows = []
    for i, e in enumerate(es[:n], start=1):
        derivs = [sp.diff(f, t, j) if j else f for j in range(i)]
        subs = {d: sp.Symbol(f"d{j}") for j, d in reversed(list(enumerate(derivs)))}
        poly = sp.expand(e.subs(subs))
        rows.append(tuple(int(poly.coeff(sp.Symbol(f"d{j}"))) for j in range(i)))
    return tuple(rows)


@pytest.mark.parametrize("n", range(1, 7))
def test_coefficients_match_symbolic_expansion(n):
    assert compute_coefficients(n).a == symbolic_table(n)


def test_small_tables():
    c = compute_coefficients(4)
    assert c.row(2) == (1, 1)
    assert c.row(3) == (2, 2, 1)
    assert c.row(4) == (3, 5, 3, 1)


def test_first_column_is_fibonacci():
    fib = [0, 1]
    while len(fib) < 22:
        fib.append(fib[-1] + fib[-2])
    c = compute_coefficients(20)
    for i in range(2, 21):
        assert c.get(i, 0) == fib[i] == binet(i)


def test_errors_from_derivatives():
    c = compute_coefficients(3)
    np.testing.assert_array_equal(errors_from_derivatives(c, [1, 0, 0]), [1, 1, 2])


def test_perfect_tracking_gives_zero_errors():
    p = coagulation()
    x = np.array([500.0, 50.0, 5.0])
    ref = [x[0], x[1] - 1.1311 * x[0], (x[2] - 1.1362 * x[1]) - 1.1311 * (x[1] - 1.1311 * x[0])]
    e = compute_errors(compute_coefficients(3), p, x, ref)
    np.testing.assert_allclose(e, 0.0, atol=1e-10)


def test_hand_error_values():
    # x=[500,50,5], reference 0 with zero derivatives
    e = compute_errors(compute_coefficients(3), coagulation(), [500.0, 50.0, 5.0], [0, 0, 0])
    e1, de1, dde1 = -500.0, 515.55, -(-51.81 + 1.1311 * 515.55)
    np.testing.assert_allclose(e, [e1, de1 + e1, dde1 + 2 * de1 + 2 * e1], rtol=1e-12)
    assert e[1] == pytest.approx(15.55, rel=1e-12)


def test_e_u_examples():
    h = InputHistory()
    for k in range(1001):
        h.append(0.01 * k, 3.0)
    assert compute_e_u(h, 8.0, 2.0) == 0.0
    h = InputHistory()
    for k in range(1001):
        h.append(0.01 * k, 0.0 if k < 500 else 10.0)
    assert compute_e_u(h, 8.0, 5.0) == pytest.approx(-10.0)
    h = InputHistory()
    for k in range(1001):
        h.append(0.01 * k, 0.01 * k)
    assert compute_e_u(h, 7.0, 2.0) == pytest.approx(-2.0, abs=1e-12)
    with pytest.raises(ValueError):
        compute_e_u(h, 7.0, 0.0)


def test_e_a_examples():
    assert compute_e_a(0, 0, 0, 0.1, 5) == 0
    assert compute_e_a(1, 2, 3, 0.1, 5) == pytest.approx(16.2)
    assert compute_e_a(-0.1 * 7.0, 7.0, 0.0, 0.1, 5) == pytest.approx(0.0, abs=1e-15)


def test_error_bound_tripwire():
    ErrorFrame(0.0, np.array([1.0, 2.0])).check_bound(10.0)
    with pytest.raises(ErrorBoundExceeded):
        ErrorFrame(0.0, np.array([1e8, 0.0])).check_bound()
