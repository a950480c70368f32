"""Filtered tracking-error cascade, delay-compensation error and composite error."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import CascadeParams, x1_derivative_chain
from .signals import InputHistory

# Divergence tripwire on the stacked error vector (mixed units).
DEFAULT_PSI = 1e7


class ErrorBoundExceeded(RuntimeError):
    pass


def binet(i: int) -> int:
    sq5 = math.sqrt(5.0)
    return int(round((((1 + sq5) / 2) ** i - ((1 - sq5) / 2) ** i) / sq5))


@dataclass(frozen=True)
class CascadeCoefficients:
    """Integer table with ``e_i = sum_j a[i][j] * e_1^{(j)}`` (1-based i)."""

    n: int
    a: tuple  # a[i-1][j] for j < i

    def get(self, i: int, j: int) -> int:
        return self.a[i - 1][j]

    def row(self, i: int) -> tuple:
        return self.a[i - 1]

    def as_array(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i, row in enumerate(self.a):
            out[i, : len(row)] = row
        return out


def compute_coefficients(n: int) -> CascadeCoefficients:
    if n < 1:
        raise ValueError(f"cascade order must be >= 1, got {n}")
    table: dict[tuple[int, int], int] = {}

    def a(i, j):
        # first-column entries with index < 1 are zero
        if j == 0 and i < 1:
            return 0
        return table[(i, j)]

    for i in range(1, n + 1):
        table[(i, i - 1)] = 1
        if i >= 2:
            table[(i, 0)] = binet(i)
        for j in range(1, i - 1):
            total = 0
            for p in range(1, i):
                left = a(i - p - j + 1, 0)
                if left:
                    total += left * a(p + j - 1, j - 1)
            table[(i, j)] = total
    rows = tuple(tuple(table[(i, j)] for j in range(i)) for i in range(1, n + 1))
    return CascadeCoefficients(n=n, a=rows)


@dataclass
class ErrorFrame:
    t: float
    e: np.ndarray
    e_u: float = 0.0
    e_a: float = 0.0

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.e, [self.e_u, self.e_a]])

    def check_bound(self, psi: float = DEFAULT_PSI):
        nz = float(np.linalg.norm(self.z))
        if not nz < psi:
            raise ErrorBoundExceeded(f"|z| = {nz:.6g} >= psi = {psi:g} at t={self.t}")


def errors_from_derivatives(coeffs: CascadeCoefficients, de1: Sequence[float]) -> np.ndarray:
    """e_1..e_n from the derivatives e_1^{(0..n-1)}."""
    e = np.empty(coeffs.n)
    for i in range(1, coeffs.n + 1):
        row = coeffs.row(i)
        e[i - 1] = sum(row[j] * de1[j] for j in range(i))
    return e


def compute_errors(coeffs: CascadeCoefficients, plant: CascadeParams, x,
                   ref_derivs: Sequence[float]) -> np.ndarray:
    """Error cascade at one instant.

    ``ref_derivs[j]`` is the j-th derivative of the reference; plant-side
    derivatives of x_1 come from the cascade equations.
    """
    n = coeffs.n
    if len(ref_derivs) < n:
        raise ValueError(f"need reference derivatives up to order {n - 1}")
    de1 = [ref_derivs[j] - x1_derivative_chain(plant, x, j) for j in range(n)]
    return errors_from_derivatives(coeffs, de1)


def compute_e_n_dot(coeffs: CascadeCoefficients, de1_shifted: Sequence[float]) -> float:
    """Time derivative of e_n given ``e_1^{(1..n)}``."""
    row = coeffs.row(coeffs.n)
    return sum(row[j] * de1_shifted[j] for j in range(coeffs.n))


def compute_e_u(h: InputHistory, t: float, tau_hat: float) -> float:
    """Delay-compensation error as the telescoped difference u(t - tau_hat) - u(t)."""
    if not tau_hat > 0:
        raise ValueError("tau_hat must be > 0")
    return h.sample(t - tau_hat) - h.sample(t)


def compute_e_a(e_n_dot: float, e_n: float, e_u: float, lam: float, alpha: float) -> float:
    return e_n_dot + lam * e_n + alpha * e_u
