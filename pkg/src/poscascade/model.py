"""Positive cascading plant, logistic input saturation and power-law input delay.

The plant is the chain

    x_i' = x_{i+1} - d_i x_i + H_i(x),        i = 1..n-1
    x_n' = -d_n x_n + F(x) + g(u(t - tau(x_n)))

with ``g`` a logistic saturation and ``tau = gamma * x_n**(-k_d)``.
Optional coupling maps are given as lists of callables ``[H, dH/dt, ...]``
evaluated at the current state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

MapChain = Sequence[Callable[[np.ndarray], float]]

# Default floor that x_n must stay above while the delay is active (state units).
DEFAULT_PHI1 = 1e-3


class ModelError(ValueError):
    """Invalid plant parameters or a state outside the model's domain."""


@dataclass(frozen=True)
class CascadeParams:
    """Order, decay rates and optional non-negative coupling maps."""

    n: int
    d: tuple
    h_maps: Optional[tuple] = None
    f_map: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "d", tuple(float(v) for v in self.d))
        if int(self.n) != self.n or self.n < 2:
            raise ModelError(f"n must be an integer >= 2, got {self.n}")
        if len(self.d) != self.n:
            raise ModelError(f"d has {len(self.d)} entries, expected n={self.n}")
        if any(v < 0 or not math.isfinite(v) for v in self.d):
            raise ModelError(f"decay rates must be finite and >= 0, got {self.d}")
        if self.h_maps is not None:
            object.__setattr__(self, "h_maps", tuple(tuple(c) for c in self.h_maps))
            if len(self.h_maps) != self.n - 1:
                raise ModelError(f"h_maps needs n-1={self.n - 1} entries")
        if self.f_map is not None:
            object.__setattr__(self, "f_map", tuple(self.f_map))
        self._spot_check_nonnegative()

    @property
    def is_linear(self) -> bool:
        return self.h_maps is None and self.f_map is None

    def _spot_check_nonnegative(self, samples: int = 16):
        if self.is_linear:
            return
        rng = np.random.default_rng(0)
        for x in rng.uniform(0.0, 100.0, size=(samples, self.n)):
            vals = []
            if self.h_maps is not None:
                vals += [chain[0](x) for chain in self.h_maps if chain]
            if self.f_map:
                vals.append(self.f_map[0](x))
            if any(v < 0 for v in vals):
                raise ModelError(f"coupling map negative at sampled state {x.tolist()}")


@dataclass(frozen=True)
class SaturationParams:
    """Logistic saturation ``beta / (1 + exp(-k_s (u - eta)))``."""

    beta: float
    k_s: float
    eta: float

    def __post_init__(self):
        for name in ("beta", "k_s", "eta"):
            if not getattr(self, name) > 0:
                raise ModelError(f"saturation {name} must be > 0")
        if self.eta < self.beta:
            raise ModelError(f"saturation requires eta >= beta ({self.eta} < {self.beta})")


@dataclass(frozen=True)
class DelayLaw:
    """Power-law input delay ``tau = gamma * x_n**(-k_d)``.

    ``phi1`` is the positivity floor on x_n and ``phi2`` the slew bound on
    the delay rate. The slew bound depends on d_n, so it is checked with
    :meth:`check_slew_bound` once the plant is known.
    """

    gamma: float
    k_d: float
    phi1: float = DEFAULT_PHI1
    phi2: float = 4.0

    def __post_init__(self):
        for name in ("gamma", "k_d", "phi1", "phi2"):
            if not getattr(self, name) > 0:
                raise ModelError(f"delay law {name} must be > 0")

    @property
    def tau_max(self) -> float:
        return self.gamma * self.phi1 ** (-self.k_d)

    def slew_threshold(self, d_n: float) -> float:
        return d_n * self.k_d * self.tau_max

    def check_slew_bound(self, d_n: float):
        thr = self.slew_threshold(d_n)
        if not self.phi2 > thr:
            raise ModelError(
                f"phi2 > d_n*k_d*gamma*phi1^-k_d violated: {self.phi2} <= {thr:.6g}"
            )


@dataclass
class StateVector:
    x: np.ndarray
    nu: float = 0.0
    t: float = 0.0

    def check(self, phi1: Optional[float] = None, tol: float = 1e-9):
        bad = np.flatnonzero(self.x < -tol)
        if bad.size:
            i = int(bad[0])
            raise ModelError(f"x[{i + 1}] = {self.x[i]:.6g} < 0 at t={self.t}")
        if phi1 is not None and not self.x[-1] > phi1:
            raise ModelError(f"x_n = {self.x[-1]:.6g} <= phi1 = {phi1} at t={self.t}")


def coagulation() -> CascadeParams:
    """Third-order thrombin cascade fitted to a trauma plasma sample."""
    return CascadeParams(n=3, d=(1.1311, 1.1362, 0.2727))


def eval_saturation(p: SaturationParams, u: float) -> float:
    if u < 0:
        log.debug("saturation evaluated at negative input u=%g", u)
    return p.beta / (1.0 + math.exp(-p.k_s * (u - p.eta)))


def eval_delay(law: DelayLaw, x_n: float) -> float:
    if not x_n > 0:
        raise ModelError(f"delay undefined for x_n = {x_n} (must be > 0)")
    return law.gamma * x_n ** (-law.k_d)


def cascade_matrix(p: CascadeParams) -> np.ndarray:
    A = np.diag([-v for v in p.d])
    A += np.diag(np.ones(p.n - 1), 1)
    return A


def metzler_check(p: CascadeParams) -> tuple[bool, str]:
    """Return whether the cascade matrix is Metzler, plus a printable report."""
    A = cascade_matrix(p)
    off = A[~np.eye(p.n, dtype=bool)]
    ok = bool(np.all(off >= 0))
    rows = "\n".join("  [" + ", ".join(f"{v:g}" for v in row) + "]" for row in A)
    return ok, f"A (n={p.n}, Metzler={ok}):\n{rows}"


def rhs(p: CascadeParams, x, g_u_tau: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ModelError(f"state has shape {x.shape}, expected ({p.n},)")
    dx = np.empty(p.n)
    for i in range(p.n - 1):
        dx[i] = x[i + 1] - p.d[i] * x[i]
        if p.h_maps is not None:
            dx[i] += p.h_maps[i][0](x)
    dx[-1] = -p.d[-1] * x[-1] + g_u_tau
    if p.f_map:
        dx[-1] += p.f_map[0](x)
    return dx


def _map_derivative(chain, order: int, x, label: str) -> float:
    if chain is None:
        return 0.0
    if order >= len(chain):
        raise ModelError(f"{label} has no derivative oracle of order {order}")
    return chain[order](x)


def x1_derivative_chain(p: CascadeParams, x, order: int,
                        g_u_tau: Optional[float] = None) -> float:
    """``order``-th time derivative of x_1 by substitution of the cascade.

    Orders below n depend on the state only; order n needs the saturated
    delayed input.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ModelError(f"state has shape {x.shape}, expected ({p.n},)")
    if order < 0 or order > p.n:
        raise ModelError(f"derivative order {order} outside 0..{p.n}")
    if order == p.n and g_u_tau is None:
        raise ModelError("order n derivative needs the delayed saturated input")

    memo: dict = {}

    def D(i: int, m: int) -> float:
        # m-th derivative of x_{i+1} (0-based i)
        if m == 0:
            return x[i]
        key = (i, m)
        if key in memo:
            return memo[key]
        if i < p.n - 1:
            h = p.h_maps[i] if p.h_maps is not None else None
            val = D(i + 1, m - 1) - p.d[i] * D(i, m - 1) + _map_derivative(h, m - 1, x, f"H_{i + 1}")
        elif m == 1:
            val = -p.d[i] * x[i] + _map_derivative(p.f_map or None, 0, x, "F") + g_u_tau
        else:
            raise ModelError("x_n derivatives above first order are not available")
        memo[key] = val
        return val

    return D(0, order)


def x1_derivative_rows(p: CascadeParams) -> np.ndarray:
    """Rows R with ``x_1^{(j)} = R[j] @ x`` (plus g for j = n) for a linear cascade."""
    A = cascade_matrix(p)
    R = np.zeros((p.n + 1, p.n))
    R[0, 0] = 1.0
    for j in range(p.n):
        R[j + 1] = R[j] @ A
    return R
