"""Gated switching control law with integrator state and frozen delay estimate."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class ControllerGains:
    k: float
    lam: float
    alpha: float

    def __post_init__(self):
        for name in ("k", "lam", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"gain {name} must be > 0")


@dataclass(frozen=True)
class DelayEstimate:
    """Power-law delay guess frozen at the initial x_n."""

    gamma_hat: float
    k_d_hat: float
    tau_hat: float
    tau_tilde_bar: float = 0.0

    @classmethod
    def from_initial_state(cls, gamma_hat: float, k_d_hat: float, x_n0: float,
                           tau_tilde_bar: float = 0.0) -> "DelayEstimate":
        if not (gamma_hat > 0 and k_d_hat > 0):
            raise ValueError("gamma_hat and k_d_hat must be > 0")
        if not x_n0 > 0:
            raise ValueError(f"x_n(0) must be > 0 to form the delay estimate, got {x_n0}")
        return cls(gamma_hat, k_d_hat, gamma_hat * x_n0 ** (-k_d_hat), tau_tilde_bar)

    def __post_init__(self):
        if not self.tau_hat > 0:
            raise ValueError("tau_hat must be > 0")
        if self.tau_tilde_bar < 0:
            raise ValueError("tau_tilde_bar must be >= 0")


def gate(e1: float) -> int:
    """sgn((sgn(e1) + 1) / 2) with sgn(0) = 0, so e1 = 0 maps to 1."""
    return 1 if e1 >= 0 else 0


@dataclass
class ControllerState:
    nu: float = 0.0
    e_n_t0: Optional[float] = None
    gate: int = 0
    clamped: bool = False

    def initialize(self, e_n: float, nu0: float = 0.0):
        self.e_n_t0 = float(e_n)
        self.nu = nu0


def raw_command(cs: ControllerState, g: ControllerGains, e_n: float, e1: float) -> float:
    if cs.e_n_t0 is None:
        raise RuntimeError("controller not initialized (e_n(t0) missing)")
    return gate(e1) * (g.k * (e_n - cs.e_n_t0) + cs.nu)


def control_output(cs: ControllerState, g: ControllerGains, e_n: float, e1: float) -> float:
    """Gated command clamped at zero; sets ``cs.gate`` and ``cs.clamped``."""
    raw = raw_command(cs, g, e_n, e1)
    cs.gate = gate(e1)
    cs.clamped = raw < 0
    return raw if raw > 0 else 0.0


def nu_rate(g: ControllerGains, e_n: float, e_u: float) -> float:
    return g.k * (g.lam * e_n + g.alpha * e_u)


def u_dot_model(g: ControllerGains, e1: float, e_a: float) -> float:
    # delta-function terms of the gated law cancel identically
    return gate(e1) * g.k * e_a
