"""Closed-loop fixed-step simulation, Lyapunov-Krasovskii monitor and metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _backend, _pykernel
from .controller import ControllerGains, DelayEstimate
from .errcascade import DEFAULT_PSI, ErrorBoundExceeded, compute_coefficients
from .model import (CascadeParams, DelayLaw, ModelError, SaturationParams,
                    x1_derivative_chain, x1_derivative_rows)
from .signals import ReferenceTrajectory

POSITIVITY_TOL = 1e-9


class SimulationError(RuntimeError):
    """A runtime invariant tripped during integration."""


@dataclass
class SimConfig:
    dt: float = 0.01
    t_end: float = 100.0
    enable_saturation: bool = True
    enable_delay: bool = True
    enable_control: bool = True
    record_stride: int = 1
    monitor_enabled: bool = True
    lk_weights: tuple = (1.0, 1.0, 1.0)
    psi: float = DEFAULT_PSI
    settle_band: float = 20.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_end > self.dt:
            raise ValueError(f"t_end must exceed dt ({self.t_end} <= {self.dt})")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if any(not w > 0 for w in self.lk_weights):
            raise ValueError("lk_weights must be positive")

    @property
    def nsteps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Scenario:
    name: str
    plant: CascadeParams
    saturation: SaturationParams
    delay: DelayLaw
    gamma_hat: float
    k_d_hat: float
    gains: ControllerGains
    reference: ReferenceTrajectory
    x0: tuple
    tau_tilde_bar: float = 0.0

    def estimate(self) -> DelayEstimate:
        return DelayEstimate.from_initial_state(self.gamma_hat, self.k_d_hat,
                                                self.x0[-1], self.tau_tilde_bar)

    def check_resolution(self, cfg: SimConfig, x_n_max: Optional[float] = None):
        """Require dt <= tau_min / 5 when the delay is active."""
        if not cfg.enable_delay:
            return
        x_n_max = x_n_max or self.expected_x_n_max(cfg)
        tau_min = self.delay.gamma * x_n_max ** (-self.delay.k_d)
        if cfg.dt > tau_min / 5:
            raise ValueError(f"dt={cfg.dt} under-resolves the delay: need dt <= "
                             f"tau_min/5 = {tau_min / 5:.4g}")

    def expected_x_n_max(self, cfg: SimConfig) -> float:
        # input-driven steady state of x_n is bounded by beta / d_n when saturated
        bound = self.x0[-1]
        if cfg.enable_saturation and self.plant.d[-1] > 0:
            bound = max(bound, self.saturation.beta / self.plant.d[-1])
        return bound


COLUMN_FIXED = ("x_r",)


@dataclass
class Trajectory:
    """Full-resolution closed-loop record; ``rows()`` decimates by ``stride``."""

    t: np.ndarray
    x: np.ndarray
    x_r: np.ndarray
    e: np.ndarray
    e_u: np.ndarray
    e_a: np.ndarray
    u_raw: np.ndarray
    u: np.ndarray
    g_u_tau: np.ndarray
    tau: np.ndarray
    tau_hat: float
    nu: np.ndarray
    gate: np.ndarray
    clamp: np.ndarray
    gains: Optional[ControllerGains] = None
    dt: float = 0.01
    stride: int = 1
    state_clamps: int = 0
    V: Optional[np.ndarray] = None
    Q1: Optional[np.ndarray] = None
    Q2: Optional[np.ndarray] = None
    Q3: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def __len__(self):
        return self.t.size

    @property
    def u_dot(self) -> np.ndarray:
        if self.gains is None:
            return np.zeros_like(self.e_a)
        return self.gate * self.gains.k * self.e_a

    def columns(self) -> list[str]:
        n = self.n
        return (["t"] + [f"x{i + 1}" for i in range(n)] + ["x_r"]
                + [f"e{i + 1}" for i in range(n)]
                + ["e_u", "e_a", "u_raw", "u_applied", "g_u_tau", "tau", "tau_hat",
                   "nu", "gate", "clamp_flag", "V", "Q1", "Q2", "Q3"])

    def table(self) -> np.ndarray:
        """Recorded rows (every ``stride``-th step) in ``columns()`` order."""
        idx = np.arange(0, self.t.size, self.stride)
        nan = np.full(self.t.size, np.nan)
        parts = [self.t[:, None], self.x, self.x_r[:, None], self.e,
                 np.column_stack([self.e_u, self.e_a, self.u_raw, self.u, self.g_u_tau,
                                  self.tau, np.full(self.t.size, self.tau_hat), self.nu,
                                  self.gate, self.clamp,
                                  nan if self.V is None else self.V,
                                  nan if self.Q1 is None else self.Q1,
                                  nan if self.Q2 is None else self.Q2,
                                  nan if self.Q3 is None else self.Q3])]
        return np.hstack(parts)[idx] if self.t.size else np.zeros((0, len(self.columns())))

    def switch_count(self) -> int:
        return int(np.count_nonzero(np.diff(self.gate.astype(int))))

    def on_off_cycles(self) -> int:
        return int(np.count_nonzero(np.diff(self.gate.astype(int)) == -1))


def empty_trajectory(n: int) -> Trajectory:
    z = np.zeros(0)
    return Trajectory(t=z, x=np.zeros((0, n)), x_r=z, e=np.zeros((0, n)), e_u=z, e_a=z,
                      u_raw=z, u=z, g_u_tau=z, tau=z, tau_hat=0.0, nu=z,
                      gate=np.zeros(0, dtype=np.int8), clamp=np.zeros(0, dtype=np.int8))


_STATUS_TEXT = {
    _pykernel.NEGATIVE_STATE: "positivity violated",
    _pykernel.XN_FLOOR: "x_n fell to or below phi1",
    _pykernel.NON_FINITE: "non-finite value",
    _pykernel.DELAY_DOMAIN: "delay evaluated at non-positive x_n",
}


def rk4_step(f: Callable, t: float, y, dt: float):
    """One classical RK4 step for ``y' = f(t, y, side)``.

    ``side`` is ``"right"`` for the first stage, so that delayed lookups at the
    left end of the step see the right-hand limit of the history.
    """
    y = np.asarray(y, dtype=float)
    k1 = np.asarray(f(t, y, "right"))
    k2 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k1, "left"))
    k3 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k2, "left"))
    k4 = np.asarray(f(t + dt, y + dt * k3, "left"))
    return y + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def integrate_fixed(f: Callable, y0, dt: float, nsteps: int,
                    on_step: Optional[Callable] = None):
    """Fixed-step RK4 on the grid ``k * dt``; ``on_step(t, y)`` runs after each commit."""
    ys = [np.asarray(y0, dtype=float)]
    for k in range(nsteps):
        y = rk4_step(f, k * dt, ys[-1], dt)
        ys.append(y)
        if on_step is not None:
            on_step((k + 1) * dt, y)
    return np.arange(nsteps + 1) * dt, np.array(ys)


def run_scenario(scenario: Scenario, cfg: SimConfig, backend: Optional[str] = None,
                 check_resolution: bool = False) -> Trajectory:
    """Integrate the closed loop from t = 0 to ``cfg.t_end``.

    Raises :class:`SimulationError` on any runtime invariant violation.
    """
    plant = scenario.plant
    n = plant.n
    x0 = np.asarray(scenario.x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 has {x0.size} entries, expected {n}")
    if np.any(x0 < 0):
        raise ValueError("x0 must be in the positive orthant")
    if cfg.enable_delay:
        scenario.delay.check_slew_bound(plant.d[-1])
        if not x0[-1] > scenario.delay.phi1:
            raise ModelError(f"x_n(0) = {x0[-1]} <= phi1 = {scenario.delay.phi1}")
    if check_resolution:
        scenario.check_resolution(cfg)
    est = scenario.estimate() if x0[-1] > 0 else None
    tau_hat = est.tau_hat if est is not None else 0.0
    if cfg.enable_control and est is None:
        raise ModelError("delay estimate needs x_n(0) > 0")

    N = cfg.nsteps
    dt = cfg.dt
    coeffs = compute_coefficients(n)
    half_t = np.arange(2 * N + 3) * 0.5 * dt
    ref = scenario.reference.table(half_t, n)

    chain = rhs_extra = None
    if not plant.is_linear:
        def chain(x, j, g=None):
            return x1_derivative_chain(plant, x, j, g)

        def rhs_extra(x):
            extra = np.zeros(n)
            if plant.h_maps is not None:
                extra[:-1] = [h[0](x) for h in plant.h_maps]
            if plant.f_map:
                extra[-1] = plant.f_map[0](x)
            return extra

    sat, dl, g = scenario.saturation, scenario.delay, scenario.gains
    args = (n, np.array(plant.d), x1_derivative_rows(plant), coeffs.as_array(), ref, x0,
            dt, N, bool(cfg.enable_saturation), sat.beta, sat.k_s, sat.eta,
            bool(cfg.enable_delay), dl.gamma, dl.k_d, dl.phi1,
            bool(cfg.enable_control), g.k, g.lam, g.alpha, tau_hat, POSITIVITY_TOL)
    if chain is not None:
        out, status, clamps = _pykernel.run_loop(*args, chain=chain, rhs_extra=rhs_extra)
    else:
        out, status, clamps = _backend.get_run_loop(backend)(*args)

    code, at, comp, value = status
    if code != _pykernel.OK:
        raise SimulationError(f"{_STATUS_TEXT[code]}: component x{comp + 1} = {value!r} "
                              f"at t = {at * dt:g} ({scenario.name})")

    traj = Trajectory(t=np.arange(N + 1) * dt, x=out["x"], x_r=ref[: 2 * N + 1: 2, 0],
                      e=out["e"], e_u=out["e_u"], e_a=out["e_a"], u_raw=out["u_raw"],
                      u=out["u"], g_u_tau=out["g_u_tau"], tau=out["tau"], tau_hat=tau_hat,
                      nu=out["nu"], gate=out["gate"], clamp=out["clamp"], gains=g, dt=dt,
                      stride=int(cfg.record_stride), state_clamps=clamps)
    if cfg.psi is not None:
        z = np.column_stack([traj.e, traj.e_u, traj.e_a])
        norms = np.linalg.norm(z, axis=1)
        over = np.flatnonzero(~(norms < cfg.psi))
        if over.size:
            i = int(over[0])
            raise ErrorBoundExceeded(f"|z| = {norms[i]:.6g} >= psi = {cfg.psi:g} "
                                     f"at t = {traj.t[i]:g} ({scenario.name})")
    if cfg.monitor_enabled and cfg.enable_control:
        w1, w2, w3 = cfg.lk_weights
        traj.V, traj.Q1, traj.Q2, traj.Q3 = lyapunov_eval(
            traj.t, traj.e, traj.e_u, traj.e_a, traj.u_dot, traj.tau,
            (w1, w2, w3), tau_hat, scenario.tau_tilde_bar)
    return traj


def _cumtrapz(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    c = np.zeros_like(f, dtype=float)
    if f.size > 1:
        c[1:] = np.cumsum(0.5 * np.diff(t) * (f[1:] + f[:-1]))
    return c


def _cum_at(t: np.ndarray, f: np.ndarray, C: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid integral of the piecewise-linear ``f`` evaluated at ``q``.

    Points before ``t[0]`` contribute nothing (signals are zero before the start).
    """
    q = np.clip(q, t[0], t[-1])
    i = np.clip(np.searchsorted(t, q, side="right") - 1, 0, t.size - 2)
    h = q - t[i]
    slope = (f[i + 1] - f[i]) / (t[i + 1] - t[i])
    fq = f[i] + slope * h
    return C[i] + 0.5 * h * (f[i] + fq)


def lyapunov_eval(t, e, e_u, e_a, u_dot, tau, lk_weights, tau_hat: float,
                  tau_tilde_bar: float):
    """V, Q1, Q2, Q3 at every sample of a recorded window.

    Q1 and Q2 integrate e_a^2 over the last tau_hat and tau(t); Q3 is the
    double integral of u_dot^2 over the last L = tau_tilde_bar + tau_hat,
    evaluated as the single integral with weight (theta - t + L).  Signals are
    taken as zero before t = 0; a window that starts before the first sample
    of a trajectory excerpt (t[0] > 0) is an error.
    """
    t = np.asarray(t, dtype=float)
    e = np.atleast_2d(np.asarray(e, dtype=float))
    if e.shape[0] != t.size:
        e = e.T
    e_u, e_a, u_dot, tau = (np.asarray(a, dtype=float) for a in (e_u, e_a, u_dot, tau))
    w1, w2, w3 = lk_weights
    L = tau_tilde_bar + tau_hat
    if t.size < 2:
        raise ValueError("need at least two samples")
    if t[0] > 0:
        raise ValueError("insufficient window coverage: trajectory excerpt starts at "
                         f"t={t[0]:g}, windows need the record from t=0")
    sq = e_a ** 2
    w = u_dot ** 2
    Csq = _cumtrapz(t, sq)
    Cw = _cumtrapz(t, w)
    Ctw = _cumtrapz(t, t * w)

    def window(f, C, start):
        return C - _cum_at(t, f, C, start)

    Q1 = w1 * window(sq, Csq, t - tau_hat)
    Q2 = w2 * window(sq, Csq, t - tau)
    start = t - L
    Q3 = w3 * (window(t * w, Ctw, start) - start * window(w, Cw, start))
    Q3 = np.maximum(Q3, 0.0)
    V = 0.5 * np.sum(e ** 2, axis=1) + 0.5 * sq + 0.5 * e_u ** 2 + Q1 + Q2 + Q3
    return V, Q1, Q2, Q3


@dataclass
class Metrics:
    ise: float
    ultimate_band: float
    settling_time: Optional[float]
    band_60_80: float
    switch_count: int
    on_off_cycles: int
    clamp_count: int
    state_clamps: int


def metrics(traj: Trajectory, band: float = 20.0) -> Metrics:
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    e1 = traj.e[:, 0]
    t = traj.t
    t_end = t[-1]
    ise = float(np.sum(e1[:-1] ** 2) * traj.dt) if e1.size > 1 else 0.0
    tail = t >= 0.8 * t_end - 1e-12
    mid = (t >= 0.6 * t_end - 1e-12) & (t < 0.8 * t_end - 1e-12)
    outside = np.flatnonzero(np.abs(e1) > band)
    if outside.size == 0:
        settle = float(t[0])
    elif outside[-1] == e1.size - 1:
        settle = None
    else:
        settle = float(t[outside[-1] + 1])
    return Metrics(
        ise=ise,
        ultimate_band=float(np.max(np.abs(e1[tail]))),
        settling_time=settle,
        band_60_80=float(np.max(np.abs(e1[mid]))) if mid.any() else math.nan,
        switch_count=traj.switch_count(),
        on_off_cycles=traj.on_off_cycles(),
        clamp_count=int(np.count_nonzero(traj.clamp)),
        state_clamps=traj.state_clamps,
    )
