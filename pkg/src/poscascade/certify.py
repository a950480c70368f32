"""Gain conditions, bounding constants and ultimate-bound radius for the closed loop.

Conditions (all strict):

    eps2 < 2
    lam > alpha/(2 eps1) + 1/(2 eps2)
    omega3 > 4 tau_hat (alpha eps1 / 2 + k^2 / (4 omega1))
    tau_tilde_bar < (k alpha/8 - omega1 - omega2 - alpha/2 - omega3 k tau_hat) / (omega3 k)
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .controller import ControllerGains
from .model import DelayLaw, ModelError

CONDITIONS = ("eps2", "lambda", "omega3", "tau_tilde")


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class AnalysisParams:
    eps1: float
    eps2: float
    omega1: float
    omega3: float
    tau_hat: float
    omega2: float = 0.1
    tau_tilde_bar: float = 0.0
    phi2: float = 4.0
    c1: float = 0.0
    m: float = 0.0
    psi: float = 1e7

    def validate(self):
        for name in ("eps1", "eps2", "omega1", "omega2", "omega3", "tau_hat", "phi2", "psi"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise CertificateError(f"{name} must be a finite positive number, got {v}")
        for name in ("tau_tilde_bar", "c1", "m"):
            if getattr(self, name) < 0:
                raise CertificateError(f"{name} must be >= 0")


@dataclass
class Certificate:
    sigma: float
    delta: float
    uub: Optional[float]
    conditions: dict
    feasible: bool
    omega2_definitional: float
    params: Optional[AnalysisParams] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.params is not None:
            d["params"] = asdict(self.params)
        return d


def _tau_bound(g: ControllerGains, a: AnalysisParams) -> float:
    num = g.k * g.alpha / 8 - a.omega1 - a.omega2 - g.alpha / 2 - a.omega3 * g.k * a.tau_hat
    return num / (a.omega3 * g.k)


def check_conditions(g: ControllerGains, a: AnalysisParams) -> dict:
    """Each gain condition as a named flag, plus ``feasible`` for the conjunction."""
    a.validate()
    flags = {
        "eps2": a.eps2 < 2,
        "lambda": g.lam > g.alpha / (2 * a.eps1) + 1 / (2 * a.eps2),
        "omega3": a.omega3 > 4 * a.tau_hat * (g.alpha * a.eps1 / 2 + g.k ** 2 / (4 * a.omega1)),
        "tau_tilde": a.tau_tilde_bar < _tau_bound(g, a),
    }
    flags["feasible"] = all(flags[c] for c in CONDITIONS)
    return flags


def compute_sigma(g: ControllerGains, a: AnalysisParams) -> float:
    return min(
        1.0,
        1 - a.eps2 / 2,
        g.lam - (g.alpha / (2 * a.eps1) + 1 / (2 * a.eps2)),
        a.omega3 / (4 * a.tau_hat) - (g.alpha * a.eps1 / 2 + g.k ** 2 / (4 * a.omega1)),
        g.k * g.alpha / 8,
    )


def compute_delta(a: AnalysisParams, sigma: float, g: ControllerGains) -> float:
    return 0.5 * min(
        sigma / 2,
        a.omega3 * g.k ** 2 / (4 * a.omega1),
        a.omega3 * g.k ** 2 / (4 * a.omega2),
        1 / (4 * (a.tau_tilde_bar + a.tau_hat)),
    )


def compute_uub(g: ControllerGains, a: AnalysisParams, delta: float) -> float:
    if not delta > 0:
        raise CertificateError(f"Delta = {delta:.6g} <= 0: no ultimate bound")
    num = 2 * a.c1 ** 2 + g.k * g.alpha ** 2 * a.tau_tilde_bar ** 2 * a.m ** 2
    return math.sqrt(num / (g.k * g.alpha * delta))


def omega2_definitional(g: ControllerGains, phi2: float) -> float:
    """k alpha / (1 - phi2); negative whenever phi2 > 1."""
    if phi2 == 1:
        return math.inf
    return g.k * g.alpha / (1 - phi2)


def certify(g: ControllerGains, a: AnalysisParams, law: Optional[DelayLaw] = None,
            d_n: Optional[float] = None) -> Certificate:
    """Evaluate conditions and constants; the slew guard on ``law`` runs first."""
    if law is not None:
        if d_n is None:
            raise CertificateError("slew guard needs d_n")
        thr = law.slew_threshold(d_n)
        if not a.phi2 > thr:
            raise CertificateError(f"phi2 = {a.phi2} must exceed d_n*k_d*gamma*phi1^-k_d = {thr:.6g}")
    flags = check_conditions(g, a)
    sigma = compute_sigma(g, a)
    delta = compute_delta(a, sigma, g)
    feasible = flags.pop("feasible")
    uub = compute_uub(g, a, delta) if (feasible and delta > 0) else None
    return Certificate(sigma=sigma, delta=delta, uub=uub, conditions=flags,
                       feasible=feasible and delta > 0,
                       omega2_definitional=omega2_definitional(g, a.phi2), params=a)


@dataclass
class SearchResult:
    feasible: bool
    params: Optional[AnalysisParams]
    certificate: Optional[Certificate]
    blocking: Optional[str] = None
    unsatisfiable: list = field(default_factory=list)
    evaluated: int = 0

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "params": asdict(self.params) if self.params else None,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "blocking": self.blocking,
            "unsatisfiable": list(self.unsatisfiable),
            "evaluated": self.evaluated,
        }


AXES = ("eps1", "eps2", "omega1", "omega3", "tau_tilde_bar")


def _evaluate(g: ControllerGains, tau_hat: float, omega2: float, pts: dict):
    """Vectorized flags and Delta over broadcast parameter arrays."""
    e1, e2, w1, w3, tt = (pts[a] for a in AXES)
    k, lam, al = g.k, g.lam, g.alpha
    f_eps2 = e2 < 2
    f_lam = lam > al / (2 * e1) + 1 / (2 * e2)
    f_w3 = w3 > 4 * tau_hat * (al * e1 / 2 + k ** 2 / (4 * w1))
    bound = (k * al / 8 - w1 - omega2 - al / 2 - w3 * k * tau_hat) / (w3 * k)
    f_tau = tt < bound
    sigma = np.minimum.reduce(np.broadcast_arrays(
        1.0, 1 - e2 / 2, lam - (al / (2 * e1) + 1 / (2 * e2)),
        w3 / (4 * tau_hat) - (al * e1 / 2 + k ** 2 / (4 * w1)), k * al / 8))
    delta = 0.5 * np.minimum.reduce(np.broadcast_arrays(
        sigma / 2, w3 * k ** 2 / (4 * w1), w3 * k ** 2 / (4 * omega2),
        1 / (4 * (tt + tau_hat))))
    flags = dict(zip(CONDITIONS, np.broadcast_arrays(f_eps2, f_lam, f_w3, f_tau)))
    return flags, delta


def feasibility_search(g: ControllerGains, tau_hat: float, phi2: float = 4.0,
                       omega2: float = 0.1, lo: float = 1e-3, hi: float = 1e3,
                       points: int = 13, c1: float = 0.0, m: float = 0.0) -> SearchResult:
    """Log-grid search over (eps1, eps2, omega1, omega3, tau_tilde_bar) maximizing Delta.

    One refinement pass evaluates the half-step neighbourhood of the best cell.
    Ties go to the lexicographically smallest grid index.  When nothing is
    feasible, ``blocking`` names the first condition (in the order eps2,
    lambda, omega3, tau_tilde) whose conjunction with its predecessors has no
    grid point, and ``unsatisfiable`` lists conditions false on the whole grid.
    """
    if not tau_hat > 0:
        raise CertificateError("tau_hat must be > 0 (conditions divide by 4 tau_hat)")
    if not omega2 > 0:
        raise CertificateError("omega2 must be > 0")
    grid = np.logspace(math.log10(lo), math.log10(hi), points)
    mesh = np.meshgrid(*([grid] * len(AXES)), indexing="ij", sparse=True)
    pts = dict(zip(AXES, mesh))
    flags, delta = _evaluate(g, tau_hat, omega2, pts)
    ok = np.logical_and.reduce([flags[c] for c in CONDITIONS])
    evaluated = int(ok.size)

    if not ok.any():
        running = np.ones(ok.shape, dtype=bool)
        blocking = None
        for c in CONDITIONS:
            running &= flags[c]
            if not running.any():
                blocking = c
                break
        unsat = [c for c in CONDITIONS if not flags[c].any()]
        return SearchResult(False, None, None, blocking, unsat, evaluated)

    score = np.where(ok, delta, -np.inf)
    best = np.unravel_index(int(np.argmax(score)), score.shape)
    best_vals = [grid[i] for i in best]
    best_delta = float(score[best])

    # refinement: geometric half-steps around the best cell
    step = (math.log10(hi) - math.log10(lo)) / (points - 1) / 2
    local = [np.array([v * 10 ** (-step), v, v * 10 ** step]) for v in best_vals]
    lmesh = np.meshgrid(*local, indexing="ij", sparse=True)
    lflags, ldelta = _evaluate(g, tau_hat, omega2, dict(zip(AXES, lmesh)))
    lok = np.logical_and.reduce([lflags[c] for c in CONDITIONS])
    evaluated += int(lok.size)
    lscore = np.where(lok, ldelta, -np.inf)
    lbest = np.unravel_index(int(np.argmax(lscore)), lscore.shape)
    if lscore[lbest] > best_delta:
        best_vals = [local[ax][i] for ax, i in enumerate(lbest)]

    params = AnalysisParams(**{k: float(v) for k, v in zip(AXES, best_vals)},
                            tau_hat=tau_hat, omega2=omega2, phi2=phi2, c1=c1, m=m)
    cert = certify(g, params)
    if not cert.feasible:  # self-consistency with the scalar path
        raise AssertionError(f"search returned a point rejected by check_conditions: {params}")
    return SearchResult(True, params, cert, None, [], evaluated)


def estimate_c1_m(traj, reference, d_n: float) -> tuple[float, float]:
    """Empirical bounds for the reference-side term and for |u''| along a run.

    c1 ~ max |d_n x_r^{(n)} + x_r^{(n+1)}| (no F map), m ~ max |d(u_dot)/dt| away
    from gate switches.
    """
    n = traj.n
    tab = reference.table(traj.t, n + 1)
    c1 = float(np.max(np.abs(d_n * tab[:, n] + tab[:, n + 1])))
    ud = traj.u_dot
    dud = np.diff(ud) / traj.dt
    smooth = (traj.gate[1:] == traj.gate[:-1])
    m = float(np.max(np.abs(dud[smooth]))) if smooth.any() else 0.0
    return c1, m
