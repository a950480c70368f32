"""Input history with delayed lookup, and analytic reference trajectories."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P


class HistoryError(ValueError):
    pass


class InputHistory:
    """Time-ordered record of the applied input u(t).

    Lookups at or before the start time (or at t <= 0) return 0, queries past
    the newest sample hold the last value, everything in between is linearly
    interpolated.  ``side="right"`` asks for the right-hand limit, which only
    differs from the default at the start boundary; the integrator uses it for
    the first stage of a step so that a step beginning exactly on a history
    discontinuity sees the value inside the step.
    """

    def __init__(self, t_start: float = 0.0):
        self.t_start = float(t_start)
        self._t: list[float] = []
        self._u: list[float] = []

    def __len__(self):
        return len(self._t)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self._t)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self._u)

    def append(self, t: float, u: float) -> "InputHistory":
        if self._t and not t > self._t[-1]:
            raise HistoryError(f"non-monotone timestamp {t} after {self._t[-1]}")
        if u < 0:
            raise HistoryError(f"negative input {u} at t={t}")
        self._t.append(float(t))
        self._u.append(float(u))
        return self

    def sample(self, t: float, side: str = "left") -> float:
        lo = max(self.t_start, 0.0)
        if t < lo or (t == lo and side != "right") or not self._t:
            return 0.0
        ts = self._t
        if t >= ts[-1]:
            return self._u[-1]
        if t <= ts[0]:
            return self._u[0]
        i = bisect.bisect_right(ts, t) - 1
        frac = (t - ts[i]) / (ts[i + 1] - ts[i])
        return self._u[i] + frac * (self._u[i + 1] - self._u[i])

    def truncate_before(self, t: float):
        """Drop samples no lookup at or after ``t`` can reach."""
        i = bisect.bisect_right(self._t, t) - 1
        if i > 0:
            del self._t[:i]
            del self._u[:i]


def history_append(h: InputHistory, t: float, u: float) -> InputHistory:
    return h.append(t, u)


def history_sample(h: InputHistory, t: float) -> float:
    return h.sample(t)


KINDS = ("tanh_squared", "sinusoid", "custom")


@dataclass
class ReferenceTrajectory:
    """Reference x_r(t) with closed-form derivatives.

    ``tanh_squared``: amplitude * tanh(rate t)^2 + offset
    ``sinusoid``:     amplitude * sin(rate t) + offset
    ``custom``:       ``derivatives[j](t)`` supplies the j-th derivative
    """

    kind: str
    amplitude: float = 0.0
    rate: float = 0.0
    offset: float = 0.0
    max_order: int = 4
    derivatives: Optional[Sequence[Callable[[float], float]]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reference kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "custom":
            if not self.derivatives:
                raise ValueError("custom reference needs a derivatives list")
            self.max_order = len(self.derivatives) - 1
        elif self.kind == "tanh_squared":
            # d/dt p(s) = rate (1 - s^2) p'(s) with s = tanh(rate t)
            polys = [np.array([0.0, 0.0, self.amplitude])]
            dsech = np.array([self.rate, 0.0, -self.rate])
            for _ in range(self.max_order):
                polys.append(P.polymul(dsech, P.polyder(polys[-1])))
            self._polys = polys

    def __call__(self, t: float, order: int = 0) -> float:
        return reference_eval(self, t, order)

    def table(self, times: np.ndarray, max_order: int) -> np.ndarray:
        """Array of shape (len(times), max_order+1) with all derivatives."""
        times = np.asarray(times, dtype=float)
        if max_order > self.max_order:
            raise ValueError(f"order {max_order} exceeds max_order {self.max_order}")
        out = np.empty((times.size, max_order + 1))
        if self.kind == "tanh_squared":
            s = np.tanh(self.rate * times)
            for j in range(max_order + 1):
                out[:, j] = P.polyval(s, self._polys[j])
            out[:, 0] += self.offset
        elif self.kind == "sinusoid":
            for j in range(max_order + 1):
                out[:, j] = self.amplitude * self.rate ** j * np.sin(self.rate * times + j * math.pi / 2)
            out[:, 0] += self.offset
        else:
            for j in range(max_order + 1):
                out[:, j] = [self.derivatives[j](t) for t in times]
        return out


def reference_eval(r: ReferenceTrajectory, t: float, order: int = 0) -> float:
    if order < 0 or order > r.max_order:
        raise ValueError(f"derivative order {order} outside 0..{r.max_order}")
    if r.kind == "custom":
        return float(r.derivatives[order](t))
    return float(r.table(np.array([t]), order)[0, order])
