"""Gated switching control of positive cascades with a state-dependent
power-law input delay and logistic input saturation."""

__version__ = "0.1.0"

from .controller import ControllerGains, DelayEstimate, control_output, gate, nu_rate, u_dot_model
from .model import (CascadeParams, DelayLaw, SaturationParams, coagulation, eval_delay,
                    eval_saturation, metzler_check, rhs, x1_derivative_chain)
from .sim import Scenario, SimConfig, Trajectory, lyapunov_eval, metrics, run_scenario

__all__ = [
    "CascadeParams", "ControllerGains", "DelayEstimate", "DelayLaw", "SaturationParams",
    "Scenario", "SimConfig", "Trajectory", "coagulation", "control_output", "eval_delay",
    "eval_saturation", "gate", "lyapunov_eval", "metrics", "metzler_check", "nu_rate", "rhs",
    "run_scenario", "u_dot_model", "x1_derivative_chain",
]
