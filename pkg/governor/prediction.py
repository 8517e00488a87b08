"""
Governor configuration, state, and the forward-simulation oracle behind
both governors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

import config
from control.closed_loop import LoopConfig, closed_loop_step, compute_control
from dynamics.plant import PlantParams, UavState


class GovernorConfigError(ValueError):
    """Raised for an unusable governor configuration."""


@dataclass(frozen=True)
class GovernorConfig:
    mode: str = "rg"                               # "rg" | "erg"
    horizon: float = config.GOVERNOR_HORIZON       # s
    dt_pred: float = config.GOVERNOR_DT_PRED       # s
    c_tol: float = config.GOVERNOR_C_TOL
    eta_nav: float = config.GOVERNOR_ETA_NAV       # m³
    kappa: float = config.GOVERNOR_KAPPA
    eps_margin: float = config.GOVERNOR_MARGIN     # N
    dsm: str = config.DSM_MODE                     # "clamped" | "unclamped"
    period_steps: int = config.GOVERNOR_PERIOD_STEPS
    scan_fallback: bool = True

    def validate(self) -> None:
        if self.mode not in ("rg", "erg"):
            raise GovernorConfigError(f"governor mode must be 'rg' or 'erg', got {self.mode!r}")
        if self.dsm not in ("clamped", "unclamped"):
            raise GovernorConfigError(f"DSM mode must be 'clamped' or 'unclamped', got {self.dsm!r}")
        if self.horizon <= 0.0 or self.dt_pred <= 0.0:
            raise GovernorConfigError("prediction horizon and step must be positive")
        if not 0.0 < self.c_tol < 1.0:
            raise GovernorConfigError(f"c_tol must lie in (0, 1), got {self.c_tol}")
        if self.eta_nav <= 0.0 or self.kappa < 0.0 or self.eps_margin < 0.0:
            raise GovernorConfigError("η_nav must be positive, κ and ε non-negative")
        if self.period_steps < 1:
            raise GovernorConfigError(f"governor period must be ≥ 1 step, got {self.period_steps}")


@dataclass(frozen=True)
class GovernorState:
    """Applied reference plus the governor's configuration and last decision."""

    p_a: np.ndarray
    config: GovernorConfig
    last_c: float = math.nan
    last_dsm: float = 0.0
    last_min_tension: float = math.nan

    def moved_to(self, p_a: np.ndarray, **fields) -> GovernorState:
        return replace(self, p_a=p_a, **fields)


class TensionPrediction(NamedTuple):
    min_tension: float
    thrust_feasible: bool


def predict_min_tension(state: UavState, p_a: np.ndarray, horizon: float, loop: LoopConfig,
                        params: PlantParams, dt_pred: float,
                        stop_below: float | None = None) -> TensionPrediction:
    """Minimum of T_c along the closed loop with p_a frozen for ``horizon`` seconds.

    Thrust feasibility means the pre-saturation command stayed within
    [0, T_max] at every sample. With ``stop_below`` set, the simulation
    returns as soon as the outcome is known to fall under that level.
    """
    n_steps = int(round(horizon / dt_pred))
    lowest = math.inf
    feasible = True
    for k in range(n_steps + 1):
        if k < n_steps:
            next_state, signals = closed_loop_step(state, p_a, loop, params, dt_pred)
        else:
            signals = compute_control(state, p_a, loop, params)
        lowest = min(lowest, signals.tension)
        feasible = feasible and 0.0 <= signals.T_raw <= params.T_max
        if stop_below is not None and (lowest < stop_below or not feasible):
            break
        if k < n_steps:
            state = next_state
            if not state.is_finite():
                return TensionPrediction(-math.inf, False)
    return TensionPrediction(lowest, feasible)
