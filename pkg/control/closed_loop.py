"""
One sample of the cascade: outer loop → q_d → inner loop → saturation →
plant step. The run scheduler and the governor prediction both go through
``closed_loop_step`` so that a prediction at the plant step size replays
the plant exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from control.inner_loop import InnerGains, attitude_error, torque_command
from control.outer_loop import DesiredRateTracker, OuterGains, desired_attitude, desired_thrust_vector
from dynamics.plant import (
    ControlCommand, PlantParams, UavState, cable_tension_monitor, constraint_multiplier,
    saturate_thrust, step, with_attitude,
)
from dynamics.so3_math import Quaternion, quat_compose


@dataclass(frozen=True)
class LoopConfig:
    """Controller configuration for the cascade.

    ``ideal_attitude`` replaces the inner loop by forcing q = q_d (ω = 0)
    at every sample. ``attitude_offset`` then holds a constant error,
    q = q_d ∘ offset, used to measure the outer loop's gain.
    """

    outer: OuterGains
    inner: InnerGains
    ideal_attitude: bool = False
    attitude_offset: Quaternion | None = None


@dataclass(frozen=True)
class StepSignals:
    state: UavState          # state the command acted on (forced attitude in ideal mode)
    F_d: np.ndarray
    q_d: Quaternion
    q_tilde: Quaternion
    T_raw: float
    T: float
    tau: np.ndarray
    tension: float
    multiplier: float
    omega_d: np.ndarray

    @property
    def saturated(self) -> bool:
        return self.T != self.T_raw


def compute_control(state: UavState, p_ref: np.ndarray, loop: LoopConfig, params: PlantParams,
                    rate_tracker: DesiredRateTracker | None = None) -> StepSignals:
    """Outer loop to q_d and ω_d, then the inner loop on the resulting error.

    ω_d comes from ``rate_tracker`` when given (it is advanced by one sample)
    and is zero otherwise.
    """
    F_d = desired_thrust_vector(state.p, state.v, p_ref, loop.outer, params)
    dec, q_d = desired_attitude(F_d, loop.outer.psi)
    omega_d = rate_tracker.update(q_d) if rate_tracker is not None else np.zeros(3)

    if loop.ideal_attitude:
        q_forced = q_d if loop.attitude_offset is None else quat_compose(q_d, loop.attitude_offset)
        state = with_attitude(state, q_forced)
        q_tilde = attitude_error(state.q, q_d)
        tau = np.zeros(3)
    else:
        q_tilde = attitude_error(state.q, q_d)
        tau = torque_command(q_tilde, state.omega, loop.inner)

    T = saturate_thrust(dec.T, params)
    tension = cable_tension_monitor(state, T, params)
    multiplier = constraint_multiplier(state, T, params)
    return StepSignals(state=state, F_d=F_d, q_d=q_d, q_tilde=q_tilde, T_raw=dec.T, T=T,
                       tau=tau, tension=tension, multiplier=multiplier, omega_d=omega_d)


def closed_loop_step(state: UavState, p_ref: np.ndarray, loop: LoopConfig,
                     params: PlantParams, dt: float,
                     rate_tracker: DesiredRateTracker | None = None) -> tuple[UavState, StepSignals]:
    signals = compute_control(state, p_ref, loop, params, rate_tracker)
    cmd = ControlCommand(T=signals.T, tau=signals.tau, q_d=signals.q_d, omega_d=signals.omega_d)
    return step(signals.state, cmd, dt, params), signals
