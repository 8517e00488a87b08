"""
Attitude controller: error quaternion, PD torque law, and the thrust
misalignment that the inner loop injects into the outer loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

import config
from dynamics.so3_math import (
    Quaternion, Z_AXIS, angle_axis, canonicalize, conjugate, normalize,
    quat_compose, quat_to_rot,
)


@dataclass(frozen=True)
class InnerGains:
    K_pq: float = config.KP_ATTITUDE
    K_dq: float = config.KD_ATTITUDE
    torque_limit: float | None = None      # N·m, off by default

    @classmethod
    def from_ladder(cls, K_pq: float, c: float = config.LADDER_C) -> InnerGains:
        """Gains on the ladder K_dq = c·√K_pq."""
        return cls(K_pq=K_pq, K_dq=c * math.sqrt(K_pq))

    def validate(self) -> None:
        if self.K_pq <= 0.0 or self.K_dq <= 0.0:
            raise ValueError(f"inner gains must be positive, got K_pq={self.K_pq}, K_dq={self.K_dq}")
        if self.torque_limit is not None and self.torque_limit <= 0.0:
            raise ValueError(f"torque limit must be positive, got {self.torque_limit}")


def attitude_error(q: Quaternion, q_d: Quaternion) -> Quaternion:
    """q̃ for R̃ = RᵀR_d, canonical (q̃0 ≥ 0).

    Computed as conj(q) ∘ q_d, the quaternion of quat_to_rot(q)ᵀ·quat_to_rot(q_d).
    """
    return canonicalize(normalize(quat_compose(conjugate(q), q_d)))


def torque_command(q_tilde: Quaternion, omega, gains: InnerGains) -> np.ndarray:
    """τ = K_pq·q̃_v − K_dq·ω, optionally clipped in norm."""
    tau = gains.K_pq * q_tilde.qv - gains.K_dq * np.asarray(omega, dtype=float)
    if gains.torque_limit is not None:
        n = np.linalg.norm(tau)
        if n > gains.torque_limit:
            tau *= gains.torque_limit / n
    return tau


def disturbance_exact(T: float, q_d: Quaternion, q_tilde: Quaternion) -> np.ndarray:
    """δ = T·R_d(R̃ᵀ − I₃)ẑ, the thrust misalignment seen by the outer loop."""
    R_tilde = quat_to_rot(q_tilde)
    return T * (quat_to_rot(q_d) @ (R_tilde.T @ Z_AXIS - Z_AXIS))


def error_angle(q_tilde: Quaternion) -> float:
    return angle_axis(q_tilde).angle


# ── Attitude-only response ──────────────────────────────────────────────────

@dataclass(frozen=True)
class AttitudeTrace:
    t: np.ndarray
    q_tilde: np.ndarray      # (n, 4), scalar first
    omega: np.ndarray        # (n, 3)
    zeta: np.ndarray         # (n,)


def _rates(y: np.ndarray, tau: np.ndarray, J: np.ndarray, J_inv: np.ndarray) -> np.ndarray:
    q0, qv, w = y[0], y[1:4], y[4:7]
    dy = np.empty(7)
    dy[0] = -0.5 * (qv @ w)
    dy[1:4] = 0.5 * (q0 * w + np.cross(qv, w))
    dy[4:7] = J_inv @ (tau - np.cross(w, J @ w))
    return dy


def attitude_response(q0: Quaternion, omega0, desired: Callable[[float], Quaternion],
                      gains: InnerGains, J: np.ndarray, dt: float,
                      duration: float) -> AttitudeTrace:
    """Integrate the rigid-body attitude under the PD law tracking ``desired(t)``.

    Torque is held over each RK4 step. Used for unforced decay checks,
    sinusoidal desired-rate forcing and the gain-ladder measurement.
    """
    J = np.asarray(J, dtype=float)
    J_inv = np.linalg.inv(J)
    n_steps = int(round(duration / dt))
    y = np.concatenate(([q0.q0], q0.qv, np.asarray(omega0, dtype=float)))

    t_log = np.empty(n_steps + 1)
    qt_log = np.empty((n_steps + 1, 4))
    w_log = np.empty((n_steps + 1, 3))
    zeta_log = np.empty(n_steps + 1)

    for k in range(n_steps + 1):
        t = k * dt
        q = Quaternion(float(y[0]), y[1:4])
        q_tilde = attitude_error(q, desired(t))
        t_log[k] = t
        qt_log[k] = q_tilde.as_array()
        w_log[k] = y[4:7]
        zeta_log[k] = error_angle(q_tilde)
        if k == n_steps:
            break
        tau = torque_command(q_tilde, y[4:7], gains)
        k1 = _rates(y, tau, J, J_inv)
        k2 = _rates(y + 0.5 * dt * k1, tau, J, J_inv)
        k3 = _rates(y + 0.5 * dt * k2, tau, J, J_inv)
        k4 = _rates(y + dt * k3, tau, J, J_inv)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y[0:4] /= np.linalg.norm(y[0:4])

    return AttitudeTrace(t=t_log, q_tilde=qt_log, omega=w_log, zeta=zeta_log)
