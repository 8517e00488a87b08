"""
Constrained rigid-body dynamics of the tethered quadrotor.

The vehicle is a rigid body whose position is held on the sphere ‖p‖ = L
by the cable reaction −λ·r̂. Two scalars live along the cable axis:

* ``cable_tension_monitor``: T_c = ⟨F_a, r̂⟩, the active-force projection.
  This is the quantity the governors protect and the audit checks.
* ``constraint_multiplier``: λ = T_c + m‖v‖²/L, the reaction that keeps the
  acceleration tangent. The integrator uses λ; telemetry logs both.

States are advanced with classical RK4 under a zero-order-hold command,
followed by projection back onto the constraint manifold.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

import config
from dynamics.so3_math import Quaternion, Z_AXIS, quat_to_rot


class PlantParamsError(ValueError):
    """Raised for physically inconsistent vehicle parameters."""


class DegenerateCableError(ValueError):
    """Raised when the position collapses onto the anchor (‖p‖ = 0)."""


# ── Parameter and state containers ─────────────────────────────────────────

@dataclass(frozen=True)
class PlantParams:
    m: float = config.MASS
    J: np.ndarray = field(default_factory=lambda: np.diag(config.INERTIA_DIAG))
    L: float = config.CABLE_LENGTH
    g: float = config.GRAVITY
    T_max: float = config.THRUST_MAX
    T_c_min: float = config.TENSION_MIN

    def __post_init__(self) -> None:
        J = np.asarray(self.J, dtype=float)
        object.__setattr__(self, "J", J)
        if self.m <= 0.0:
            raise PlantParamsError(f"mass must be positive, got {self.m}")
        if self.L <= 0.0:
            raise PlantParamsError(f"cable length must be positive, got {self.L}")
        if self.g <= 0.0:
            raise PlantParamsError(f"gravity must be positive, got {self.g}")
        if self.T_c_min < 0.0:
            raise PlantParamsError(f"minimum tension must be ≥ 0, got {self.T_c_min}")
        if J.shape != (3, 3) or not np.allclose(J, J.T, atol=1e-12):
            raise PlantParamsError("inertia must be a symmetric 3×3 matrix")
        if np.linalg.eigvalsh(J).min() <= 0.0:
            raise PlantParamsError("inertia must be positive definite")
        if self.T_max <= self.m * self.g:
            raise PlantParamsError(
                f"thrust limit {self.T_max} N does not exceed the weight {self.m * self.g:.3f} N"
            )
        object.__setattr__(self, "_J_inv", np.linalg.inv(J))

    @property
    def J_inv(self) -> np.ndarray:
        return self._J_inv

    @property
    def weight(self) -> float:
        return self.m * self.g

    @property
    def lambda_max(self) -> float:
        """Largest principal inertia λ_M(J)."""
        return float(np.linalg.eigvalsh(self.J).max())


@dataclass(frozen=True)
class UavState:
    p: np.ndarray
    v: np.ndarray
    q: Quaternion
    omega: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.p, self.v, [self.q.q0], self.q.qv, self.omega))

    @classmethod
    def from_vector(cls, x: np.ndarray) -> UavState:
        return cls(p=x[0:3].copy(), v=x[3:6].copy(),
                   q=Quaternion(float(x[6]), x[7:10].copy()),
                   omega=x[10:13].copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))


@dataclass(frozen=True)
class ControlCommand:
    T: float
    tau: np.ndarray
    q_d: Quaternion = field(default_factory=Quaternion.identity)
    omega_d: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class StateDerivative:
    p_dot: np.ndarray
    v_dot: np.ndarray
    q_dot: np.ndarray
    omega_dot: np.ndarray


# ── Forces ──────────────────────────────────────────────────────────────────

def _radial(p: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(p)
    if r == 0.0:
        raise DegenerateCableError("position at the anchor, cable direction undefined")
    return p / r


def active_force(state: UavState, T: float, params: PlantParams) -> np.ndarray:
    """F_a = T·R(q)·ẑ − m·g·ẑ."""
    return T * (quat_to_rot(state.q) @ Z_AXIS) - params.weight * Z_AXIS


def cable_tension_monitor(state: UavState, T: float, params: PlantParams) -> float:
    """T_c = ⟨F_a, r̂⟩, the tautness quantity that must stay ≥ T_c,min."""
    return float(active_force(state, T, params) @ _radial(state.p))


def constraint_multiplier(state: UavState, T: float, params: PlantParams) -> float:
    """λ = ⟨F_a, r̂⟩ + m‖v‖²/L."""
    L = np.linalg.norm(state.p)
    return cable_tension_monitor(state, T, params) + params.m * float(state.v @ state.v) / L


def saturate_thrust(T_raw: float, params: PlantParams) -> float:
    return float(min(max(T_raw, 0.0), params.T_max))


# ── Equations of motion ─────────────────────────────────────────────────────

def _derivative(x: np.ndarray, T: float, tau: np.ndarray, params: PlantParams) -> np.ndarray:
    p, v = x[0:3], x[3:6]
    q0, qx, qy, qz = x[6], x[7], x[8], x[9]
    w = x[10:13]

    r = np.sqrt(p @ p)
    if r == 0.0:
        raise DegenerateCableError("position reached the anchor inside an integrator stage")
    r_hat = p / r

    # Third column of R(q): the body thrust axis in the inertial frame.
    b3 = np.array([2.0 * (qx * qz + q0 * qy),
                   2.0 * (qy * qz - q0 * qx),
                   q0 * q0 - qx * qx - qy * qy + qz * qz])
    F_a = T * b3
    F_a[2] -= params.weight
    lam = F_a @ r_hat + params.m * (v @ v) / r

    qv = x[7:10]
    dx = np.empty(13)
    dx[0:3] = v
    dx[3:6] = (F_a - lam * r_hat) / params.m
    dx[6] = -0.5 * (qv @ w)
    dx[7:10] = 0.5 * (q0 * w + np.cross(qv, w))
    dx[10:13] = params.J_inv @ (tau - np.cross(w, params.J @ w))
    return dx


def dynamics_deriv(state: UavState, cmd: ControlCommand, params: PlantParams) -> StateDerivative:
    """Time derivative of the constrained state under a saturated command."""
    dx = _derivative(state.as_vector(), cmd.T, np.asarray(cmd.tau, dtype=float), params)
    return StateDerivative(p_dot=dx[0:3], v_dot=dx[3:6],
                           q_dot=dx[6:10], omega_dot=dx[10:13])


def _project(x: np.ndarray, L: float) -> np.ndarray:
    r_hat = _radial(x[0:3])
    x[0:3] = L * r_hat
    x[3:6] -= (x[3:6] @ r_hat) * r_hat
    x[6:10] /= np.linalg.norm(x[6:10])
    return x


def step(state: UavState, cmd: ControlCommand, dt: float, params: PlantParams) -> UavState:
    """One RK4 step of length dt, then projection onto ‖p‖ = L, ⟨p, v⟩ = 0, ‖q‖ = 1."""
    if dt <= 0.0:
        raise ValueError(f"step size must be positive, got {dt}")
    tau = np.asarray(cmd.tau, dtype=float)
    x = state.as_vector()
    k1 = _derivative(x, cmd.T, tau, params)
    k2 = _derivative(x + 0.5 * dt * k1, cmd.T, tau, params)
    k3 = _derivative(x + 0.5 * dt * k2, cmd.T, tau, params)
    k4 = _derivative(x + dt * k3, cmd.T, tau, params)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return UavState.from_vector(_project(x_next, params.L))


def mechanical_energy(state: UavState, params: PlantParams) -> float:
    """½m‖v‖² + m·g·p_z; conserved when T = 0 and τ = 0."""
    return 0.5 * params.m * float(state.v @ state.v) + params.weight * float(state.p[2])


def with_attitude(state: UavState, q: Quaternion, omega=None) -> UavState:
    """Copy of ``state`` with the attitude (and optionally the rate) replaced."""
    return replace(state, q=q, omega=np.zeros(3) if omega is None else np.asarray(omega, dtype=float))
