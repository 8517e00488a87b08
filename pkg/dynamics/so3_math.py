"""
Quaternion and rotation algebra shared by the plant, both control loops and
the certificates.

Convention: scalar-first storage q = (q0, qv), Hamilton product, active
rotations. ``quat_to_rot(a ∘ b) = quat_to_rot(a) · quat_to_rot(b)`` and
body-rate kinematics read q̇ = ½·E(q)·ω.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Z_AXIS = np.array([0.0, 0.0, 1.0])

# Orthonormality tolerance accepted by rot_to_quat.
ROTATION_TOL = 1e-6
# Below this vector-part norm the rotation angle is treated as zero.
_ZERO_ANGLE = 1e-15


class RotationMatrixError(ValueError):
    """Raised when a matrix handed to rot_to_quat is not a proper rotation."""


@dataclass(frozen=True)
class Quaternion:
    """Attitude quaternion, scalar part first."""

    q0: float
    qv: np.ndarray

    @classmethod
    def identity(cls) -> Quaternion:
        return cls(1.0, np.zeros(3))

    @classmethod
    def from_array(cls, values) -> Quaternion:
        arr = np.asarray(values, dtype=float)
        return cls(float(arr[0]), arr[1:4].copy())

    @classmethod
    def from_angle_axis(cls, angle: float, axis) -> Quaternion:
        """Rotation of ``angle`` radians about ``axis`` (normalized here)."""
        axis = np.asarray(axis, dtype=float)
        n = np.linalg.norm(axis)
        if n == 0.0:
            return cls.identity()
        half = 0.5 * angle
        return cls(float(np.cos(half)), np.sin(half) * axis / n)

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.q0], self.qv))

    def norm(self) -> float:
        return float(np.sqrt(self.q0 * self.q0 + self.qv @ self.qv))

    def normalized(self) -> Quaternion:
        return normalize(self)

    def conjugate(self) -> Quaternion:
        return conjugate(self)

    def canonical(self) -> Quaternion:
        return canonicalize(self)


@dataclass(frozen=True)
class AngleAxis:
    angle: float
    axis: np.ndarray


# ── Vector helpers ──────────────────────────────────────────────────────────

def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ w == np.cross(v, w)``."""
    x, y, z = v
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


# ── Quaternion algebra ──────────────────────────────────────────────────────

def normalize(q: Quaternion) -> Quaternion:
    n = q.norm()
    if n == 0.0:
        raise ValueError("cannot normalize the zero quaternion")
    return Quaternion(q.q0 / n, q.qv / n)


def conjugate(q: Quaternion) -> Quaternion:
    return Quaternion(q.q0, -q.qv)


def canonicalize(q: Quaternion) -> Quaternion:
    """Pick the representative with q0 ≥ 0.

    At q0 = 0 both signs qualify; the first non-zero vector component is
    made positive so the choice is deterministic.
    """
    if q.q0 > 0.0:
        return q
    if q.q0 < 0.0:
        return Quaternion(-q.q0, -q.qv)
    nonzero = np.flatnonzero(q.qv)
    if nonzero.size and q.qv[nonzero[0]] < 0.0:
        return Quaternion(0.0, -q.qv)
    return Quaternion(0.0, q.qv.copy())


def quat_compose(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product a ∘ b."""
    q0 = a.q0 * b.q0 - a.qv @ b.qv
    qv = a.q0 * b.qv + b.q0 * a.qv + np.cross(a.qv, b.qv)
    return Quaternion(float(q0), qv)


def quat_kinematics(q: Quaternion) -> np.ndarray:
    """E(q), the 4×3 map with q̇ = ½·E(q)·ω for body rates ω."""
    E = np.empty((4, 3))
    E[0] = -q.qv
    E[1:] = q.q0 * np.eye(3) + skew(q.qv)
    return E


def quat_exp_step(q: Quaternion, omega, dt: float) -> Quaternion:
    """Exact propagation of q̇ = ½E(q)ω over dt for constant body rate ω."""
    omega = np.asarray(omega, dtype=float)
    rate = np.linalg.norm(omega)
    if rate == 0.0:
        return q
    return normalize(quat_compose(q, Quaternion.from_angle_axis(rate * dt, omega / rate)))


# ── Conversions ─────────────────────────────────────────────────────────────

def quat_to_rot(q: Quaternion) -> np.ndarray:
    """Euler–Rodrigues map from a unit quaternion to its rotation matrix."""
    qv = q.qv
    return ((q.q0 * q.q0 - qv @ qv) * np.eye(3)
            + 2.0 * np.outer(qv, qv)
            + 2.0 * q.q0 * skew(qv))


def rot_to_quat(R) -> Quaternion:
    """Inverse Euler–Rodrigues map (Shepperd's branch selection).

    Returns the canonical representative, q0 ≥ 0.

    Raises
    ------
    RotationMatrixError
        If ``R`` is not orthonormal with determinant +1 within ROTATION_TOL.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise RotationMatrixError(f"expected a 3×3 matrix, got shape {R.shape}")
    ortho_err = np.linalg.norm(R.T @ R - np.eye(3))
    det = np.linalg.det(R)
    if ortho_err > ROTATION_TOL or abs(det - 1.0) > ROTATION_TOL:
        raise RotationMatrixError(
            f"not a proper rotation: ‖RᵀR − I‖_F = {ortho_err:.3e}, det = {det:.6f}"
        )

    trace = R[0, 0] + R[1, 1] + R[2, 2]
    if trace > 0.0:
        s = 2.0 * np.sqrt(trace + 1.0)
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s,
                      0.25 * s,
                      (R[0, 1] + R[1, 0]) / s,
                      (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s,
                      (R[0, 1] + R[1, 0]) / s,
                      0.25 * s,
                      (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s,
                      (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s,
                      0.25 * s])
    q /= np.linalg.norm(q)
    return canonicalize(Quaternion.from_array(q))


def angle_axis(q: Quaternion) -> AngleAxis:
    """Rotation angle in [0, π] and unit axis of a unit quaternion.

    The zero rotation reports the conventional axis ẑ.
    """
    q = canonicalize(q)
    s = float(np.linalg.norm(q.qv))
    if s < _ZERO_ANGLE:
        return AngleAxis(0.0, Z_AXIS.copy())
    return AngleAxis(2.0 * float(np.arctan2(s, q.q0)), q.qv / s)
