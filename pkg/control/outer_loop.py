"""
Position controller on the sphere.

The outer loop steers the vehicle along the great circle towards the
reference with a tangential PD force, adds gravity compensation and a
constant pull on the cable, and turns the resulting thrust vector into a
magnitude plus a desired attitude (minimal tilt composed with yaw).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

import config
from dynamics.plant import PlantParams
from dynamics.so3_math import (
    Quaternion, Z_AXIS, quat_compose, quat_kinematics,
)


class DegenerateGeodesicError(ValueError):
    """Raised when the reference sits at (or beyond) the antipode."""


@dataclass(frozen=True)
class OuterGains:
    """Outer-loop gains and constants.

    ``mu`` is the geodesic regularizer (m²); ``None`` resolves to
    MU_RELATIVE·L² in :meth:`resolved`.
    """

    K_pt: float = config.KP_TANGENTIAL
    K_dt: float = config.KD_TANGENTIAL
    T_p: float = config.PULLING_TERM
    T_g: float = config.MASS * config.GRAVITY
    mu: float | None = None
    psi: float = config.YAW

    def resolved(self, params: PlantParams) -> OuterGains:
        """Gains with T_g tied to the plant weight and μ filled in."""
        mu = self.mu if self.mu is not None else config.MU_RELATIVE * params.L ** 2
        return OuterGains(self.K_pt, self.K_dt, self.T_p, params.weight, mu, self.psi)

    def validate(self, params: PlantParams) -> None:
        if self.K_pt <= 0.0 or self.K_dt <= 0.0:
            raise ValueError(f"outer gains must be positive, got K_pt={self.K_pt}, K_dt={self.K_dt}")
        if not params.T_c_min < self.T_p < params.T_max - params.weight:
            raise ValueError(
                f"pulling term T_p={self.T_p} N outside "
                f"({params.T_c_min}, {params.T_max - params.weight:.3f}) N"
            )
        if self.mu is not None and self.mu <= 0.0:
            raise ValueError(f"geodesic regularizer must be positive, got {self.mu}")
        if not -math.pi <= self.psi < math.pi:
            raise ValueError(f"yaw must lie in [−π, π), got {self.psi}")


@dataclass(frozen=True)
class ThrustDecomposition:
    T_dx: float
    T_dy: float
    T_dz: float
    T: float
    zeta_d: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.T_dx, self.T_dy, self.T_dz])


# ── Sphere geometry ─────────────────────────────────────────────────────────

def sphere_point(L: float, polar: float, azimuth: float = 0.0) -> np.ndarray:
    """Point on the sphere at ``polar`` radians from ẑ and ``azimuth`` about ẑ."""
    return L * np.array([math.sin(polar) * math.cos(azimuth),
                         math.sin(polar) * math.sin(azimuth),
                         math.cos(polar)])


def tangent_basis(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent pair (θ̂, φ̂) at p.

    φ̂ points along increasing azimuth and θ̂ = r̂ × φ̂ along increasing
    elevation. At the poles, where the azimuth is undefined, φ̂ = ŷ.
    """
    r_hat = p / np.linalg.norm(p)
    e = np.cross(Z_AXIS, r_hat)
    n = np.linalg.norm(e)
    phi_hat = e / n if n > 1e-12 else np.array([0.0, 1.0, 0.0])
    theta_hat = np.cross(r_hat, phi_hat)
    return theta_hat, phi_hat


def great_circle_dist(p: np.ndarray, p_d: np.ndarray, L: float) -> float:
    """Arc length between two points of the sphere of radius L."""
    # atan2 form: same value as L·arccos(⟨p̂, p̂_d⟩), accurate near 0 and π.
    return L * math.atan2(float(np.linalg.norm(np.cross(p, p_d))), float(p @ p_d))


def geodesic_tangent(p: np.ndarray, p_d: np.ndarray, mu: float) -> np.ndarray:
    """Unit tangent at p of the great circle towards p_d (zero when stalled)."""
    w = np.cross(np.cross(p, p_d), p)
    return w / max(float(np.linalg.norm(w)), mu)


def chord_bounds(p: np.ndarray, p_d: np.ndarray, L: float) -> tuple[float, float]:
    """Chord ‖p − p_d‖ and arc dist(p, p_d).

    On the sphere chord ≤ dist ≤ (π/2)·chord, so a norm on the chord bounds
    the geodesic error from both sides.
    """
    return float(np.linalg.norm(p - p_d)), great_circle_dist(p, p_d, L)


# ── Control law ─────────────────────────────────────────────────────────────

def tangential_command(p, v, p_d, gains: OuterGains, L: float) -> np.ndarray:
    """T_t·t̂ = dist·K_pt·t̂ − K_dt·v."""
    t_hat = geodesic_tangent(p, p_d, gains.mu)
    return great_circle_dist(p, p_d, L) * gains.K_pt * t_hat - gains.K_dt * v


def desired_thrust_vector(p, v, p_d, gains: OuterGains, params: PlantParams) -> np.ndarray:
    """F_d = T_t·t̂ + T_g·ẑ + T_p·r̂."""
    r_hat = p / np.linalg.norm(p)
    F_d = tangential_command(p, v, p_d, gains, params.L) + gains.T_p * r_hat
    F_d[2] += gains.T_g
    return F_d


def decompose_thrust(F_d) -> ThrustDecomposition:
    T_dx, T_dy, T_dz = (float(c) for c in F_d)
    horizontal = math.hypot(T_dx, T_dy)
    return ThrustDecomposition(
        T_dx=T_dx, T_dy=T_dy, T_dz=T_dz,
        T=math.sqrt(T_dx * T_dx + T_dy * T_dy + T_dz * T_dz),
        zeta_d=math.atan2(horizontal, T_dz),
    )


def min_rotation_quat(dec: ThrustDecomposition) -> Quaternion:
    """Smallest rotation taking ẑ onto the thrust direction.

    The axis is ẑ × F_d = [−T_dy, T_dx, 0]; vertical thrust returns the
    identity.
    """
    horizontal = math.hypot(dec.T_dx, dec.T_dy)
    if horizontal == 0.0:
        return Quaternion.identity()
    half = 0.5 * dec.zeta_d
    axis = np.array([-dec.T_dy, dec.T_dx, 0.0]) / horizontal
    return Quaternion(math.cos(half), math.sin(half) * axis)


def compose_yaw(q_zeta: Quaternion, psi: float) -> Quaternion:
    """q_d = q_ζ ∘ q_ψ; the yaw turns about the body thrust axis."""
    q_psi = Quaternion(math.cos(0.5 * psi), math.sin(0.5 * psi) * Z_AXIS)
    return quat_compose(q_zeta, q_psi)


def desired_attitude(F_d, psi: float) -> tuple[ThrustDecomposition, Quaternion]:
    dec = decompose_thrust(F_d)
    return dec, compose_yaw(min_rotation_quat(dec), psi)


def hover_attitude(p, gains: OuterGains, params: PlantParams) -> Quaternion:
    """Equilibrium attitude at rest on p: thrust along T_g·ẑ + T_p·r̂."""
    gains = gains.resolved(params)
    _, q_d = desired_attitude(desired_thrust_vector(p, np.zeros(3), p, gains, params), gains.psi)
    return q_d


def kp_feasible(p0, v0, p_d, K_pt: float, L: float, m: float = 1.0) -> bool:
    """Energy condition for convergence from (p0, v0) without crossing the antipode.

    K_pt/m > ‖v0‖² / (π²L² − dist²); for L = 1, m = 1 this is the familiar
    unit-sphere condition.

    Raises
    ------
    DegenerateGeodesicError
        If dist(p0, p_d) ≥ πL.
    """
    dist = great_circle_dist(np.asarray(p0, float), np.asarray(p_d, float), L)
    room = (math.pi * L) ** 2 - dist ** 2
    if room <= 0.0:
        raise DegenerateGeodesicError(f"reference at the antipode (dist = {dist:.6f} m)")
    v0 = np.asarray(v0, dtype=float)
    return K_pt / m > float(v0 @ v0) / room


def desired_rate_estimate(q_d_prev: Quaternion, q_d_now: Quaternion, dt: float) -> np.ndarray:
    """Body-rate estimate ω_d = 2·E(q_now)ᵀ(q_now − q_prev)/dt after sign alignment."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    prev = q_d_prev.as_array()
    now = q_d_now.as_array()
    if prev @ now < 0.0:
        now = -now
    q_now = Quaternion.from_array(now)
    return 2.0 * quat_kinematics(q_now).T @ (now - prev) / dt


@dataclass
class DesiredRateTracker:
    """Holds the previous q_d so successive calls yield ω_d; first call gives zero."""

    dt: float
    _previous: Quaternion | None = field(default=None, repr=False)

    def update(self, q_d: Quaternion) -> np.ndarray:
        if self._previous is None:
            omega_d = np.zeros(3)
        else:
            omega_d = desired_rate_estimate(self._previous, q_d, self.dt)
        self._previous = q_d
        return omega_d

    def reset(self) -> None:
        self._previous = None
