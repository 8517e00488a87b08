"""
Closed-form certificates for the cascade.

Inner loop: quadratic Lyapunov function on (q̃, ω) with cross weight η,
the matrices Q̄_in, D̄_in of its derivative bound and the resulting
asymptotic gain γ_in. Outer loop: Lyapunov function on the sphere with
cross weight ε, its decay matrix Q, the ISS threshold and the admissible
disturbance level. Plus the thrust-misalignment bound and the small-gain
test that composes the two loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

import config
from control.inner_loop import InnerGains
from control.outer_loop import (
    OuterGains, geodesic_tangent, great_circle_dist, tangent_basis,
)
from dynamics.plant import PlantParams
from dynamics.so3_math import Quaternion


class CertificateError(ValueError):
    """Raised when a certificate parameter leaves its admissible interval."""


# ── 2×2 eigenvalues ─────────────────────────────────────────────────────────

def eig2(M: np.ndarray) -> tuple[float, float]:
    """Closed-form eigenvalues (ascending) of a symmetric 2×2 matrix."""
    a, b, d = float(M[0, 0]), float(M[0, 1]), float(M[1, 1])
    mean = 0.5 * (a + d)
    radius = math.hypot(0.5 * (a - d), b)
    return mean - radius, mean + radius


def checked_min_eigenvalue(M: np.ndarray) -> float:
    """Smallest eigenvalue, closed form cross-checked against LAPACK."""
    closed = eig2(M)
    iterative = linalg.eigvalsh(M)
    scale = max(1.0, float(np.abs(M).max()))
    if abs(closed[0] - iterative[0]) > 1e-12 * scale or abs(closed[1] - iterative[1]) > 1e-12 * scale:
        raise CertificateError(f"eigenvalue mismatch: closed form {closed}, iterative {tuple(iterative)}")
    return closed[0]


# ── Lemma: thrust misalignment ──────────────────────────────────────────────

def lemma2_bound(T: float, zeta_tilde: float) -> float:
    """Class-K bound √6·T·|ζ̃| on ‖δ‖."""
    return math.sqrt(6.0) * T * abs(zeta_tilde)


# ── Inner loop ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class InnerCertificate:
    eta: float
    Qbar: np.ndarray
    Dbar: np.ndarray
    gamma_in: float
    lambda_M: float

    @property
    def iss_factor(self) -> float:
        """‖D̄‖/λ_min(Q̄): beyond this many ‖ω_d‖∞ the state norm forces V̇_in < 0."""
        return float(np.linalg.norm(self.Dbar)) / checked_min_eigenvalue(self.Qbar)


def eta_interval(K_pq: float, K_dq: float, J) -> tuple[float, float]:
    """Open interval (0, η_max) for the inner cross weight."""
    lam = float(linalg.eigvalsh(np.asarray(J, dtype=float)).max())
    eta_max = min(K_dq / lam, 2.0 * K_pq * K_dq / (4.0 * lam * K_pq + K_dq ** 2))
    return 0.0, eta_max


def lyapunov_inner(q_tilde: Quaternion, omega, gains: InnerGains, eta: float, J) -> float:
    """V_in = 2K_pq(1 − q̃0) + ½[e; ω]ᵀ[[4ηK_dq·I, 2ηJ], [2ηJ, J]][e; ω].

    ``e`` is the vector part of the desired-to-body error, −q̃_v, whose
    kinematics are ½E(·)(ω − ω_d) under the torque law in use.
    """
    J = np.asarray(J, dtype=float)
    omega = np.asarray(omega, dtype=float)
    e = -q_tilde.qv
    quadratic = (4.0 * eta * gains.K_dq * (e @ e)
                 + 4.0 * eta * (e @ J @ omega)
                 + omega @ J @ omega)
    return 2.0 * gains.K_pq * (1.0 - q_tilde.q0) + 0.5 * float(quadratic)


def inner_gain(K_pq: float, K_dq: float, eta: float,
               lambda_M: float) -> tuple[np.ndarray, np.ndarray, float]:
    """(Q̄_in, D̄_in, γ_in) with γ_in the first entry of Q̄_in⁻¹·D̄_in.

    Raises
    ------
    CertificateError
        If Q̄_in is not positive definite.
    """
    Qbar = np.array([[2.0 * eta * K_pq, eta * K_dq],
                     [eta * K_dq, K_dq - 2.0 * eta * lambda_M]])
    Dbar = np.array([K_pq + 2.0 * eta * K_dq, 2.0 * eta * lambda_M])
    if Qbar[0, 0] <= 0.0 or np.linalg.det(Qbar) <= 0.0:
        raise CertificateError(
            f"Q̄_in indefinite for η={eta} (K_pq={K_pq}, K_dq={K_dq}, λ_M={lambda_M})"
        )
    gamma_in = float(linalg.solve(Qbar, Dbar, assume_a="pos")[0])
    return Qbar, Dbar, gamma_in


def inner_certificate(gains: InnerGains, J, eta: float | None = None) -> InnerCertificate:
    """Certificate at η (midpoint of the admissible interval when omitted)."""
    _, eta_max = eta_interval(gains.K_pq, gains.K_dq, J)
    if eta is None:
        eta = 0.5 * eta_max
    elif not 0.0 < eta < eta_max:
        raise CertificateError(f"η={eta} outside (0, {eta_max:.6g})")
    lam = float(linalg.eigvalsh(np.asarray(J, dtype=float)).max())
    Qbar, Dbar, gamma_in = inner_gain(gains.K_pq, gains.K_dq, eta, lam)
    return InnerCertificate(eta=eta, Qbar=Qbar, Dbar=Dbar, gamma_in=gamma_in, lambda_M=lam)


# ── Outer loop ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class OuterCertificate:
    epsilon: float
    Q: np.ndarray
    mu_Q: float
    delta_max: float
    h_pt: float
    h_dt: float
    zeta_max: float = config.ZETA_MAX
    T_sup: float = config.THRUST_MAX

    @property
    def weight_norm(self) -> float:
        return math.hypot(self.epsilon, 1.0 / self.h_pt)

    def iss_radius(self, delta_norm: float) -> float:
        """State norm beyond which V̇_out < 0 for a disturbance of size ‖Δ‖."""
        return self.weight_norm * delta_norm / self.mu_Q


def epsilon_interval(h_pt: float, h_dt: float) -> tuple[float, float]:
    eps_max = min(math.sqrt(1.0 / h_pt),
                  16.0 * h_dt / (32.0 * h_pt + h_dt ** 2 * math.pi ** 2))
    return 0.0, eps_max


def lyapunov_outer(p, v, p_d, h_pt: float, epsilon: float, L: float) -> float:
    """V_out = ½dist² + ‖v‖²/(2h_pt) − ε·dist·⟨v, t̂⟩ in the (θ̂, φ̂) basis."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    dist = great_circle_dist(p, p_d, L)
    theta_hat, phi_hat = tangent_basis(p)
    t_hat = geodesic_tangent(p, p_d, 1e-15 * L ** 3)
    v_b = np.array([v @ theta_hat, v @ phi_hat])
    t_b = np.array([t_hat @ theta_hat, t_hat @ phi_hat])
    cross = dist * float(v_b @ t_b)
    return 0.5 * dist ** 2 + 0.5 * float(v @ v) / h_pt - epsilon * cross


def outer_Q_and_bounds(h_pt: float, h_dt: float, epsilon: float, L: float,
                       zeta_max: float = config.ZETA_MAX,
                       T_sup: float = config.THRUST_MAX) -> OuterCertificate:
    """Decay matrix Q, its smallest eigenvalue μ and the disturbance ceiling.

    Raises
    ------
    CertificateError
        If ε is outside its interval or Q is not positive definite.
    """
    _, eps_max = epsilon_interval(h_pt, h_dt)
    if not 0.0 < epsilon < eps_max:
        raise CertificateError(f"ε={epsilon} outside (0, {eps_max:.6g})")
    off = -epsilon * h_dt * math.pi / 4.0
    Q = np.array([[epsilon * h_pt, off],
                  [off, h_dt / h_pt - 2.0 * epsilon]])
    mu_Q = checked_min_eigenvalue(Q)
    if mu_Q <= 0.0:
        raise CertificateError(f"Q not positive definite (μ = {mu_Q:.3e})")
    delta_max = 4.0 * mu_Q * L ** 2 / math.sqrt(epsilon ** 2 + h_pt ** -2)
    return OuterCertificate(epsilon=epsilon, Q=Q, mu_Q=mu_Q, delta_max=delta_max,
                            h_pt=h_pt, h_dt=h_dt, zeta_max=zeta_max, T_sup=T_sup)


def outer_certificate(gains: OuterGains, params: PlantParams, epsilon: float | None = None,
                      zeta_max: float = config.ZETA_MAX,
                      T_sup: float | None = None) -> OuterCertificate:
    """Certificate for the given gains; ε defaults to half its upper bound."""
    h_pt, h_dt = gains.K_pt / params.m, gains.K_dt / params.m
    if epsilon is None:
        epsilon = 0.5 * epsilon_interval(h_pt, h_dt)[1]
    return outer_Q_and_bounds(h_pt, h_dt, epsilon, params.L, zeta_max=zeta_max,
                              T_sup=params.T_max if T_sup is None else T_sup)


# ── Composition ─────────────────────────────────────────────────────────────

def small_gain_check(gamma_in: float, gamma_out_est: float) -> bool:
    if not (math.isfinite(gamma_in) and math.isfinite(gamma_out_est)):
        raise ValueError("gains must be finite")
    if gamma_in < 0.0 or gamma_out_est < 0.0:
        raise ValueError("gains must be non-negative")
    return gamma_in * gamma_out_est < 1.0
