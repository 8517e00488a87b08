"""
Explicit reference governor: the applied reference flows along the
geodesic navigation field at a speed set by the dynamic safety margin.
"""

from __future__ import annotations

import numpy as np

from control.closed_loop import LoopConfig
from dynamics.plant import PlantParams, UavState
from governor.prediction import GovernorState, predict_min_tension


def erg_navigation_field(p_a, p_d, eta_nav: float, L: float) -> np.ndarray:
    """ρ = ((p_a × p_d) × p_a)/max(‖·‖, η): tangent at p_a, towards p_d, norm ≤ 1."""
    p_a = np.asarray(p_a, dtype=float)
    if abs(np.linalg.norm(p_a) - L) > 1e-6 * L:
        raise ValueError(f"applied reference off the sphere (‖p_a‖ = {np.linalg.norm(p_a):.9f}, L = {L})")
    w = np.cross(np.cross(p_a, p_d), p_a)
    return w / max(float(np.linalg.norm(w)), eta_nav)


def erg_dsm(T_cm_pred: float, T_c_min: float, kappa: float, eps_margin: float,
            mode: str = "clamped") -> float:
    """Dynamic safety margin.

    ``clamped``: κ·max(T̂ − T_c,min − ε, 0)², zero at and below the margin.
    ``unclamped``: κ·(T̂ − T_c,min + ε)².
    """
    if mode == "unclamped":
        return kappa * (T_cm_pred - T_c_min + eps_margin) ** 2
    return kappa * max(T_cm_pred - T_c_min - eps_margin, 0.0) ** 2


def erg_refresh(gov: GovernorState, state: UavState, loop: LoopConfig,
                params: PlantParams) -> GovernorState:
    """Recompute Δ from a frozen-reference prediction."""
    cfg = gov.config
    pred = predict_min_tension(state, gov.p_a, cfg.horizon, loop, params, cfg.dt_pred)
    dsm = erg_dsm(pred.min_tension, params.T_c_min, cfg.kappa, cfg.eps_margin, cfg.dsm)
    if cfg.dsm == "clamped" and not pred.thrust_feasible:
        dsm = 0.0
    return gov.moved_to(gov.p_a, last_dsm=dsm, last_min_tension=pred.min_tension)


def erg_advance(gov: GovernorState, p_d, dt: float, L: float) -> GovernorState:
    """Euler step p_a ← L·normalize(p_a + dt·Δ·ρ) with the held Δ."""
    if gov.last_dsm == 0.0:
        return gov
    rho = erg_navigation_field(gov.p_a, p_d, gov.config.eta_nav, L)
    moved = gov.p_a + dt * gov.last_dsm * rho
    return gov.moved_to(L * moved / np.linalg.norm(moved))


def erg_step(gov: GovernorState, state: UavState, p_d, dt: float, loop: LoopConfig,
             params: PlantParams) -> GovernorState:
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    return erg_advance(erg_refresh(gov, state, loop, params), p_d, dt, params.L)
