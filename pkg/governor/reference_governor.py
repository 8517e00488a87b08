"""
Discrete-time reference governor.

At each update the applied reference moves along the great circle towards
the desired one, p_a ← L·normalize((1 − c)·p_a + c·p_d), with the largest
c ∈ [0, 1] whose frozen-reference prediction keeps the cable taut and the
thrust command within limits.
"""

from __future__ import annotations

import logging

import numpy as np

from control.closed_loop import LoopConfig
from dynamics.plant import PlantParams, UavState
from governor.prediction import GovernorState, predict_min_tension

logger = logging.getLogger(__name__)


class AntipodalReferenceError(ValueError):
    """Raised when the applied and desired references are antipodal."""


def interpolate_reference(p_a: np.ndarray, p_d: np.ndarray, c: float, L: float) -> np.ndarray:
    if c == 0.0:
        return p_a.copy()
    blend = (1.0 - c) * p_a + c * p_d
    return L * blend / np.linalg.norm(blend)


def rg_update(gov: GovernorState, state: UavState, p_d: np.ndarray, loop: LoopConfig,
              params: PlantParams) -> GovernorState:
    """Advance the applied reference by the largest admissible step.

    Raises
    ------
    AntipodalReferenceError
        If p_a = −p_d, where the interpolation has no direction.
    """
    cfg = gov.config
    L = params.L
    p_d = np.asarray(p_d, dtype=float)
    if np.linalg.norm(gov.p_a + p_d) < 1e-12 * L:
        raise AntipodalReferenceError("applied and desired references are antipodal")
    if np.array_equal(gov.p_a, p_d):
        return gov.moved_to(gov.p_a, last_c=1.0)

    threshold = params.T_c_min + cfg.eps_margin

    def admissible(c: float) -> bool:
        candidate = interpolate_reference(gov.p_a, p_d, c, L)
        pred = predict_min_tension(state, candidate, cfg.horizon, loop, params, cfg.dt_pred,
                                   stop_below=threshold)
        return pred.thrust_feasible and pred.min_tension >= threshold

    if admissible(1.0):
        c = 1.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > cfg.c_tol:
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                lo = mid
            else:
                hi = mid
        c = lo
        if c == 0.0 and cfg.scan_fallback:
            # Bisection found nothing; feasibility may not be monotone in c.
            for candidate_c in np.arange(1.0 - cfg.c_tol, 0.0, -cfg.c_tol):
                if admissible(float(candidate_c)):
                    c = float(candidate_c)
                    logger.warning("RG bisection missed c=%.4f, recovered by linear scan", c)
                    break

    if c == 0.0:
        current = predict_min_tension(state, gov.p_a, cfg.horizon, loop, params, cfg.dt_pred)
        if not current.thrust_feasible or current.min_tension < params.T_c_min:
            logger.warning("RG holding a reference predicted infeasible (min T_c %.4f N)",
                           current.min_tension)
        return gov.moved_to(gov.p_a, last_c=0.0, last_min_tension=current.min_tension)

    p_a = p_d.copy() if c == 1.0 else interpolate_reference(gov.p_a, p_d, c, L)
    logger.debug("RG step c=%.4f", c)
    return gov.moved_to(p_a, last_c=c)
