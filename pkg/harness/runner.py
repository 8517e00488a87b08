"""
Closed-loop run scheduler.

Per plant step: governor update (every ``period_steps`` steps; the ERG
reference also flows every step) → outer loop → q_d/ω_d → inner loop →
saturation → plant step → telemetry row. The run ends with the
certificate audit of the full log.
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace

import numpy as np
import pandas as pd

import config
from certificates.audit import CertificateReport, CertificateSet, trajectory_audit
from certificates.bounds import (
    inner_certificate, lemma2_bound, lyapunov_inner, lyapunov_outer, outer_certificate,
)
from control.closed_loop import StepSignals, closed_loop_step, compute_control
from control.inner_loop import disturbance_exact, error_angle
from control.outer_loop import DesiredRateTracker, chord_bounds, great_circle_dist, hover_attitude
from dynamics.plant import UavState
from dynamics.so3_math import Quaternion, quat_to_rot
from governor.explicit_governor import erg_advance, erg_refresh
from governor.prediction import GovernorState
from governor.reference_governor import rg_update
from harness.scenario import Scenario
from harness.telemetry import TelemetryLog
from utils.metrics import StageTimer

logger = logging.getLogger(__name__)


class DivergenceError(ValueError):
    """Raised when the state stops being finite.

    ``last_index`` is the last valid telemetry row and ``telemetry`` the
    log up to and including it.
    """

    def __init__(self, message: str, last_index: int, telemetry: pd.DataFrame) -> None:
        super().__init__(message)
        self.last_index = last_index
        self.telemetry = telemetry


def build_certificates(sc: Scenario, gamma_out: float | None = None) -> CertificateSet:
    opts = sc.certificates
    inner = inner_certificate(sc.inner, sc.plant.J, opts.eta)
    outer = outer_certificate(sc.outer, sc.plant, opts.epsilon, zeta_max=opts.zeta_max,
                              T_sup=opts.T_sup)
    return CertificateSet(
        inner=inner, outer=outer, L=sc.plant.L, T_c_min=sc.plant.T_c_min,
        gamma_out=gamma_out if gamma_out is not None else opts.gamma_out,
        check_monotone=sc.ideal_attitude and sc.attitude_offset is None,
    )


def _row(t: float, sig: StepSignals, p_a: np.ndarray, sc: Scenario, certs: CertificateSet) -> list:
    params = sc.plant
    s = sig.state
    zeta = error_angle(sig.q_tilde)
    delta = float(np.linalg.norm(disturbance_exact(sig.T, sig.q_d, sig.q_tilde)))

    r_hat = s.p / np.linalg.norm(s.p)
    miss = sig.T * quat_to_rot(s.q)[:, 2] - sig.F_d
    miss_t = miss - (miss @ r_hat) * r_hat

    V_in = lyapunov_inner(sig.q_tilde, s.omega, sc.inner, certs.inner.eta, params.J)
    V_out = lyapunov_outer(s.p, s.v, p_a, certs.outer.h_pt, certs.outer.epsilon, params.L)
    return [
        t,
        *s.p, *s.v, s.q.q0, *s.q.qv, *s.omega,
        sig.T_raw, sig.T, *sig.tau,
        sig.tension, sig.multiplier,
        great_circle_dist(s.p, sc.p_d, params.L), zeta,
        delta, lemma2_bound(sig.T, zeta),
        *p_a,
        V_in, V_out,
        sig.saturated, sig.tension < params.T_c_min - certs.tension_tol,
        sig.q_d.q0, *sig.q_d.qv, *sig.omega_d,
        great_circle_dist(p_a, sc.p_d, params.L),
        math.hypot(chord_bounds(s.p, p_a, params.L)[0], float(np.linalg.norm(s.v))),
        float(np.linalg.norm(miss_t)) / params.m,
    ]


def simulate(sc: Scenario, certs: CertificateSet, timer: StageTimer | None = None) -> pd.DataFrame:
    """Telemetry of the closed loop over ``sc.duration``.

    Raises
    ------
    DivergenceError
        If the state becomes non-finite.
    """
    timer = timer or StageTimer()
    params = sc.plant
    loop = sc.loop()
    n_steps = int(round(sc.duration / sc.dt))
    tracker = DesiredRateTracker(sc.dt)
    log = TelemetryLog()

    gov = GovernorState(p_a=sc.initial.p.copy(), config=sc.governor) if sc.governor else None
    p_a = sc.p_d if gov is None else gov.p_a
    state = sc.initial

    for k in range(n_steps + 1):
        t = k * sc.dt
        if gov is not None:
            with timer.stage("governor"):
                if k % gov.config.period_steps == 0:
                    if gov.config.mode == "rg":
                        gov = rg_update(gov, state, sc.p_d, loop, params)
                        logger.debug("t=%.3f RG c=%.4f dist_ref=%.4f m", t, gov.last_c,
                                     great_circle_dist(gov.p_a, sc.p_d, params.L))
                    else:
                        gov = erg_refresh(gov, state, loop, params)
                        logger.debug("t=%.3f ERG Δ=%.4f (T̂=%.4f N)", t, gov.last_dsm,
                                     gov.last_min_tension)
                if gov.config.mode == "erg":
                    gov = erg_advance(gov, sc.p_d, sc.dt, params.L)
            p_a = gov.p_a

        with timer.stage("control+plant"):
            if k < n_steps:
                next_state, sig = closed_loop_step(state, p_a, loop, params, sc.dt, tracker)
            else:
                sig = compute_control(state, p_a, loop, params, tracker)
        with timer.stage("telemetry"):
            log.append(_row(t, sig, p_a, sc, certs))

        if k < n_steps:
            if not next_state.is_finite():
                logger.warning("Run %s diverged after t=%.4f s", sc.name, t)
                raise DivergenceError(f"state became non-finite after step {k} (t = {t:.4f} s)",
                                      last_index=k, telemetry=log.to_frame())
            state = next_state

    return log.to_frame()


def run_scenario(sc: Scenario, gamma_out: float | None = None) -> tuple[pd.DataFrame, CertificateReport]:
    """Simulate ``sc`` and audit the resulting log."""
    timer = StageTimer()
    certs = build_certificates(sc, gamma_out)
    logger.info("Run %s: %.3f s at dt=%g s, governor=%s", sc.name, sc.duration, sc.dt,
                sc.governor.mode if sc.governor else "off")
    telemetry = simulate(sc, certs, timer)
    with timer.stage("audit"):
        report = trajectory_audit(telemetry, certs)
    logger.info("Run %s done: final dist %.3e m, min T_c %.4f N, audit %s",
                sc.name, telemetry["dist_m"].iloc[-1], telemetry["T_c_n"].min(),
                "passed" if report.passed else f"failed ({report.first_failure})")
    logger.debug("Stage timings:\n%s", timer.format_metrics())
    return telemetry, report


def estimate_gamma_out(sc: Scenario, levels=config.GAMMA_OUT_LEVELS,
                       duration: float = config.GAMMA_OUT_DURATION) -> float:
    """Largest sup‖ω_d‖/ζ̃ over held tilt errors ζ̃, starting at rest on p_d."""
    params = sc.plant
    base = sc.loop()
    n_steps = int(round(duration / sc.dt))
    ratios = []
    for level in levels:
        loop = replace(base, ideal_attitude=True,
                       attitude_offset=Quaternion.from_angle_axis(level, (1.0, 0.0, 0.0)))
        state = UavState(p=sc.p_d.copy(), v=np.zeros(3),
                         q=hover_attitude(sc.p_d, sc.outer, params), omega=np.zeros(3))
        tracker = DesiredRateTracker(sc.dt)
        sup = 0.0
        for _ in range(n_steps):
            state, sig = closed_loop_step(state, sc.p_d, loop, params, sc.dt, tracker)
            sup = max(sup, float(np.linalg.norm(sig.omega_d)))
        ratios.append(sup / level)
        logger.info("γ_out estimate ζ̃=%.3f rad: sup‖ω_d‖=%.4f rad/s, ratio %.4f", level, sup, ratios[-1])
    return max(ratios)
