"""
Trajectory audit: evaluates every certificate along a logged run.

The audit consumes the telemetry table written by the harness (column
names as in ``harness.telemetry.COLUMNS``) and produces one record per step
plus a verdict per property:

tension      T_c ≥ T_c,min − tol
lemma2       ‖δ‖ ≤ √6·T·|ζ̃|
outer_iss    state norm above the outer ISS radius ⇒ V̇_out < tol·V_out
inner_iss    ‖[sin(ζ̃/2), ‖ω‖]‖ above the inner radius ⇒ V̇_in < tol·V_in
restriction  |ζ̃| < ζ̃_max, T ≤ T_sup, ‖Δ‖ ≤ Δ_max
sphere       ‖p‖ = L and ⟨p, v⟩ = 0 within tolerance
outer_monotone (ideal-attitude runs only)  V_out never increases
small_gain   γ_in·γ_out < 1 (static, when γ_out is known)

V̇ is a central difference over the logged samples.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

import config
from certificates.bounds import InnerCertificate, OuterCertificate, small_gain_check

logger = logging.getLogger(__name__)

# Tie-break order when several properties first fail on the same step.
PROPERTY_ORDER = ("tension", "lemma2", "outer_iss", "inner_iss", "restriction",
                  "sphere", "outer_monotone")


@dataclass(frozen=True)
class CertificateSet:
    """Everything the audit needs besides the log itself."""

    inner: InnerCertificate
    outer: OuterCertificate
    L: float
    T_c_min: float
    gamma_out: float | None = None
    check_monotone: bool = False
    tension_tol: float = config.TENSION_TOL
    vdot_rel_tol: float = config.VDOT_REL_TOL
    floor: float = config.LYAPUNOV_FLOOR


@dataclass(frozen=True)
class PropertyVerdict:
    name: str
    passed: bool
    worst_margin: float
    checked: int
    failures: int
    first_index: int | None = None
    first_time: float | None = None

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_margin": None if math.isnan(self.worst_margin) else float(self.worst_margin),
            "checked_steps": self.checked,
            "failing_steps": self.failures,
            "first_failure_step": self.first_index,
            "first_failure_time_s": self.first_time,
        }


@dataclass
class CertificateReport:
    steps: pd.DataFrame
    properties: dict[str, PropertyVerdict] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.properties.values())

    @property
    def first_failure(self) -> str | None:
        """Per-step property that broke first; static failures only if none did."""
        failing = [v for v in self.properties.values() if not v.passed and v.first_index is not None]
        if failing:
            failing.sort(key=lambda v: (v.first_index, PROPERTY_ORDER.index(v.name)))
            return failing[0].name
        static = [v.name for v in self.properties.values() if not v.passed]
        return static[0] if static else None

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "first_failure": self.first_failure,
            "summary": self.summary,
            "properties": {name: v.as_dict() for name, v in self.properties.items()},
        }

    def write(self, prefix: Path) -> tuple[Path, Path]:
        """Write ``<prefix>.report.yaml`` and ``<prefix>.audit.csv``."""
        prefix = Path(prefix)
        report_path = prefix.with_name(prefix.name + ".report.yaml")
        steps_path = prefix.with_name(prefix.name + ".audit.csv")
        with open(report_path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.as_dict(), fh, sort_keys=False)
        self.steps.to_csv(steps_path, index=False)
        return report_path, steps_path


# ── Helpers ─────────────────────────────────────────────────────────────────

def _verdict(name: str, t: np.ndarray, margin: np.ndarray, checked: np.ndarray) -> PropertyVerdict:
    """Failing steps are checked steps with a negative margin."""
    fail = checked & (margin < 0.0)
    n_checked = int(checked.sum())
    worst = float(margin[checked].min()) if n_checked else math.nan
    if fail.any():
        k = int(np.flatnonzero(fail)[0])
        return PropertyVerdict(name, False, worst, n_checked, int(fail.sum()), k, float(t[k]))
    return PropertyVerdict(name, True, worst, n_checked, 0)


def _central_difference(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    rate = np.full(values.shape, np.nan)
    if values.size >= 3:
        rate[1:-1] = (values[2:] - values[:-2]) / (t[2:] - t[:-2])
    return rate


def _reference_steady(log: pd.DataFrame) -> np.ndarray:
    """True where the applied reference is the same on both neighbours."""
    p_a = log[["p_a_x_m", "p_a_y_m", "p_a_z_m"]].to_numpy()
    same_next = np.zeros(len(log), dtype=bool)
    same_next[:-1] = np.all(p_a[1:] == p_a[:-1], axis=1)
    steady = np.zeros(len(log), dtype=bool)
    steady[1:-1] = same_next[1:-1] & same_next[:-2]
    return steady


# ── Public API ──────────────────────────────────────────────────────────────

def trajectory_audit(log: pd.DataFrame, certs: CertificateSet) -> CertificateReport:
    """Evaluate every certificate along ``log`` and collect the verdicts."""
    t = log["t_s"].to_numpy()
    n = len(log)
    everywhere = np.ones(n, dtype=bool)
    steady = _reference_steady(log)

    # Tension and misalignment bound.
    tension_margin = log["T_c_n"].to_numpy() - certs.T_c_min + certs.tension_tol
    delta = log["delta_n"].to_numpy()
    bound = log["lemma2_bound_n"].to_numpy()
    lemma2_margin = bound - delta + 1e-12 * np.maximum(1.0, bound)

    # Outer ISS implication.
    V_out = log["V_out"].to_numpy()
    Vdot_out = _central_difference(V_out, t)
    delta_t = log["delta_t_n_kg"].to_numpy()
    radius_out = certs.outer.weight_norm * delta_t / certs.outer.mu_Q
    state_norm = log["state_norm_m"].to_numpy()
    outer_active = steady & (state_norm > radius_out) & (V_out > certs.floor) & np.isfinite(Vdot_out)
    outer_margin = certs.vdot_rel_tol * V_out - np.nan_to_num(Vdot_out)

    # Inner ISS implication.
    V_in = log["V_in"].to_numpy()
    Vdot_in = _central_difference(V_in, t)
    zeta = log["zeta_tilde_rad"].to_numpy()
    omega_norm = np.linalg.norm(log[["omega_x_rad_s", "omega_y_rad_s", "omega_z_rad_s"]].to_numpy(), axis=1)
    omega_d_sup = float(np.linalg.norm(
        log[["omega_d_x_rad_s", "omega_d_y_rad_s", "omega_d_z_rad_s"]].to_numpy(), axis=1).max(initial=0.0))
    inner_state = np.hypot(np.sin(0.5 * zeta), omega_norm)
    radius_in = certs.inner.iss_factor * omega_d_sup
    inner_active = (inner_state > radius_in) & (V_in > certs.floor) & np.isfinite(Vdot_in)
    inner_margin = certs.vdot_rel_tol * V_in - np.nan_to_num(Vdot_in)

    # Restriction of the outer ISS statement.
    T_applied = log["T_n"].to_numpy()
    restriction_margin = np.minimum.reduce([
        (certs.outer.zeta_max - zeta) / certs.outer.zeta_max,
        (certs.outer.T_sup - T_applied) / certs.outer.T_sup,
        (certs.outer.delta_max - delta_t) / certs.outer.delta_max,
    ])

    # Constraint manifold.
    p = log[["p_x_m", "p_y_m", "p_z_m"]].to_numpy()
    v = log[["v_x_m_s", "v_y_m_s", "v_z_m_s"]].to_numpy()
    radial_err = np.abs(np.linalg.norm(p, axis=1) - certs.L) / certs.L
    tangency = np.abs(np.einsum("ij,ij->i", p, v)) / (certs.L * np.maximum(np.linalg.norm(v, axis=1), 1.0))
    sphere_margin = np.minimum(config.SPHERE_TOL - radial_err, config.TANGENCY_TOL - tangency)

    properties = {
        "tension": _verdict("tension", t, tension_margin, everywhere),
        "lemma2": _verdict("lemma2", t, lemma2_margin, everywhere),
        "outer_iss": _verdict("outer_iss", t, outer_margin, outer_active),
        "inner_iss": _verdict("inner_iss", t, inner_margin, inner_active),
        "restriction": _verdict("restriction", t, restriction_margin, everywhere),
        "sphere": _verdict("sphere", t, sphere_margin, everywhere),
    }

    monotone_margin = np.full(n, np.nan)
    if certs.check_monotone and n >= 2:
        increase = np.zeros(n)
        increase[1:] = V_out[1:] - V_out[:-1]
        monotone_margin = config.MONOTONE_TOL - increase
        ref_same = np.ones(n, dtype=bool)
        ref_same[1:] = np.all(log[["p_a_x_m", "p_a_y_m", "p_a_z_m"]].to_numpy()[1:]
                              == log[["p_a_x_m", "p_a_y_m", "p_a_z_m"]].to_numpy()[:-1], axis=1)
        checked = ref_same.copy()
        checked[0] = False
        properties["outer_monotone"] = _verdict("outer_monotone", t, monotone_margin, checked)

    summary = {
        "steps": n,
        "eta": certs.inner.eta,
        "gamma_in": certs.inner.gamma_in,
        "epsilon": certs.outer.epsilon,
        "mu_Q": certs.outer.mu_Q,
        "delta_max_n_kg": certs.outer.delta_max,
        "omega_d_sup_rad_s": omega_d_sup,
        "min_tension_n": float(log["T_c_n"].min()) if n else None,
        "final_dist_m": float(log["dist_m"].iloc[-1]) if n else None,
    }
    if certs.gamma_out is not None:
        ok = small_gain_check(certs.inner.gamma_in, certs.gamma_out)
        product = certs.inner.gamma_in * certs.gamma_out
        properties["small_gain"] = PropertyVerdict("small_gain", ok, 1.0 - product, 1, 0 if ok else 1)
        summary["gamma_out"] = certs.gamma_out

    steps = pd.DataFrame({
        "t_s": t,
        "V_in": V_in,
        "V_out": V_out,
        "dist_m": log["dist_m"].to_numpy(),
        "delta_n": delta,
        "lemma2_bound_n": bound,
        "tension_margin_n": tension_margin - certs.tension_tol,
        "state_norm_m": state_norm,
        "iss_radius_m": radius_out,
        "Vdot_out": Vdot_out,
        "outer_iss_checked": outer_active,
        "Vdot_in": Vdot_in,
        "inner_iss_checked": inner_active,
        "restriction_margin": restriction_margin,
        "sphere_margin": sphere_margin,
        "monotone_margin": monotone_margin,
    })

    report = CertificateReport(steps=steps, properties=properties, summary=summary)
    if not report.passed:
        logger.info("audit: first broken bound %s", report.first_failure)
    return report
