"""
Scenario files.

A scenario is a YAML mapping with explicit units in its key names. Every
key is checked against the schema below; an unknown or malformed entry
raises ``ScenarioError`` naming its dotted path (``plant.mass_kg``). CLI
overrides are applied to the raw mapping before validation so that the
resolved mapping written next to the telemetry reproduces the run.

    name: step_downhill
    experiment: step_ungoverned
    seed: 0
    duration_s: 20.0
    dt_s: 0.005
    plant:    {mass_kg, inertia_kg_m2, cable_length_m, gravity_m_s2,
               thrust_max_n, tension_min_n}
    outer:    {kp_n_per_m, kd_n_s_per_m, pulling_n, yaw_rad, mu_m2}
    inner:    {kp_n_m, kd_n_m_s, ladder_c, torque_limit_n_m, ideal,
               offset_angle_rad, offset_axis}
    governor: {mode, horizon_s, dt_pred_s, c_tol, eta_nav_m3, kappa,
               margin_n, dsm, period_steps, scan_fallback}
    initial:  {polar_deg, azimuth_deg | position_m, velocity_m_s,
               attitude: hover | [q0, q1, q2, q3], omega_rad_s}
    target:   {polar_deg, azimuth_deg | position_m}
    certificates: {zeta_max_rad, t_sup_n, eta, epsilon, gamma_out}
    experiment_options: free-form mapping read by the experiment
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

import config
from control.closed_loop import LoopConfig
from control.inner_loop import InnerGains
from control.outer_loop import OuterGains, hover_attitude, sphere_point
from dynamics.plant import PlantParams, PlantParamsError, UavState
from dynamics.so3_math import Quaternion
from governor.prediction import GovernorConfig, GovernorConfigError

logger = logging.getLogger(__name__)

EXPERIMENTS = ("run", "lemma1_ideal", "lemma2_mc", "gain_ladder", "step_governed",
               "step_ungoverned", "integrator_order", "gamma_out")

_TOP_KEYS = {"name", "experiment", "seed", "duration_s", "dt_s", "plant", "outer", "inner",
             "governor", "initial", "target", "certificates", "experiment_options"}
_SECTION_KEYS = {
    "plant": {"mass_kg", "inertia_kg_m2", "cable_length_m", "gravity_m_s2", "thrust_max_n",
              "tension_min_n"},
    "outer": {"kp_n_per_m", "kd_n_s_per_m", "pulling_n", "yaw_rad", "mu_m2"},
    "inner": {"kp_n_m", "kd_n_m_s", "ladder_c", "torque_limit_n_m", "ideal", "offset_angle_rad",
              "offset_axis"},
    "governor": {"mode", "horizon_s", "dt_pred_s", "c_tol", "eta_nav_m3", "kappa", "margin_n",
                 "dsm", "period_steps", "scan_fallback"},
    "initial": {"polar_deg", "azimuth_deg", "position_m", "velocity_m_s", "attitude",
                "omega_rad_s"},
    "target": {"polar_deg", "azimuth_deg", "position_m"},
    "certificates": {"zeta_max_rad", "t_sup_n", "eta", "epsilon", "gamma_out"},
}


class ScenarioError(ValueError):
    """Raised for an invalid scenario; the message starts with the field path."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class CertificateOptions:
    zeta_max: float = config.ZETA_MAX
    T_sup: float | None = None
    eta: float | None = None
    epsilon: float | None = None
    gamma_out: float | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    plant: PlantParams
    outer: OuterGains
    inner: InnerGains
    governor: GovernorConfig | None
    initial: UavState
    p_d: np.ndarray
    duration: float
    dt: float
    seed: int
    experiment: str
    ideal_attitude: bool = False
    attitude_offset: Quaternion | None = None
    certificates: CertificateOptions = field(default_factory=CertificateOptions)
    options: dict[str, Any] = field(default_factory=dict)
    raw: dict[str, Any] = field(default_factory=dict, repr=False)

    def loop(self) -> LoopConfig:
        """Controller configuration with the outer gains resolved against the plant."""
        return LoopConfig(outer=self.outer.resolved(self.plant), inner=self.inner,
                          ideal_attitude=self.ideal_attitude,
                          attitude_offset=self.attitude_offset)


# ── Field readers ───────────────────────────────────────────────────────────

def _number(section: dict, key: str, path: str, default: float | None) -> float | None:
    if key not in section or section[key] is None:
        return default
    value = section[key]
    name = f"{path}.{key}" if path else key
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(name, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(name, f"must be finite, got {value!r}")
    return float(value)


def _vector(section: dict, key: str, path: str, default=None) -> np.ndarray | None:
    if key not in section or section[key] is None:
        return None if default is None else np.asarray(default, dtype=float)
    value = section[key]
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}.{key}", f"expected a 3-vector, got {value!r}") from None
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{path}.{key}", f"expected a finite 3-vector, got {value!r}")
    return arr


def _section(raw: dict, name: str) -> dict:
    section = raw.get(name) or {}
    if not isinstance(section, dict):
        raise ScenarioError(name, "expected a mapping")
    unknown = sorted(set(section) - _SECTION_KEYS[name])
    if unknown:
        raise ScenarioError(f"{name}.{unknown[0]}", "unknown field")
    return section


def _inertia(section: dict) -> np.ndarray:
    value = section.get("inertia_kg_m2")
    if value is None:
        return np.diag(config.INERTIA_DIAG)
    arr = np.asarray(value, dtype=float)
    if arr.shape == (3,):
        return np.diag(arr)
    if arr.shape == (3, 3):
        return arr
    raise ScenarioError("plant.inertia_kg_m2", "expected a diagonal 3-vector or a 3×3 matrix")


def _point(section: dict, path: str, L: float) -> np.ndarray:
    position = _vector(section, "position_m", path)
    if position is not None:
        if "polar_deg" in section or "azimuth_deg" in section:
            raise ScenarioError(f"{path}.position_m", "give either position_m or polar/azimuth angles")
        if abs(np.linalg.norm(position) - L) > 1e-9 * L:
            raise ScenarioError(f"{path}.position_m",
                                f"‖p‖ = {np.linalg.norm(position):.12g} m is not on the sphere L = {L}")
        return position
    polar = _number(section, "polar_deg", path, 0.0)
    azimuth = _number(section, "azimuth_deg", path, 0.0)
    return sphere_point(L, math.radians(polar), math.radians(azimuth))


# ── Sections ────────────────────────────────────────────────────────────────

def _plant(raw: dict) -> PlantParams:
    s = _section(raw, "plant")
    try:
        return PlantParams(
            m=_number(s, "mass_kg", "plant", config.MASS),
            J=_inertia(s),
            L=_number(s, "cable_length_m", "plant", config.CABLE_LENGTH),
            g=_number(s, "gravity_m_s2", "plant", config.GRAVITY),
            T_max=_number(s, "thrust_max_n", "plant", config.THRUST_MAX),
            T_c_min=_number(s, "tension_min_n", "plant", config.TENSION_MIN),
        )
    except PlantParamsError as exc:
        raise ScenarioError("plant", str(exc)) from exc


def _outer(raw: dict, plant: PlantParams) -> OuterGains:
    s = _section(raw, "outer")
    gains = OuterGains(
        K_pt=_number(s, "kp_n_per_m", "outer", config.KP_TANGENTIAL),
        K_dt=_number(s, "kd_n_s_per_m", "outer", config.KD_TANGENTIAL),
        T_p=_number(s, "pulling_n", "outer", config.PULLING_TERM),
        T_g=plant.weight,
        mu=_number(s, "mu_m2", "outer", None),
        psi=_number(s, "yaw_rad", "outer", config.YAW),
    )
    try:
        gains.validate(plant)
    except ValueError as exc:
        raise ScenarioError("outer", str(exc)) from exc
    return gains


def _inner(raw: dict) -> tuple[InnerGains, bool, Quaternion | None]:
    s = _section(raw, "inner")
    K_pq = _number(s, "kp_n_m", "inner", config.KP_ATTITUDE)
    c = _number(s, "ladder_c", "inner", config.LADDER_C)
    K_dq = _number(s, "kd_n_m_s", "inner", None)
    gains = InnerGains(
        K_pq=K_pq,
        K_dq=c * math.sqrt(max(K_pq, 0.0)) if K_dq is None else K_dq,
        torque_limit=_number(s, "torque_limit_n_m", "inner", None),
    )
    try:
        gains.validate()
    except ValueError as exc:
        raise ScenarioError("inner", str(exc)) from exc

    ideal = s.get("ideal", False)
    if not isinstance(ideal, bool):
        raise ScenarioError("inner.ideal", f"expected true/false, got {ideal!r}")
    offset = None
    angle = _number(s, "offset_angle_rad", "inner", None)
    if angle is not None:
        if not ideal:
            raise ScenarioError("inner.offset_angle_rad", "an attitude offset requires ideal: true")
        axis = _vector(s, "offset_axis", "inner", default=(1.0, 0.0, 0.0))
        if np.linalg.norm(axis) == 0.0:
            raise ScenarioError("inner.offset_axis", "axis must be non-zero")
        offset = Quaternion.from_angle_axis(angle, axis)
    return gains, ideal, offset


def _governor(raw: dict, experiment: str) -> GovernorConfig | None:
    s = _section(raw, "governor")
    mode = s.get("mode", "rg" if experiment == "step_governed" else "off")
    if mode == "off":
        if experiment == "step_governed":
            raise ScenarioError("governor.mode", "step_governed needs mode rg or erg")
        return None
    gov = GovernorConfig(
        mode=mode,
        horizon=_number(s, "horizon_s", "governor", config.GOVERNOR_HORIZON),
        dt_pred=_number(s, "dt_pred_s", "governor", config.GOVERNOR_DT_PRED),
        c_tol=_number(s, "c_tol", "governor", config.GOVERNOR_C_TOL),
        eta_nav=_number(s, "eta_nav_m3", "governor", config.GOVERNOR_ETA_NAV),
        kappa=_number(s, "kappa", "governor", config.GOVERNOR_KAPPA),
        eps_margin=_number(s, "margin_n", "governor", config.GOVERNOR_MARGIN),
        dsm=s.get("dsm", config.DSM_MODE),
        period_steps=int(_number(s, "period_steps", "governor", config.GOVERNOR_PERIOD_STEPS)),
        scan_fallback=bool(s.get("scan_fallback", True)),
    )
    try:
        gov.validate()
    except GovernorConfigError as exc:
        raise ScenarioError("governor", str(exc)) from exc
    return gov


def _initial(raw: dict, plant: PlantParams, outer: OuterGains) -> UavState:
    s = _section(raw, "initial")
    p = _point(s, "initial", plant.L)
    v = _vector(s, "velocity_m_s", "initial", default=(0.0, 0.0, 0.0))
    if abs(float(p @ v)) > 1e-6 * plant.L * max(float(np.linalg.norm(v)), 1.0):
        raise ScenarioError("initial.velocity_m_s", "velocity must be tangent to the sphere")
    attitude = s.get("attitude", "hover")
    if attitude == "hover":
        q = hover_attitude(p, outer, plant)
    else:
        try:
            arr = np.asarray(attitude, dtype=float)
        except (TypeError, ValueError):
            arr = None
        if arr is None or arr.shape != (4,) or not np.all(np.isfinite(arr)) or not arr.any():
            raise ScenarioError("initial.attitude", f"expected 'hover' or [q0, q1, q2, q3], got {attitude!r}")
        q = Quaternion.from_array(arr).normalized()
    omega = _vector(s, "omega_rad_s", "initial", default=(0.0, 0.0, 0.0))
    return UavState(p=p, v=v, q=q, omega=omega)


def _certificates(raw: dict) -> CertificateOptions:
    s = _section(raw, "certificates")
    return CertificateOptions(
        zeta_max=_number(s, "zeta_max_rad", "certificates", config.ZETA_MAX),
        T_sup=_number(s, "t_sup_n", "certificates", None),
        eta=_number(s, "eta", "certificates", None),
        epsilon=_number(s, "epsilon", "certificates", None),
        gamma_out=_number(s, "gamma_out", "certificates", None),
    )


# ── Public API ──────────────────────────────────────────────────────────────

def apply_overrides(raw: dict, *, seed: int | None = None, dt: float | None = None,
                    governor: str | None = None, dsm: str | None = None,
                    experiment: str | None = None) -> dict:
    """Copy of ``raw`` with the CLI overrides written into it."""
    raw = copy.deepcopy(raw)
    if experiment is not None:
        raw["experiment"] = experiment
    if seed is not None:
        raw["seed"] = seed
    if dt is not None:
        raw["dt_s"] = dt
    if governor is not None:
        raw["governor"] = dict(raw.get("governor") or {}, mode=governor)
    if dsm is not None:
        raw["governor"] = dict(raw.get("governor") or {}, dsm=dsm)
    return raw


def scenario_from_mapping(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("", "scenario must be a mapping")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ScenarioError(unknown[0], "unknown field")

    experiment = raw.get("experiment", "run")
    if experiment not in EXPERIMENTS:
        raise ScenarioError("experiment", f"must be one of {', '.join(EXPERIMENTS)}, got {experiment!r}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed", f"expected a non-negative integer, got {seed!r}")
    duration = _number(raw, "duration_s", "", 5.0)
    dt = _number(raw, "dt_s", "", config.DEFAULT_DT)
    if duration <= 0.0:
        raise ScenarioError("duration_s", f"must be positive, got {duration}")
    if dt <= 0.0 or dt > duration:
        raise ScenarioError("dt_s", f"must lie in (0, duration], got {dt}")
    options = raw.get("experiment_options") or {}
    if not isinstance(options, dict):
        raise ScenarioError("experiment_options", "expected a mapping")

    plant = _plant(raw)
    outer = _outer(raw, plant)
    inner, ideal, offset = _inner(raw)
    governor = _governor(raw, experiment)
    initial = _initial(raw, plant, outer)
    target = _section(raw, "target")
    p_d = _point(target, "target", plant.L) if target else initial.p.copy()

    if governor is not None and np.linalg.norm(initial.p + p_d) < 1e-9 * plant.L:
        raise ScenarioError("target", "desired reference is antipodal to the initial position")

    return Scenario(
        name=str(raw.get("name", "scenario")),
        plant=plant, outer=outer, inner=inner, governor=governor,
        initial=initial, p_d=p_d, duration=duration, dt=dt, seed=seed,
        experiment=experiment, ideal_attitude=ideal, attitude_offset=offset,
        certificates=_certificates(raw), options=dict(options), raw=copy.deepcopy(raw),
    )


def load_scenario(path: str | Path, **overrides) -> Scenario:
    """Read, override and validate a scenario file."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ScenarioError(str(path), "file not found") from None
    except yaml.YAMLError as exc:
        raise ScenarioError(str(path), f"not valid YAML ({exc})") from exc
    sc = scenario_from_mapping(apply_overrides(raw or {}, **overrides))
    logger.info("Loaded scenario %s (%s) from %s", sc.name, sc.experiment, path)
    return sc


def dump_scenario(sc: Scenario, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(sc.raw, fh, sort_keys=False)
    return path
