"""
Telemetry schema and CSV I/O.

One row per plant sample, fixed column order, units in the column names:

t_s                                  sample time
p_{x,y,z}_m, v_{x,y,z}_m_s           position and velocity
q0..q3                               attitude, scalar first
omega_{x,y,z}_rad_s                  body rate
T_raw_n, T_n                         thrust command before/after saturation
tau_{x,y,z}_n_m                      body torque
T_c_n                                cable tension ⟨F_a, r̂⟩
lambda_n                             constraint multiplier T_c + m‖v‖²/L
dist_m                               great-circle distance to the desired reference
zeta_tilde_rad                       attitude error angle
delta_n, lemma2_bound_n              ‖δ‖ and √6·T·|ζ̃|
p_a_{x,y,z}_m                        applied reference
V_in, V_out                          Lyapunov values (p_a as the outer reference)
saturated, tension_violated          flags
q_d0..q_d3                           desired attitude
omega_d_{x,y,z}_rad_s                desired rate, backward difference of q_d
dist_ref_m                           distance from the applied to the desired reference
state_norm_m                         ‖[p − p_a; v]‖
delta_t_n_kg                         tangential thrust disturbance per unit mass
"""

from __future__ import annotations

from pathlib import Path

import pandas as pd

COLUMNS: tuple[str, ...] = (
    "t_s",
    "p_x_m", "p_y_m", "p_z_m",
    "v_x_m_s", "v_y_m_s", "v_z_m_s",
    "q0", "q1", "q2", "q3",
    "omega_x_rad_s", "omega_y_rad_s", "omega_z_rad_s",
    "T_raw_n", "T_n",
    "tau_x_n_m", "tau_y_n_m", "tau_z_n_m",
    "T_c_n", "lambda_n",
    "dist_m", "zeta_tilde_rad",
    "delta_n", "lemma2_bound_n",
    "p_a_x_m", "p_a_y_m", "p_a_z_m",
    "V_in", "V_out",
    "saturated", "tension_violated",
    "q_d0", "q_d1", "q_d2", "q_d3",
    "omega_d_x_rad_s", "omega_d_y_rad_s", "omega_d_z_rad_s",
    "dist_ref_m", "state_norm_m", "delta_t_n_kg",
)

FLAG_COLUMNS = ("saturated", "tension_violated")


class TelemetryError(ValueError):
    """Raised when a telemetry file does not follow the schema."""


class TelemetryLog:
    """Row buffer that becomes a DataFrame with the fixed column order."""

    def __init__(self) -> None:
        self._rows: list[list] = []

    def __len__(self) -> int:
        return len(self._rows)

    def append(self, row: list) -> None:
        if len(row) != len(COLUMNS):
            raise TelemetryError(f"row has {len(row)} fields, schema has {len(COLUMNS)}")
        self._rows.append(row)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self._rows, columns=list(COLUMNS))
        for name in FLAG_COLUMNS:
            df[name] = df[name].astype(bool)
        return df


def write_telemetry(df: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, columns=list(COLUMNS), lineterminator="\n")
    return path


def read_telemetry(path: str | Path) -> pd.DataFrame:
    """Read a telemetry CSV back with exact float round trip."""
    df = pd.read_csv(path, float_precision="round_trip")
    if tuple(df.columns) != COLUMNS:
        missing = [c for c in COLUMNS if c not in df.columns]
        raise TelemetryError(
            f"{path}: columns do not match the telemetry schema"
            + (f" (missing {', '.join(missing)})" if missing else " (order differs)")
        )
    if len(df) > 1 and not (df["t_s"].diff().iloc[1:] > 0.0).all():
        raise TelemetryError(f"{path}: t_s is not strictly increasing")
    return df
