"""
Configuration module for the tethered quadrotor toolkit.

Centralizes environment variables, nominal vehicle parameters, controller
gains and audit tolerances so that every other module imports from a
single source of truth. Scenario files override the plant, controller and
governor values; the environment only moves process-level defaults.
"""

import math
import os

from dotenv import load_dotenv

# Load .env file from the current working directory when present.
load_dotenv()

# ── Paths ───────────────────────────────────────────────────────────────────
OUTPUT_DIR: str = os.getenv("TETHER_OUTPUT_DIR", "runs")
SCENARIOS_DIR: str = os.getenv(
    "TETHER_SCENARIOS_DIR", os.path.join(os.path.dirname(os.path.abspath(__file__)), "scenarios"))

# ── Process ─────────────────────────────────────────────────────────────────
LOG_LEVEL: str = os.getenv("TETHER_LOG_LEVEL", "INFO")
WORKERS: int = int(os.getenv("TETHER_WORKERS", str(min(4, os.cpu_count() or 1))))

# ── Nominal vehicle ─────────────────────────────────────────────────────────
MASS: float = 1.0                          # kg
INERTIA_DIAG: tuple[float, float, float] = (0.02, 0.02, 0.04)   # kg·m²
CABLE_LENGTH: float = 2.0                  # metres
GRAVITY: float = 9.81                      # m/s²
THRUST_MAX: float = 20.0                   # N
TENSION_MIN: float = 0.5                   # N

# ── Outer loop ──────────────────────────────────────────────────────────────
KP_TANGENTIAL: float = 4.0                 # N/m
KD_TANGENTIAL: float = 4.0                 # N·s/m
PULLING_TERM: float = 1.0                  # N
YAW: float = 0.0                           # rad
# Geodesic regularizer as a fraction of L².
MU_RELATIVE: float = 1e-12

# ── Inner loop ──────────────────────────────────────────────────────────────
KP_ATTITUDE: float = 50.0                  # N·m
# K_dq = LADDER_C·√K_pq along the gain ladder.
LADDER_C: float = 0.3
KD_ATTITUDE: float = LADDER_C * math.sqrt(KP_ATTITUDE)   # N·m·s

# ── Integrator ──────────────────────────────────────────────────────────────
DEFAULT_DT: float = float(os.getenv("TETHER_DT", "0.001"))   # s

# ── Governor ────────────────────────────────────────────────────────────────
GOVERNOR_PERIOD_STEPS: int = 20            # plant steps per governor update
GOVERNOR_HORIZON: float = 3.0              # s
GOVERNOR_DT_PRED: float = 0.005            # s
GOVERNOR_C_TOL: float = 0.01
GOVERNOR_ETA_NAV: float = 0.05             # m³, navigation-field regularizer
GOVERNOR_KAPPA: float = 1.0                # (m/s)/N²
GOVERNOR_MARGIN: float = 0.05              # N
DSM_MODE: str = "clamped"                  # "clamped" | "unclamped"

# ── Certificates ────────────────────────────────────────────────────────────
ZETA_MAX: float = math.pi / 3              # rad, restriction on |ζ̃|
GAMMA_OUT_LEVELS: tuple[float, ...] = (0.02, 0.05, 0.1)   # rad
GAMMA_OUT_DURATION: float = 4.0            # s

# ── Audit tolerances ────────────────────────────────────────────────────────
TENSION_TOL: float = 1e-6                  # N
SPHERE_TOL: float = 1e-9                   # relative to L
TANGENCY_TOL: float = 1e-6                 # relative to L·max(‖v‖, 1)
VDOT_REL_TOL: float = 1e-8                 # relative to V
LYAPUNOV_FLOOR: float = 1e-12
MONOTONE_TOL: float = 1e-10                # allowed V_out increase, ideal loop

# ── Acceptance ──────────────────────────────────────────────────────────────
LEMMA2_SAMPLES: int = 100_000
ORDER_BAND: tuple[float, float] = (3.7, 4.3)
