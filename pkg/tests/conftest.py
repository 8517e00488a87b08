"""Shared fixtures and hypothesis strategies for the test suite."""

import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from dynamics.so3_math import Quaternion  # noqa: E402

SCENARIOS = ROOT / "scenarios"

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


# ── Strategies ──────────────────────────────────────────────────────────────

finite = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)

vectors = st.lists(st.floats(min_value=-10.0, max_value=10.0, allow_nan=False),
                   min_size=3, max_size=3).map(np.array)

unit_quaternions = (
    st.lists(finite, min_size=4, max_size=4)
    .filter(lambda xs: np.linalg.norm(xs) > 0.1)
    .map(lambda xs: Quaternion.from_array(np.asarray(xs) / np.linalg.norm(xs)))
)

sphere_directions = (
    st.lists(finite, min_size=3, max_size=3)
    .filter(lambda xs: np.linalg.norm(xs) > 0.1)
    .map(lambda xs: np.asarray(xs) / np.linalg.norm(xs))
)


# ── Fixtures ────────────────────────────────────────────────────────────────

@pytest.fixture
def base_mapping() -> dict:
    """Minimal valid scenario mapping; tests copy and mutate it."""
    return {
        "name": "unit",
        "experiment": "run",
        "seed": 0,
        "duration_s": 0.2,
        "dt_s": 0.002,
        "plant": {"mass_kg": 1.0, "inertia_kg_m2": [0.02, 0.02, 0.04],
                  "cable_length_m": 2.0, "thrust_max_n": 20.0, "tension_min_n": 0.5},
        "outer": {"kp_n_per_m": 4.0, "kd_n_s_per_m": 4.0, "pulling_n": 1.0},
        "inner": {"kp_n_m": 50.0},
        "initial": {"polar_deg": 0.0},
        "target": {"polar_deg": 0.0},
    }


@pytest.fixture
def scenario_path():
    def _path(name: str) -> Path:
        return SCENARIOS / f"{name}.yaml"
    return _path
