"""Tests for the constrained vehicle dynamics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import sphere_directions, unit_quaternions
from control.outer_loop import OuterGains, hover_attitude, sphere_point
from dynamics.plant import (
    ControlCommand, DegenerateCableError, PlantParams, PlantParamsError, UavState,
    active_force, cable_tension_monitor, constraint_multiplier, dynamics_deriv,
    mechanical_energy, saturate_thrust, step,
)
from dynamics.so3_math import Quaternion

PARAMS = PlantParams(m=1.0, J=np.diag([0.02, 0.02, 0.04]), L=2.0, g=9.81, T_max=20.0, T_c_min=0.5)
Z = np.array([0.0, 0.0, 1.0])


def _state(p, v=(0.0, 0.0, 0.0), q=None, omega=(0.0, 0.0, 0.0)) -> UavState:
    return UavState(p=np.asarray(p, dtype=float), v=np.asarray(v, dtype=float),
                    q=q or Quaternion.identity(), omega=np.asarray(omega, dtype=float))


class TestParams:

    def test_defaults_are_valid(self):
        params = PlantParams()
        assert params.weight == pytest.approx(9.81)
        assert params.lambda_max == pytest.approx(0.04)

    @pytest.mark.parametrize("kwargs", [
        {"m": 0.0},
        {"L": -1.0},
        {"T_c_min": -0.1},
        {"T_max": 9.0},
        {"J": np.diag([0.02, -0.02, 0.04])},
        {"J": np.array([[0.02, 0.01, 0.0], [0.0, 0.02, 0.0], [0.0, 0.0, 0.04]])},
    ])
    def test_rejects_inconsistent_values(self, kwargs):
        with pytest.raises(PlantParamsError):
            PlantParams(**kwargs)


class TestForces:

    def test_weight_cancelled_by_vertical_thrust(self):
        np.testing.assert_allclose(active_force(_state(2.0 * Z), 9.81, PARAMS), np.zeros(3), atol=1e-15)

    def test_zero_thrust_leaves_gravity(self):
        np.testing.assert_allclose(active_force(_state(2.0 * Z), 0.0, PARAMS), [0.0, 0.0, -9.81])

    def test_excess_thrust(self):
        np.testing.assert_allclose(active_force(_state(2.0 * Z), 11.81, PARAMS), [0.0, 0.0, 2.0],
                                   atol=1e-12)

    def test_tension_at_pole_is_pulling_term(self):
        T_p = 1.3
        assert cable_tension_monitor(_state(2.0 * Z), 9.81 + T_p, PARAMS) == pytest.approx(T_p)

    def test_tension_zero_for_tangent_force(self):
        # Thrust along x̂ and gravity along −ẑ are both orthogonal to r̂ = ŷ.
        params = PlantParams(m=1.0, g=1.0, T_max=20.0)
        q = Quaternion.from_angle_axis(math.pi / 2, [0.0, 1.0, 0.0])
        state = _state([0.0, 2.0, 0.0], q=q)
        assert cable_tension_monitor(state, 5.0, params) == pytest.approx(0.0, abs=1e-12)

    def test_gravity_tangent_at_equator(self):
        assert cable_tension_monitor(_state([2.0, 0.0, 0.0]), 0.0, PARAMS) == pytest.approx(0.0, abs=1e-15)

    def test_multiplier_equals_tension_at_rest(self):
        state = _state(sphere_point(2.0, 0.7, 1.1))
        assert constraint_multiplier(state, 12.0, PARAMS) == cable_tension_monitor(state, 12.0, PARAMS)

    def test_multiplier_adds_centripetal_term(self):
        params = PlantParams(m=1.0, L=1.0, g=2.0, T_max=20.0)
        # ⟨F_a, r̂⟩ = T − g = 2 at the pole with identity attitude.
        state = _state(Z, v=[1.0, 0.0, 0.0])
        assert constraint_multiplier(state, 4.0, params) == pytest.approx(3.0)

    def test_anchor_position_raises(self):
        with pytest.raises(DegenerateCableError):
            cable_tension_monitor(_state(np.zeros(3)), 10.0, PARAMS)


class TestSaturation:

    @pytest.mark.parametrize("raw, expected", [(-1.0, 0.0), (12.3, 12.3), (25.0, 20.0), (20.0, 20.0)])
    def test_clamp(self, raw, expected):
        assert saturate_thrust(raw, PARAMS) == expected


class TestDerivative:

    def test_hover_equilibrium(self):
        gains = OuterGains(T_p=1.0).resolved(PARAMS)
        p = 2.0 * Z
        state = _state(p, q=hover_attitude(p, gains, PARAMS))
        d = dynamics_deriv(state, ControlCommand(T=10.81, tau=np.zeros(3)), PARAMS)
        np.testing.assert_allclose(d.v_dot, np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(d.omega_dot, np.zeros(3), atol=1e-15)
        np.testing.assert_allclose(d.q_dot, np.zeros(4), atol=1e-15)

    def test_principal_spin_has_no_gyroscopic_torque(self):
        state = _state(2.0 * Z, omega=[0.0, 0.0, 1.0])
        d = dynamics_deriv(state, ControlCommand(T=9.81, tau=np.zeros(3)), PARAMS)
        np.testing.assert_allclose(d.omega_dot, np.zeros(3), atol=1e-15)

    @settings(max_examples=50)
    @given(sphere_directions, unit_quaternions, st.floats(0.0, 20.0), st.floats(-2.0, 2.0))
    def test_acceleration_keeps_radius(self, r_hat, q, T, speed):
        p = 2.0 * r_hat
        e = np.cross(r_hat, [0.3, -0.7, 0.2])
        if np.linalg.norm(e) < 1e-6:
            e = np.cross(r_hat, [1.0, 0.0, 0.0])
        v = speed * e / np.linalg.norm(e)
        d = dynamics_deriv(_state(p, v=v, q=q), ControlCommand(T=T, tau=np.zeros(3)), PARAMS)
        # d²/dt² ‖p‖² = 2(‖v‖² + ⟨p, v̇⟩) vanishes under the constraint reaction.
        assert float(v @ v + p @ d.v_dot) == pytest.approx(0.0, abs=1e-9)


class TestStep:

    def test_equilibrium_is_a_fixed_point(self):
        gains = OuterGains(T_p=1.0).resolved(PARAMS)
        p = sphere_point(2.0, 0.0)
        state = _state(p, q=hover_attitude(p, gains, PARAMS))
        cmd = ControlCommand(T=10.81, tau=np.zeros(3))
        for dt in (1e-4, 1e-3, 0.05):
            out = step(state, cmd, dt, PARAMS)
            np.testing.assert_allclose(out.as_vector(), state.as_vector(), atol=1e-12)

    @settings(max_examples=30)
    @given(sphere_directions, unit_quaternions, st.floats(0.0, 20.0))
    def test_output_on_constraint_manifold(self, r_hat, q, T):
        e = np.cross(r_hat, [0.1, 0.9, -0.4])
        if np.linalg.norm(e) < 1e-6:
            e = np.cross(r_hat, [1.0, 0.0, 0.0])
        state = _state(2.0 * r_hat, v=0.8 * e / np.linalg.norm(e), q=q, omega=[0.3, -0.1, 0.2])
        out = step(state, ControlCommand(T=T, tau=np.array([0.01, 0.0, -0.02])), 0.005, PARAMS)
        assert np.linalg.norm(out.p) == pytest.approx(2.0, rel=1e-12)
        assert float(out.p @ out.v) == pytest.approx(0.0, abs=1e-12)
        assert out.q.norm() == pytest.approx(1.0, abs=1e-12)

    def test_free_swing_conserves_energy(self):
        state = _state(sphere_point(2.0, 1.2, 0.4), v=[0.0, 0.0, 0.0])
        cmd = ControlCommand(T=0.0, tau=np.zeros(3))
        e0 = mechanical_energy(state, PARAMS)
        for _ in range(2000):
            state = step(state, cmd, 1e-3, PARAMS)
        assert mechanical_energy(state, PARAMS) == pytest.approx(e0, abs=1e-6)

    def test_non_positive_dt_raises(self):
        with pytest.raises(ValueError):
            step(_state(2.0 * Z), ControlCommand(T=0.0, tau=np.zeros(3)), 0.0, PARAMS)

    def test_anchor_position_raises(self):
        with pytest.raises(DegenerateCableError):
            step(_state(np.zeros(3)), ControlCommand(T=0.0, tau=np.zeros(3)), 0.01, PARAMS)
