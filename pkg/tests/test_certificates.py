"""Tests for the closed-form certificates and the trajectory audit."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from certificates.audit import PROPERTY_ORDER, CertificateSet, trajectory_audit
from certificates.bounds import (
    CertificateError, checked_min_eigenvalue, eig2, epsilon_interval, eta_interval,
    inner_certificate, inner_gain, lemma2_bound, lyapunov_inner, lyapunov_outer,
    outer_certificate, outer_Q_and_bounds, small_gain_check,
)
from conftest import sphere_directions, unit_quaternions
from control.inner_loop import InnerGains, attitude_response
from control.outer_loop import OuterGains, sphere_point
from dynamics.plant import PlantParams
from dynamics.so3_math import Quaternion
from harness.runner import build_certificates, simulate
from harness.scenario import scenario_from_mapping

J_NOMINAL = np.diag([0.02, 0.02, 0.04])


class TestEigenvalues:

    @given(st.floats(-50.0, 50.0), st.floats(-50.0, 50.0), st.floats(-50.0, 50.0))
    def test_closed_form_matches_lapack(self, a, b, d):
        M = np.array([[a, b], [b, d]])
        np.testing.assert_allclose(eig2(M), np.linalg.eigvalsh(M), atol=1e-10)

    def test_checked_minimum(self):
        assert checked_min_eigenvalue(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(1.0)


class TestMisalignmentBound:

    def test_zero_error(self):
        assert lemma2_bound(12.0, 0.0) == 0.0

    def test_arithmetic(self):
        assert lemma2_bound(10.0, 0.1) == pytest.approx(math.sqrt(6.0))
        assert lemma2_bound(10.0, -0.1) == pytest.approx(math.sqrt(6.0))


class TestInnerCertificate:

    def test_eta_interval_example(self):
        J = 0.02 * np.eye(3)
        assert eta_interval(100.0, 20.0, J) == pytest.approx((0.0, 4000.0 / 408.0))

    def test_eta_interval_vanishes_with_damping(self):
        assert eta_interval(100.0, 1e-9, J_NOMINAL)[1] < 1e-6

    def test_inner_gain_example(self):
        Qbar, Dbar, gamma_in = inner_gain(100.0, 20.0, 1.0, 0.02)
        np.testing.assert_allclose(Qbar, [[200.0, 20.0], [20.0, 19.96]])
        np.testing.assert_allclose(Dbar, [140.0, 0.04])
        assert gamma_in == pytest.approx(2793.6 / 3592.0)

    def test_zero_inertia_bound(self):
        _, Dbar, _ = inner_gain(100.0, 20.0, 1.0, 0.0)
        assert Dbar[1] == 0.0

    def test_indefinite_rejected(self):
        with pytest.raises(CertificateError):
            inner_gain(50.0, 2.0, 100.0, 0.04)

    def test_eta_outside_interval_rejected(self):
        with pytest.raises(CertificateError):
            inner_certificate(InnerGains(50.0, 2.0), J_NOMINAL, eta=1e3)

    @pytest.mark.parametrize("J, constant", [
        (0.02 * np.eye(3), 0.8216),
        (J_NOMINAL, 0.8787),
    ])
    def test_gain_scales_with_inverse_root(self, J, constant):
        for K in (1e2, 1e3, 1e4):
            cert = inner_certificate(InnerGains.from_ladder(K, 0.3), J)
            assert cert.gamma_in * math.sqrt(K) == pytest.approx(constant, rel=1e-3)

    def test_ladder_ratio(self):
        g2 = inner_certificate(InnerGains.from_ladder(1e2, 0.3), J_NOMINAL).gamma_in
        g4 = inner_certificate(InnerGains.from_ladder(1e4, 0.3), J_NOMINAL).gamma_in
        assert g4 / g2 == pytest.approx(0.1, rel=1e-9)

    def test_nominal_gains(self):
        cert = inner_certificate(InnerGains.from_ladder(50.0, 0.3), J_NOMINAL)
        assert cert.gamma_in == pytest.approx(0.1243, abs=1e-3)
        assert cert.lambda_M == pytest.approx(0.04)
        assert cert.iss_factor > 0.0

    def test_lyapunov_zero_at_equilibrium(self):
        assert lyapunov_inner(Quaternion.identity(), np.zeros(3), InnerGains(50.0, 2.0), 1.0, J_NOMINAL) == 0.0

    def test_lyapunov_pure_rate(self):
        V = lyapunov_inner(Quaternion.identity(), [1.0, 0.0, 0.0], InnerGains(100.0, 20.0), 1e-3,
                           0.02 * np.eye(3))
        assert V == pytest.approx(0.01)

    @pytest.mark.parametrize("angle, omega0", [
        (1.0, [0.0, 0.0, 0.0]),
        (0.6, [0.4, -0.2, 0.3]),
    ])
    def test_lyapunov_decreases_along_unforced_response(self, angle, omega0):
        gains = InnerGains.from_ladder(50.0, 0.3)
        cert = inner_certificate(gains, J_NOMINAL)
        trace = attitude_response(Quaternion.from_angle_axis(angle, [0.3, -0.5, 0.8]), np.array(omega0),
                                  lambda t: Quaternion.identity(), gains, J_NOMINAL, dt=1e-3, duration=2.0)
        V = np.array([lyapunov_inner(Quaternion.from_array(q), w, gains, cert.eta, J_NOMINAL)
                      for q, w in zip(trace.q_tilde, trace.omega)])
        live = V[:-1] > 1e-8
        assert live.sum() > 100
        assert np.all(np.diff(V)[live] < 0.0)

    @given(unit_quaternions, st.lists(st.floats(-5.0, 5.0), min_size=3, max_size=3))
    def test_lyapunov_positive(self, q, omega):
        gains = InnerGains.from_ladder(50.0, 0.3)
        cert = inner_certificate(gains, J_NOMINAL)
        q = q.canonical()
        V = lyapunov_inner(q, omega, gains, cert.eta, J_NOMINAL)
        if q.q0 < 1.0 or np.linalg.norm(omega) > 1e-6:
            assert V > 0.0


class TestOuterCertificate:

    def test_epsilon_interval_example(self):
        assert epsilon_interval(10.0, 5.0)[1] == pytest.approx(80.0 / (320.0 + 25.0 * math.pi ** 2))
        assert epsilon_interval(10.0, 5.0)[1] == pytest.approx(0.14116, abs=1e-5)

    def test_q_symmetric_and_positive(self):
        eps = 0.5 * epsilon_interval(4.0, 4.0)[1]
        cert = outer_Q_and_bounds(4.0, 4.0, eps, 2.0)
        np.testing.assert_array_equal(cert.Q, cert.Q.T)
        assert cert.mu_Q > 0.0
        assert cert.delta_max == pytest.approx(4.0 * cert.mu_Q * 4.0 / math.hypot(eps, 0.25))
        assert cert.iss_radius(1.0) == pytest.approx(math.hypot(eps, 0.25) / cert.mu_Q)

    def test_small_epsilon_limit(self):
        cert = outer_Q_and_bounds(4.0, 4.0, 1e-9, 2.0)
        np.testing.assert_allclose(cert.Q, np.diag([0.0, 1.0]), atol=1e-8)
        assert cert.mu_Q < 1e-8
        assert cert.delta_max < 1e-6

    @pytest.mark.parametrize("eps", [0.0, -0.1, 0.3])
    def test_epsilon_outside_interval_rejected(self, eps):
        with pytest.raises(CertificateError):
            outer_Q_and_bounds(4.0, 4.0, eps, 2.0)

    def test_default_epsilon_is_midpoint(self):
        params = PlantParams()
        cert = outer_certificate(OuterGains(K_pt=4.0, K_dt=4.0), params)
        assert cert.epsilon == pytest.approx(0.5 * epsilon_interval(4.0, 4.0)[1])
        assert cert.T_sup == params.T_max

    def test_lyapunov_zero_at_reference(self):
        p = sphere_point(2.0, 0.4, 0.2)
        assert lyapunov_outer(p, np.zeros(3), p, 4.0, 0.1, 2.0) == 0.0

    def test_lyapunov_at_rest_is_half_square_distance(self):
        p, p_d = sphere_point(2.0, 0.1), sphere_point(2.0, 1.1, 0.5)
        d = 2.0 * math.acos(float(p @ p_d) / 4.0)
        assert lyapunov_outer(p, np.zeros(3), p_d, 4.0, 0.1, 2.0) == pytest.approx(0.5 * d * d)

    @given(sphere_directions, sphere_directions, st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
    def test_lyapunov_positive_inside_interval(self, a, b, s1, s2):
        h_pt = h_dt = 4.0
        eps = 0.5 * epsilon_interval(h_pt, h_dt)[1]
        p, p_d = 2.0 * a, 2.0 * b
        e1 = np.cross(a, [0.2, 0.5, -0.8])
        if np.linalg.norm(e1) < 1e-6:
            e1 = np.cross(a, [1.0, 0.0, 0.0])
        e1 /= np.linalg.norm(e1)
        v = s1 * e1 + s2 * np.cross(a, e1)
        V = lyapunov_outer(p, v, p_d, h_pt, eps, 2.0)
        if np.linalg.norm(p - p_d) > 1e-9 or np.linalg.norm(v) > 1e-6:
            assert V > 0.0


class TestSmallGain:

    @pytest.mark.parametrize("gamma_in, gamma_out, expected", [
        (0.0, 1e6, True),
        (0.5, 1.9, True),
        (0.5, 2.1, False),
    ])
    def test_examples(self, gamma_in, gamma_out, expected):
        assert small_gain_check(gamma_in, gamma_out) is expected

    @pytest.mark.parametrize("gamma_in, gamma_out", [(-0.1, 1.0), (math.inf, 1.0), (0.5, math.nan)])
    def test_invalid_gains(self, gamma_in, gamma_out):
        with pytest.raises(ValueError):
            small_gain_check(gamma_in, gamma_out)


# ── Trajectory audit ────────────────────────────────────────────────────────

@pytest.fixture
def hover_run(base_mapping):
    sc = scenario_from_mapping(base_mapping)
    certs = build_certificates(sc, gamma_out=4.0)
    return simulate(sc, certs), certs


class TestAudit:

    def test_equilibrium_passes(self, hover_run):
        log, certs = hover_run
        report = trajectory_audit(log, certs)
        assert report.passed
        assert report.first_failure is None
        assert set(report.properties) == {"tension", "lemma2", "outer_iss", "inner_iss", "restriction",
                                          "sphere", "small_gain"}
        assert len(report.steps) == len(log)
        # Constant margins at a fixed point.
        assert report.steps["tension_margin_n"].nunique() == 1

    def test_tension_violation_located(self, hover_run):
        log, certs = hover_run
        log = log.copy()
        log.loc[7, "T_c_n"] = 0.1
        report = trajectory_audit(log, certs)
        verdict = report.properties["tension"]
        assert not verdict.passed
        assert verdict.first_index == 7
        assert verdict.failures == 1
        assert report.first_failure == "tension"

    def test_same_step_tie_broken_by_property_order(self, hover_run):
        log, certs = hover_run
        log = log.copy()
        log.loc[5, "delta_n"] = 1.0
        log.loc[5, "p_x_m"] = 0.5
        report = trajectory_audit(log, certs)
        assert not report.properties["lemma2"].passed
        assert not report.properties["sphere"].passed
        assert report.first_failure == "lemma2"
        assert PROPERTY_ORDER.index("lemma2") < PROPERTY_ORDER.index("sphere")

    def test_earlier_step_wins(self, hover_run):
        log, certs = hover_run
        log = log.copy()
        log.loc[20, "T_c_n"] = 0.0
        log.loc[3, "zeta_tilde_rad"] = 2.0
        report = trajectory_audit(log, certs)
        assert report.first_failure == "restriction"

    def test_small_gain_failure_is_static(self, hover_run):
        log, certs = hover_run
        report = trajectory_audit(log, CertificateSet(
            inner=certs.inner, outer=certs.outer, L=certs.L, T_c_min=certs.T_c_min, gamma_out=1e3))
        assert not report.passed
        assert report.first_failure == "small_gain"

    def test_monotone_only_for_ideal_runs(self, hover_run):
        log, certs = hover_run
        assert "outer_monotone" not in trajectory_audit(log, certs).properties
        ideal = CertificateSet(inner=certs.inner, outer=certs.outer, L=certs.L,
                               T_c_min=certs.T_c_min, check_monotone=True)
        bumped = log.copy()
        bumped.loc[10, "V_out"] = 1.0
        report = trajectory_audit(bumped, ideal)
        assert report.properties["outer_monotone"].first_index == 10

    def test_report_written(self, hover_run, tmp_path):
        log, certs = hover_run
        report = trajectory_audit(log, certs)
        report_path, steps_path = report.write(tmp_path / "hover")
        assert report_path.name == "hover.report.yaml"
        assert steps_path.exists()
        assert report.as_dict()["properties"]["tension"]["passed"] is True
