"""End-to-end checks on the shipped scenarios. Run with ``pytest -m slow``."""

from dataclasses import replace

import numpy as np
import pytest
import yaml

from certificates.bounds import inner_certificate, small_gain_check
from harness.experiments import run_experiment
from harness.runner import DivergenceError, estimate_gamma_out, run_scenario
from harness.scenario import load_scenario, scenario_from_mapping
from harness.telemetry import write_telemetry

pytestmark = pytest.mark.slow

POSITION = ["p_x_m", "p_y_m", "p_z_m"]
VELOCITY = ["v_x_m_s", "v_y_m_s", "v_z_m_s"]


def _governed(scenario_path, mode: str):
    return load_scenario(scenario_path("step_downhill"), experiment="step_governed", governor=mode)


def _variant(scenario_path, name: str, **sections):
    raw = yaml.safe_load(scenario_path(name).read_text(encoding="utf-8"))
    raw.update(sections)
    raw["name"] = f"{name}_" + "_".join(sorted(sections))
    return scenario_from_mapping(raw)


def test_constraint_invariance(scenario_path):
    sc = load_scenario(scenario_path("cascade_60deg"), dt=0.001)
    sc = replace(sc, duration=20.0)
    telemetry, _ = run_scenario(sc)
    p = telemetry[POSITION].to_numpy()
    v = telemetry[VELOCITY].to_numpy()
    L = sc.plant.L
    assert np.max(np.abs(np.linalg.norm(p, axis=1) - L)) / L <= 1e-9
    radial = np.abs(np.einsum("ij,ij->i", p, v))
    assert np.all(radial <= 1e-6 * L * np.maximum(np.linalg.norm(v, axis=1), 1.0))


def test_hover_equilibrium(scenario_path):
    sc = load_scenario(scenario_path("hover"))
    telemetry, report = run_scenario(sc)
    assert report.passed
    np.testing.assert_allclose(telemetry[POSITION].to_numpy(), np.tile(sc.initial.p, (len(telemetry), 1)),
                               atol=1e-9)
    np.testing.assert_allclose(telemetry["T_raw_n"], sc.plant.weight + 1.0, atol=1e-9)
    np.testing.assert_allclose(telemetry["T_c_n"], 1.0, atol=1e-9)


def test_ideal_attitude_converges_monotonically(scenario_path):
    sc = load_scenario(scenario_path("lemma1_ideal"))
    result = run_experiment(sc)
    assert result.report.properties["outer_monotone"].passed
    assert result.summary["kp_feasible"]
    assert result.summary["final_dist_m"] < 1e-3 * sc.plant.L
    assert result.passed


def test_cascade_from_sixty_degrees(scenario_path):
    sc = load_scenario(scenario_path("cascade_60deg"))
    telemetry, report = run_scenario(sc)
    assert telemetry["dist_m"].iloc[-1] < 1e-3 * sc.plant.L
    for name in ("sphere", "lemma2", "outer_iss", "inner_iss"):
        assert report.properties[name].passed, name
    gamma_in = inner_certificate(sc.inner, sc.plant.J).gamma_in
    assert small_gain_check(gamma_in, estimate_gamma_out(sc))


def test_misalignment_monte_carlo(scenario_path):
    result = run_experiment(load_scenario(scenario_path("lemma2_mc")))
    assert result.summary["samples"] == 100_000
    assert result.summary["violations"] == 0


def test_gain_ladder(scenario_path):
    result = run_experiment(load_scenario(scenario_path("gain_ladder")))
    assert result.summary["strictly_decreasing"]
    assert result.summary["gamma_ratio_1e4_1e2"] < 0.1 + 1e-9
    assert result.table["within_bound"].all()


def test_ungoverned_step_breaks_tension(scenario_path):
    result = run_experiment(load_scenario(scenario_path("step_downhill")))
    assert not result.passed
    assert result.summary["first_failure"] == "tension"
    assert result.summary["tension_violations"] > 0


@pytest.mark.parametrize("mode", ["rg", "erg"])
def test_governed_step_keeps_tension(scenario_path, mode):
    sc = _governed(scenario_path, mode)
    result = run_experiment(sc)
    assert result.report.properties["tension"].passed
    assert result.summary["tension_violations"] == 0
    assert result.summary["final_dist_ref_m"] <= 1e-3 * sc.plant.L


def test_low_gain_cascade_is_flagged(scenario_path):
    sc = load_scenario(scenario_path("low_gain"))
    gamma_in = inner_certificate(sc.inner, sc.plant.J).gamma_in
    assert not small_gain_check(gamma_in, estimate_gamma_out(sc))
    try:
        _, report = run_scenario(sc)
    except DivergenceError:
        return
    assert not report.passed
    assert report.first_failure == "tension"


def test_integrator_order(scenario_path):
    result = run_experiment(load_scenario(scenario_path("integrator_order")))
    assert 3.7 <= result.summary["order"] <= 4.3


def test_iss_decrease_over_battery(scenario_path):
    runs = [load_scenario(scenario_path(name)) for name in ("hover", "cascade_60deg", "lemma1_ideal")]
    runs += [_governed(scenario_path, mode) for mode in ("rg", "erg")]
    runs += [
        _variant(scenario_path, "cascade_60deg", target={"polar_deg": 45.0, "azimuth_deg": -90.0}),
        _variant(scenario_path, "cascade_60deg", target={"polar_deg": 30.0, "azimuth_deg": 150.0}),
        _variant(scenario_path, "cascade_60deg", initial={"polar_deg": 20.0, "azimuth_deg": 200.0},
                 target={"polar_deg": 70.0, "azimuth_deg": 10.0}),
        _variant(scenario_path, "cascade_60deg",
                 governor={"mode": "erg", "horizon_s": 1.0, "dt_pred_s": 0.01}),
        _variant(scenario_path, "lemma1_ideal", target={"polar_deg": 50.0, "azimuth_deg": -40.0}),
    ]
    assert len(runs) == 10
    for sc in runs:
        _, report = run_scenario(sc)
        assert report.properties["outer_iss"].passed, sc.name
        assert report.properties["inner_iss"].passed, sc.name


def test_repeated_runs_write_identical_files(scenario_path, tmp_path):
    sc = load_scenario(scenario_path("cascade_60deg"))
    first = write_telemetry(run_scenario(sc)[0], tmp_path / "first.csv")
    second = write_telemetry(run_scenario(sc)[0], tmp_path / "second.csv")
    assert first.read_bytes() == second.read_bytes()
