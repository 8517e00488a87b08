from .experiments import EXPERIMENT_TABLE, ExperimentResult, run_experiment
from .runner import DivergenceError, build_certificates, estimate_gamma_out, run_scenario, simulate
from .scenario import Scenario, ScenarioError, apply_overrides, dump_scenario, load_scenario
from .telemetry import COLUMNS, TelemetryError, read_telemetry, write_telemetry
