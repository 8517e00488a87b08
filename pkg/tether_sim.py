"""
tether_sim.py: command-line entry point.

    python tether_sim.py simulate scenarios/cascade_60deg.yaml --out runs
    python tether_sim.py experiment lemma2_mc scenarios/lemma2_mc.yaml
    python tether_sim.py audit runs/cascade_60deg.run.csv

Exit codes: 0 when every audited property passes, 1 on a property
failure (or divergence), 2 on a configuration error.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

# Ensure project root is on the import path so that `config`, `dynamics`,
# `control`, ... are importable regardless of the caller's working directory.
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config
from certificates.audit import trajectory_audit
from certificates.bounds import CertificateError
from governor.prediction import GovernorConfigError
from harness.charts import write_run_charts
from harness.experiments import EXPERIMENT_TABLE, run_experiment
from harness.runner import DivergenceError, build_certificates
from harness.scenario import ScenarioError, dump_scenario, load_scenario
from harness.telemetry import TelemetryError, read_telemetry, write_telemetry

logger = logging.getLogger("tether_sim")

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG = 0, 1, 2
CLOSED_LOOP = ("run", "lemma1_ideal", "step_governed", "step_ungoverned")

# CLI spelling of the literal margin κ·(T̂ − T_c,min + ε)².
DSM_ALIASES = {"paper": "unclamped"}


def setup_logging(output_dir: Path | None, level: str) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(output_dir / "tether_sim.log", encoding="utf-8"))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        handlers=handlers,
        force=True,
    )


def resolve_scenario(path: Path) -> Path:
    """Return ``path``, or its match under SCENARIOS_DIR for a bare scenario name."""
    if path.exists():
        return path
    for candidate in (Path(config.SCENARIOS_DIR) / path, Path(config.SCENARIOS_DIR) / f"{path}.yaml"):
        if candidate.exists():
            return candidate
    return path


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Tethered quadrotor cascade: simulation, governors and certificate audit",
    )
    parser.add_argument("--out", type=Path, default=Path(config.OUTPUT_DIR),
                        help=f"output directory (default: {config.OUTPUT_DIR})")
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="logging level")

    # Same flags after the subcommand; SUPPRESS keeps the top-level value when absent.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--log-level", default=argparse.SUPPRESS, help="logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    def overrides(p: argparse.ArgumentParser) -> None:
        p.add_argument("scenario", type=Path,
                       help=f"scenario YAML file, or a scenario name under {config.SCENARIOS_DIR}")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--dt", type=float, default=None, help="override the plant step (s)")
        p.add_argument("--governor", choices=("off", "rg", "erg"), default=None,
                       help="override the governor mode")
        p.add_argument("--dsm", choices=("paper", "unclamped", "clamped"), default=None,
                       help="dynamic safety margin variant for the ERG (paper = unclamped)")
        p.add_argument("--plot", action="store_true", help="write plotly charts for runs")

    overrides(sub.add_parser("simulate", parents=[common],
                             help="run one closed-loop scenario and audit it"))
    exp = sub.add_parser("experiment", parents=[common], help="run a canned experiment")
    exp.add_argument("name", choices=sorted(EXPERIMENT_TABLE))
    overrides(exp)
    audit = sub.add_parser("audit", parents=[common], help="re-audit a telemetry file")
    audit.add_argument("telemetry", type=Path, help="telemetry CSV written by simulate")
    return parser.parse_args(argv)


def _simulate_or_experiment(args: argparse.Namespace) -> int:
    name = getattr(args, "name", None)
    sc = load_scenario(resolve_scenario(args.scenario), seed=args.seed, dt=args.dt,
                       governor=args.governor, dsm=DSM_ALIASES.get(args.dsm, args.dsm),
                       experiment=name)
    if name is None:
        name = sc.experiment if sc.experiment in CLOSED_LOOP else "run"

    print("=" * 60)
    print(f"  Tether sim: {name} on {sc.name}")
    print("=" * 60)
    print(f"\n[1/2] Running {name} (seed {sc.seed}, dt {sc.dt} s) …")
    try:
        result = run_experiment(sc, name)
    except DivergenceError as exc:
        prefix = args.out / f"{sc.name}.{name}"
        write_telemetry(exc.telemetry, prefix.with_name(prefix.name + ".csv"))
        dump_scenario(sc, prefix.with_name(prefix.name + ".scenario.yaml"))
        print(f"   ❌  Diverged: {exc} (last valid row {exc.last_index})")
        return EXIT_PROPERTY

    print("[2/2] Writing outputs …")
    for path in result.write(args.out, sc):
        print(f"   {path}")
    if args.plot and result.telemetry is not None:
        chart = write_run_charts(result.telemetry, sc.plant.T_c_min,
                                 args.out / f"{sc.name}.{name}.charts.html")
        print(f"   {chart}")

    print("\n" + "=" * 60)
    if result.passed:
        print("  ✅  All checks passed")
    else:
        failing = result.report.first_failure if result.report is not None else None
        suffix = f": first broken bound {failing}" if failing else ""
        print(f"  ❌  Checks failed{suffix}")
    print("=" * 60)
    return EXIT_OK if result.passed else EXIT_PROPERTY


def _audit(args: argparse.Namespace) -> int:
    path = args.telemetry
    stem = path.with_suffix("")
    sidecar = stem.with_name(stem.name + ".scenario.yaml")
    sc = load_scenario(sidecar)
    report = trajectory_audit(read_telemetry(path), build_certificates(sc))
    report_path, steps_path = report.write(stem)
    print(f"Audit of {path}: {'passed' if report.passed else 'failed'}")
    for name, verdict in report.properties.items():
        print(f"   {'✅' if verdict.passed else '❌'}  {name:<15} worst margin {verdict.worst_margin:.3e}")
    print(f"   {report_path}\n   {steps_path}")
    return EXIT_OK if report.passed else EXIT_PROPERTY


def main(argv=None) -> int:
    args = parse_args(argv)
    setup_logging(args.out, args.log_level)
    try:
        if args.command == "audit":
            return _audit(args)
        return _simulate_or_experiment(args)
    except (ScenarioError, TelemetryError, CertificateError, GovernorConfigError) as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
