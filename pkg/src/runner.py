# src/runner.py
"""
Command-line front-end.

    python -m src.runner run <config.yaml> [--out DIR] [--grid-n N] [--a-max YEARS] [--verbose]
    python -m src.runner validate <config.yaml>

Exit codes: 0 success, 1 configuration error, 2 model error (infeasible, not converged, ...).
"""
import argparse
import logging
import os
import sys
import warnings
from typing import Optional

from dotenv import load_dotenv

from src.analyses.base_analysis import AnalysisOutput, ScenarioContext
from src.analyses.epidemic_analyses import LyapunovAnalysis, R0Analysis, SimulateAnalysis, SteadyAnalysis
from src.analyses.vaccination_analyses import SweepAnalysis, VaccinateAnalysis
from src.config import Scenario, validate_config
from src.errors import ConfigError, ModelError, ScenarioFailure, SeqirWarning
from src.tools.export_tools import write_csv, write_json

log = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "outputs"
PREVIEW_ROWS = 20

ANALYSES = {
    "simulate": SimulateAnalysis,
    "steady": SteadyAnalysis,
    "r0": R0Analysis,
    "lyapunov": LyapunovAnalysis,
    "vaccinate": VaccinateAnalysis,
    "sweep": SweepAnalysis,
}


def read_config(path: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"❌ scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def load_scenario(path: str, grid_n: Optional[int] = None, a_max: Optional[float] = None) -> Scenario:
    """Read and validate a scenario file; ConfigError carries every diagnostic."""
    overrides = {key: value for key, value in (("n", grid_n), ("a_max", a_max)) if value is not None}
    default_name = os.path.splitext(os.path.basename(path))[0]
    scenario, diagnostics = validate_config(read_config(path), default_name=default_name, grid_overrides=overrides)
    if diagnostics:
        raise ConfigError(f"{len(diagnostics)} problem(s) in {path}", diagnostics)
    return scenario


class ScenarioRunner:
    """
    Orchestrates one scenario: load and validate the config, build the model
    objects, dispatch to the analysis named by `run`, and write {run}.csv / {run}.json.
    """

    def __init__(
        self,
        config_path: str,
        output_dir: Optional[str] = None,
        grid_n: Optional[int] = None,
        a_max: Optional[float] = None,
    ):
        print("🚀 Initializing SEQIR scenario runner...")
        print(f"   📂 Loading scenario from: {config_path}")
        self.scenario = load_scenario(config_path, grid_n=grid_n, a_max=a_max)
        # CLI flag, then the scenario file, then the environment
        self.output_dir = (
            output_dir or self.scenario.output_dir or os.getenv("SEQIR_OUTPUT_DIR") or DEFAULT_OUTPUT_DIR
        )
        self.output: Optional[AnalysisOutput] = None

    def run_scenario(self) -> AnalysisOutput:
        name, run = self.scenario.name, self.scenario.run
        grid = self.scenario.grid
        print(f"   ▶️ Running '{run}' for scenario '{name}' (a_max = {grid.a_max:g}, n = {grid.n})...")
        try:
            context = ScenarioContext.from_scenario(self.scenario)
        except ValueError as exc:
            raise ConfigError(f"[{name}/{run}] {exc}") from exc
        except ModelError as exc:
            raise ScenarioFailure(name, run, exc) from exc

        try:
            self.output = ANALYSES[run](context).run()
        except ValueError as exc:
            raise ConfigError(f"[{name}/{run}] {exc}") from exc
        except ModelError as exc:
            raise ScenarioFailure(name, run, exc) from exc
        print(f"      ✅ {self.output.summary}")
        table = self.output.table
        if table is not None and len(table) <= PREVIEW_ROWS:
            print(table.to_markdown(index=False, floatfmt=".6g"))
        return self.output

    def save_results(self) -> list[str]:
        if self.output is None:
            raise RuntimeError("run_scenario() has not produced any output yet")
        run = self.scenario.run
        paths = []
        if self.output.table is not None:
            paths.append(write_csv(self.output.table, os.path.join(self.output_dir, f"{run}.csv")))
        payload = {"scenario": self.scenario.name, "run": run, **self.output.payload}
        paths.append(write_json(payload, os.path.join(self.output_dir, f"{run}.json")))
        for path in paths:
            print(f"\n📊 Saved: {path}")
        return paths


def _report_warnings(caught) -> None:
    seen = set()
    for item in caught:
        text = f"{item.category.__name__}: {item.message}"
        if text not in seen:
            seen.add(text)
            print(f"   ⚠️ {text}")


def _print_config_error(exc: ConfigError) -> None:
    print(f"❌ {exc}")
    for diagnostic in exc.diagnostics:
        print(f"   - {diagnostic}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqir",
        description="Age-structured SEQIR model: dynamics, steady states, R0, Lyapunov checks and optimal vaccination.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run the analysis selected in a scenario file")
    run.add_argument("config", help="scenario YAML file")
    run.add_argument("--out", default=None, help="output directory (default: scenario output_dir, $SEQIR_OUTPUT_DIR or outputs)")
    run.add_argument("--grid-n", type=int, default=None, help="override grid.n")
    run.add_argument("--a-max", type=float, default=None, help="override grid.a_max (years)")
    run.add_argument("--verbose", action="store_true", help="log at DEBUG level")

    validate = commands.add_parser("validate", help="check a scenario file without computing anything")
    validate.add_argument("config", help="scenario YAML file")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    load_dotenv(override=True)
    args = build_parser().parse_args(argv)

    level_name = os.getenv("SEQIR_LOG_LEVEL", "WARNING").upper()
    level = logging.DEBUG if getattr(args, "verbose", False) else getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "validate":
        try:
            scenario = load_scenario(args.config)
        except ConfigError as exc:
            _print_config_error(exc)
            return 1
        print(f"✅ {args.config} is valid: scenario '{scenario.name}', run '{scenario.run}'")
        return 0

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SeqirWarning)
        try:
            runner = ScenarioRunner(args.config, output_dir=args.out, grid_n=args.grid_n, a_max=args.a_max)
            runner.run_scenario()
            runner.save_results()
        except ConfigError as exc:
            _report_warnings(caught)
            _print_config_error(exc)
            return 1
        except ModelError as exc:
            _report_warnings(caught)
            print(f"❌ {exc}")
            return 2
    _report_warnings(caught)
    return 0


if __name__ == "__main__":
    sys.exit(main())
