"""
src/cli.py
Command-line entry point.
Commands: experiment run|grid|samples, properties, sweep, ledger
"""

import argparse
import logging
from pathlib import Path

from dotenv import load_dotenv

from src.common.tables import write_csv
from src.experiment.config import ExperimentConfig, SetupSpec, load_config
from src.experiment.properties import SUITES, run_property_suite
from src.experiment.runner import (
    emit_sample_figure,
    model_from_checkpoint,
    run_experiment,
    run_grid,
    training_data,
    write_report_csv,
)
from src.metrics.checks import error_ledger, sample_complexity_sweep
from src.shared import build_output_dir, configure_logging

logger = logging.getLogger(__name__)

DEFAULT_GRID_NS = "10,100,1000"
DEFAULT_SWEEP_NS = "32,64,128,256,512,1024"
DEFAULT_SWEEP_REPS = 20


def _size_list(raw: str) -> list[int]:
    try:
        sizes = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}") from exc
    if not sizes or any(n < 1 for n in sizes):
        raise argparse.ArgumentTypeError(f"expected positive sizes, got {raw!r}")
    return sizes


def _suite_list(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equiscore", description="Equivariant score-based generative model experiments.")
    parser.add_argument("--out", type=Path, default=None, help="output directory (default: EQUISCORE_OUTPUT_DIR)")
    commands = parser.add_subparsers(dest="command", required=True)

    experiment = commands.add_parser("experiment", help="train, sample and evaluate")
    actions = experiment.add_subparsers(dest="action", required=True)
    run = actions.add_parser("run", help="one configuration, n_runs runs")
    run.add_argument("--config", type=Path, required=True)
    grid = actions.add_parser("grid", help="all four setups at every training size")
    grid.add_argument("--config", type=Path, required=True)
    grid.add_argument("--Ns", type=_size_list, default=_size_list(DEFAULT_GRID_NS))
    samples = actions.add_parser("samples", help="scatter generated clouds for every setup")
    samples.add_argument("--config", type=Path, required=True)
    samples.add_argument("--run", type=int, default=0)

    properties = commands.add_parser("properties", help="run named property suites")
    properties.add_argument(
        "--suite", type=_suite_list, default=["all"], help=f"comma-separated; 'all' or any of {', '.join(SUITES)}"
    )

    sweep = commands.add_parser("sweep", help="sample-complexity sweep of plain vs augmented empirical measures")
    sweep.add_argument("--config", type=Path, required=True)
    sweep.add_argument("--Ns", type=_size_list, default=_size_list(DEFAULT_SWEEP_NS))
    sweep.add_argument("--reps", type=int, default=DEFAULT_SWEEP_REPS)

    ledger = commands.add_parser("ledger", help="error-ledger terms for a checkpointed model")
    ledger.add_argument("--checkpoint", type=Path, required=True)
    ledger.add_argument("--config", type=Path, required=True)
    ledger.add_argument("--run", type=int, default=0, help="run index whose training data to rebuild")
    return parser


def _output_dir(args: argparse.Namespace) -> Path:
    return args.out if args.out is not None else Path(build_output_dir())


def _run_experiment(cfg: ExperimentConfig, out: Path) -> int:
    report = run_experiment(cfg)
    path = write_report_csv(report, cfg, out / f"experiment_{report.setup}_N{report.n_training}.csv")
    print(
        f"{report.setup} N={report.n_training}: d1 = {report.d1_mean:.4f} +- {report.d1_std:.4f} "
        f"({len(report.d1_values)} runs, {report.n_failed} failed) -> {path}"
    )
    return 0


def _run_grid(cfg: ExperimentConfig, Ns: list[int], out: Path) -> int:
    result = run_grid(cfg, Ns, out)
    print(result.table.to_string(index=False))
    for failure in result.failures:
        print(f"FAILED {failure}")
    return 0 if not result.failures else 1


def _run_properties(selector: list[str], out: Path) -> int:
    report = run_property_suite(selector)
    frame = report.to_frame()
    if not frame.empty:
        print(frame.to_string(index=False))
        write_csv(frame, out / "properties.csv")
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def _run_sweep(cfg: ExperimentConfig, Ns: list[int], reps: int, out: Path) -> int:
    result = sample_complexity_sweep(cfg.target.to_mixture(), cfg.group.to_rep(), Ns, reps, seed=cfg.base_seed)
    write_csv(result.table, out / "sweep.csv")
    print(result.table.to_string(index=False))
    for method, slope in result.slopes.items():
        print(f"log-log slope ({method}): {slope:.3f}")
    return 0


def _run_ledger(cfg: ExperimentConfig, checkpoint: Path, run: int, out: Path) -> int:
    model = model_from_checkpoint(cfg, checkpoint)
    raw_cfg = cfg.with_cell(cfg.n_training, SetupSpec(equivariant=cfg.setup.equivariant, augmented=False))
    report = error_ledger(
        model,
        training_data(raw_cfg, run),
        cfg.target.to_mixture(),
        cfg.group.to_rep(),
        cfg.schedule.to_schedule(),
        seed=cfg.base_seed,
    )
    frame = report.to_frame()
    write_csv(frame, out / f"ledger_{checkpoint.stem}.csv")
    print(frame.to_string(index=False))
    return 0


def main(argv: list[str] | None = None) -> int:
    """
    Parse arguments and dispatch.

    Returns:
        0 on success, 1 for failed checks or numerical failure, 2 for bad input.
    """
    load_dotenv()
    configure_logging()
    args = build_parser().parse_args(argv)
    out = _output_dir(args)
    try:
        if args.command == "experiment":
            cfg = load_config(args.config)
            if args.action == "run":
                return _run_experiment(cfg, out)
            if args.action == "grid":
                return _run_grid(cfg, args.Ns, out)
            emit_sample_figure(cfg, out / "samples.svg", args.run)
            return 0
        if args.command == "properties":
            return _run_properties(args.suite, out)
        if args.command == "sweep":
            return _run_sweep(load_config(args.config), args.Ns, args.reps, out)
        return _run_ledger(load_config(args.config), args.checkpoint, args.run, out)
    except (ValueError, OSError) as exc:
        logger.error("%s", exc)
        return 2
    except RuntimeError:
        logger.exception("Command %s failed.", args.command)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
