"""
src/experiment/runner.py
Run one experiment cell (n_runs trained models) or the full setups x sizes grid.
Exports: RunOutcome, MetricReport, GridResult, run_single, run_experiment, run_grid,
         report_to_frame, write_report_csv, emit_sample_figure, training_data,
         model_from_checkpoint, GRID_COLUMNS
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from src.common.errors import NonFiniteError
from src.common.parallel import map_ordered
from src.common.seeding import mix_seed
from src.common.tables import write_csv
from src.diffusion.losses import WEIGHTING_UNIFORM, draw_dsm_batch
from src.diffusion.model import VARIANT_EQUIVARIANT, VARIANT_PLAIN, ScoreModel, TimeFeaturizer, build_score_model
from src.diffusion.sampler import sample_reverse
from src.diffusion.training import train
from src.experiment.config import SETUPS, ExperimentConfig, config_hash
from src.experiment.plotting import emit_samples_svg, emit_svg
from src.group.symmetrize import augment, augment_space_time, dfe
from src.metrics.checks import invariance_statistic, invariance_threshold
from src.metrics.dual import CriticConfig, w1_dual
from src.metrics.transport import METHOD_DUAL, w1_exact
from src.ndiff.checkpoint import load_checkpoint
from src.shared import build_output_dir, checkpoints_enabled
from src.targets.empirical import EmpiricalMeasure
from src.targets.mixture import mixture_sample

logger = logging.getLogger(__name__)

GRID_COLUMNS = ["N", "setup", "mean_d1", "std_d1", "n_runs"]


@dataclass(frozen=True)
class RunOutcome:
    run: int
    seed: int
    d1: float
    dfe: float
    invariance: float
    invariance_threshold: float
    final_loss: float | None
    wall_clock: float = field(compare=False)

    @property
    def invariance_passed(self) -> bool:
        return self.invariance <= self.invariance_threshold


@dataclass(frozen=True)
class MetricReport:
    """Aggregate over the successful runs of one configuration."""

    setup: str
    n_training: int
    effective_training_points: int
    d1_values: tuple[float, ...]
    d1_mean: float
    d1_std: float
    dfe: float
    invariance: float
    invariance_threshold: float
    invariance_passes: int
    wall_clock: float = field(compare=False)
    config_hash: str
    w1_method: str
    n_failed: int = 0
    runs: tuple[RunOutcome, ...] = field(default=(), repr=False)


@dataclass(frozen=True, eq=False)
class GridResult:
    table: pd.DataFrame
    reports: tuple[MetricReport, ...]
    failures: tuple[str, ...]
    files: tuple[Path, ...] = ()


def training_data(cfg: ExperimentConfig, run: int) -> EmpiricalMeasure:
    # Data depends on (base_seed, N, run) only, so the four setups see the same draws.
    data = mixture_sample(cfg.target.to_mixture(), cfg.n_training, mix_seed(cfg.base_seed, cfg.n_training, run))
    if cfg.setup.augmented:
        data = augment(data, cfg.group.to_rep())
    return data


def model_from_checkpoint(cfg: ExperimentConfig, path: str | Path) -> ScoreModel:
    """Rebuild the score model of `cfg.setup` around a net read from a checkpoint file."""
    net = load_checkpoint(path)
    dim = cfg.target.to_mixture().dim
    if net.output_width != dim:
        raise ValueError(f"Checkpoint net outputs R^{net.output_width} but the target lives in R^{dim}.")
    schedule = cfg.schedule.to_schedule()
    return ScoreModel(
        net,
        TimeFeaturizer(T=schedule.T, eps=schedule.eps),
        VARIANT_EQUIVARIANT if cfg.setup.equivariant else VARIANT_PLAIN,
        cfg.group.to_rep(),
    )


def _checkpoint_path(cfg: ExperimentConfig, cell: int, run: int) -> Path | None:
    if not checkpoints_enabled():
        return None
    return Path(build_output_dir()) / "checkpoints" / f"{config_hash(cfg)[:12]}_{cell}_{run}.ndiff"


def _build_model(cfg: ExperimentConfig, seed: int) -> ScoreModel:
    return build_score_model(
        cfg.target.to_mixture().dim,
        cfg.schedule.to_schedule(),
        equivariant=cfg.setup.equivariant,
        group=cfg.group.to_rep(),
        hidden_width=cfg.model.hidden_width,
        hidden_layers=cfg.model.hidden_layers,
        activation=cfg.model.activation,
        seed=seed,
    )


def run_single(cfg: ExperimentConfig, run: int, cell: int = 0) -> tuple[RunOutcome, ScoreModel, EmpiricalMeasure]:
    """
    Train, sample and evaluate one run.

    Returns:
        (outcome, trained model, generated samples)
    Raises:
        NonFiniteError: Training or sampling diverged.
    """
    seed = mix_seed(cfg.base_seed, cell, run)
    rep = cfg.group.to_rep()
    schedule = cfg.schedule.to_schedule()
    data = training_data(cfg, run)
    model, record = train(
        _build_model(cfg, mix_seed(seed, 0)),
        cfg.objective,
        data,
        schedule,
        cfg.optimizer.to_hyper(),
        cfg.iterations,
        cfg.batch_size,
        mix_seed(seed, 1),
        cfg.weighting,
        config_hash=config_hash(cfg),
        checkpoint_path=_checkpoint_path(cfg, cell, run),
    )
    started = time.perf_counter()
    samples = sample_reverse(model, schedule, cfg.eval.n_gen_samples, mix_seed(seed, 2))
    reference = mixture_sample(cfg.target.to_mixture(), cfg.eval.n_ref_samples, mix_seed(seed, 3))
    if cfg.eval.w1_method == METHOD_DUAL:
        d1 = w1_dual(samples, reference, CriticConfig(), cfg.eval.critic_iterations, mix_seed(seed, 4)).value
    else:
        d1 = w1_exact(samples, reference).value
    eval_set = draw_dsm_batch(augment(data, rep), schedule, cfg.eval.dfe_points, mix_seed(seed, 5), WEIGHTING_UNIFORM)
    outcome = RunOutcome(
        run=run,
        seed=seed,
        d1=d1,
        dfe=dfe(model, rep, augment_space_time(eval_set.space_time(), rep)),
        invariance=invariance_statistic(samples, rep),
        invariance_threshold=invariance_threshold(samples, rep, cfg.eval.invariance_resamples, mix_seed(seed, 6)),
        final_loss=record.final_loss,
        wall_clock=record.wall_clock + time.perf_counter() - started,
    )
    return outcome, model, samples


def _sample_std(values: np.ndarray) -> float:
    return float(values.std(ddof=1)) if values.shape[0] > 1 else 0.0


def run_experiment(cfg: ExperimentConfig, cell: int = 0) -> MetricReport:
    """
    Execute cfg.n_runs independent runs and aggregate d1 as mean and sample standard deviation.

    Runs whose training or sampling diverges are logged, counted and left out.

    Raises:
        RuntimeError: Every run diverged.
    """

    def one(run: int) -> RunOutcome | None:
        try:
            return run_single(cfg, run, cell)[0]
        except NonFiniteError as exc:
            logger.warning("Run %d of %s diverged: %s", run, cfg.setup.name, exc)
            return None

    outcomes = map_ordered(one, range(cfg.n_runs))
    done = [o for o in outcomes if o is not None]
    n_failed = len(outcomes) - len(done)
    if not done:
        raise RuntimeError(f"All {cfg.n_runs} runs of setup {cfg.setup.name} diverged.")
    d1 = np.array([o.d1 for o in done])
    rep = cfg.group.to_rep()
    report = MetricReport(
        setup=cfg.setup.name,
        n_training=cfg.n_training,
        effective_training_points=cfg.n_training * (rep.order if cfg.setup.augmented else 1),
        d1_values=tuple(float(v) for v in d1),
        d1_mean=float(d1.mean()),
        d1_std=_sample_std(d1),
        dfe=float(np.mean([o.dfe for o in done])),
        invariance=float(np.mean([o.invariance for o in done])),
        invariance_threshold=float(np.mean([o.invariance_threshold for o in done])),
        invariance_passes=sum(o.invariance_passed for o in done),
        wall_clock=float(sum(o.wall_clock for o in done)),
        config_hash=config_hash(cfg),
        w1_method=cfg.eval.w1_method,
        n_failed=n_failed,
        runs=tuple(done),
    )
    logger.info(
        "%s N=%d: d1 = %.4f +- %.4f over %d runs (%d failed, %d invariant)",
        report.setup,
        report.n_training,
        report.d1_mean,
        report.d1_std,
        len(done),
        n_failed,
        report.invariance_passes,
    )
    return report


def report_to_frame(report: MetricReport, cfg: ExperimentConfig) -> pd.DataFrame:
    """One row per successful run plus the evaluation metadata."""
    return pd.DataFrame(
        [
            {
                "setup": report.setup,
                "N": report.n_training,
                "effective_training_points": report.effective_training_points,
                "run": o.run,
                "seed": str(o.seed),
                "d1": o.d1,
                "dfe": o.dfe,
                "invariance": o.invariance,
                "invariance_threshold": o.invariance_threshold,
                "invariance_passed": o.invariance_passed,
                "final_loss": o.final_loss,
                "w1_method": report.w1_method,
                "n_gen_samples": cfg.eval.n_gen_samples,
                "n_ref_samples": cfg.eval.n_ref_samples,
                "config_hash": report.config_hash,
            }
            for o in report.runs
        ]
    )


def write_report_csv(report: MetricReport, cfg: ExperimentConfig, path: str | Path) -> Path:
    return write_csv(report_to_frame(report, cfg), path)


def run_grid(
    base_cfg: ExperimentConfig, Ns: list[int], output_dir: str | Path | None = None
) -> GridResult:
    """
    Run all four setups at every N; failed cells are logged and skipped.

    With `output_dir`, writes grid.csv (N, setup, mean_d1, std_d1, n_runs) and grid.svg.
    """
    if not Ns:
        raise ValueError("Ns must name at least one training size.")
    rows, reports, failures = [], [], []
    cell = 0
    for n in Ns:
        for setup in SETUPS:
            cfg = base_cfg.with_cell(int(n), setup)
            try:
                report = run_experiment(cfg, cell)
            except Exception as exc:
                logger.exception("Grid cell N=%d setup=%s failed.", n, setup.name)
                failures.append(f"N={n} setup={setup.name}: {exc}")
            else:
                reports.append(report)
                rows.append(
                    {
                        "N": report.n_training,
                        "setup": report.setup,
                        "mean_d1": report.d1_mean,
                        "std_d1": report.d1_std,
                        "n_runs": len(report.d1_values),
                    }
                )
            cell += 1
    table = pd.DataFrame(rows, columns=GRID_COLUMNS)
    files: list[Path] = []
    if output_dir is not None and not table.empty:
        out = Path(output_dir)
        files.append(write_csv(table, out / "grid.csv"))
        files.append(emit_svg(table, out / "grid.svg"))
    return GridResult(table=table, reports=tuple(reports), failures=tuple(failures), files=tuple(files))


def emit_sample_figure(cfg: ExperimentConfig, path: str | Path, run: int = 0) -> Path:
    """Train every setup once at cfg.n_training and scatter the generated clouds."""
    clouds = {}
    for cell, setup in enumerate(SETUPS):
        _, _, samples = run_single(cfg.with_cell(cfg.n_training, setup), run, cell)
        clouds[setup.name] = samples
    reference = mixture_sample(cfg.target.to_mixture(), cfg.eval.n_ref_samples, mix_seed(cfg.base_seed, 99))
    return emit_samples_svg(clouds, reference, path)
