"""
src/metrics/checks.py
Transport-level diagnostics: symmetrization contraction, sample-complexity sweeps,
rotation-invariance statistics for generated clouds and the error ledger.
Exports: ContractionReport, contraction_check, SweepResult, sample_complexity_sweep,
         invariance_statistic, invariance_threshold, LedgerReport, error_ledger
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.common.parallel import map_ordered
from src.common.seeding import make_rng, mix_seed
from src.diffusion.losses import WEIGHTING_UNIFORM, dsm_loss, draw_dsm_batch
from src.diffusion.schedule import DiffusionSchedule
from src.fields import VectorField
from src.group.rep import GroupRep
from src.group.symmetrize import EquivariantWrapper, augment, augment_space_time, dfe
from src.metrics.transport import MAX_PROBLEM_CELLS, w1_exact
from src.targets.empirical import EmpiricalMeasure
from src.targets.mixture import GaussianMixture, mixture_sample

logger = logging.getLogger(__name__)

CONTRACTION_TOL = 1e-9
MIN_SWEEP_REPS = 5
SWEEP_PLAIN = "plain"
SWEEP_AUGMENTED = "augmented"
SWEEP_COLUMNS = ["N", "method", "mean_d1", "stderr", "reps"]
DEFAULT_REF_SIZE = 4096
DEFAULT_INVARIANCE_RESAMPLES = 10
DEFAULT_LEDGER_EVAL = 1024


@dataclass(frozen=True)
class ContractionReport:
    augmented_distance: float
    plain_distance: float
    slack: float
    passed: bool


def contraction_check(eta: EmpiricalMeasure, pi_ref: EmpiricalMeasure, rep: GroupRep) -> ContractionReport:
    """
    Check d1(S^G eta, pi) <= d1(eta, pi) + slack.

    The slack is twice the distance of pi_ref to its own orbit average, which absorbs
    the finite-sample non-invariance of the reference.
    """
    augmented = w1_exact(augment(eta, rep), pi_ref).value
    plain = w1_exact(eta, pi_ref).value
    slack = 2.0 * w1_exact(pi_ref, augment(pi_ref, rep)).value
    return ContractionReport(
        augmented_distance=augmented,
        plain_distance=plain,
        slack=slack,
        passed=bool(augmented <= plain + CONTRACTION_TOL + slack),
    )


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Per-(N, method) means with standard errors, plus log-log slopes per method."""

    table: pd.DataFrame
    slopes: dict[str, float]


def _loglog_slope(ns: np.ndarray, means: np.ndarray) -> float:
    return float(np.polyfit(np.log(ns), np.log(means), 1)[0])


def sample_complexity_sweep(
    target: GaussianMixture,
    rep: GroupRep,
    Ns: list[int],
    reps: int,
    ref_size: int = DEFAULT_REF_SIZE,
    seed: int = 0,
) -> SweepResult:
    """
    Estimate E d1(pi^N, pi) and E d1(S^G pi^N, pi) against one fixed reference sample.

    Args:
        target: Sampling law pi.
        rep: Group used for augmentation.
        Ns: Strictly increasing sample sizes.
        reps: Independent draws per N (>= 5).
        ref_size: Size of the reference sample.
        seed: Base seed; each (N, rep) cell derives its own.
    Raises:
        ValueError: Bad Ns or reps, or a cell would exceed the exact-solver guard.
    """
    ns = [int(n) for n in Ns]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
        raise ValueError(f"Ns must be a nonempty strictly increasing list of positive sizes, got {Ns}")
    if reps < MIN_SWEEP_REPS:
        raise ValueError(f"reps must be >= {MIN_SWEEP_REPS}, got {reps}")
    largest = rep.order * ns[-1] * ref_size
    if largest > MAX_PROBLEM_CELLS:
        raise ValueError(f"ref_size={ref_size} with N={ns[-1]} exceeds the exact-solver size guard.")
    reference = mixture_sample(target, ref_size, mix_seed(seed, 0))

    def cell(key: tuple[int, int]) -> tuple[float, float]:
        n, r = key
        draw = mixture_sample(target, n, mix_seed(seed, 1, n, r))
        plain = w1_exact(draw, reference).value
        augmented = plain if rep.order == 1 else w1_exact(augment(draw, rep), reference).value
        return plain, augmented

    keys = [(n, r) for n in ns for r in range(reps)]
    values = dict(zip(keys, map_ordered(cell, keys)))
    rows = []
    for n in ns:
        for column, method in ((0, SWEEP_PLAIN), (1, SWEEP_AUGMENTED)):
            sample = np.array([values[(n, r)][column] for r in range(reps)])
            rows.append(
                {
                    "N": n,
                    "method": method,
                    "mean_d1": float(sample.mean()),
                    "stderr": float(sample.std(ddof=1) / np.sqrt(reps)),
                    "reps": reps,
                }
            )
    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    slopes = {}
    if len(ns) > 1:
        for method in (SWEEP_PLAIN, SWEEP_AUGMENTED):
            part = table[table["method"] == method]
            slopes[method] = _loglog_slope(part["N"].to_numpy(dtype=float), part["mean_d1"].to_numpy())
    logger.info("Sample-complexity sweep over N=%s: slopes %s", ns, slopes)
    return SweepResult(table=table, slopes=slopes)


def invariance_statistic(samples: EmpiricalMeasure, rep: GroupRep) -> float:
    """Exact W1 between a cloud and its orbit average; zero iff the cloud is G-invariant."""
    return w1_exact(samples, augment(samples, rep)).value


def invariance_threshold(
    samples: EmpiricalMeasure,
    rep: GroupRep,
    n_resamples: int = DEFAULT_INVARIANCE_RESAMPLES,
    seed: int = 0,
    quantile: float = 0.95,
) -> float:
    """
    Null quantile of invariance_statistic for same-size draws from the exactly invariant
    cloud augment(samples).
    """
    if n_resamples < 1:
        raise ValueError(f"n_resamples must be >= 1, got {n_resamples}")
    invariant = augment(samples, rep)
    rng = make_rng(seed)
    null = [invariance_statistic(invariant.subsample(samples.size, rng), rep) for _ in range(n_resamples)]
    return float(np.quantile(np.asarray(null), quantile))


@dataclass(frozen=True)
class LedgerReport:
    """Measurable terms of the generation-error decomposition (diagnostics only)."""

    dfe: float
    dsm_symmetrized: float
    w1_augmented_data: float
    early_stop: float
    horizon: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "term": ["dfe", "dsm_symmetrized", "w1_augmented_data", "early_stop", "horizon"],
                "value": [self.dfe, self.dsm_symmetrized, self.w1_augmented_data, self.early_stop, self.horizon],
            }
        )


def error_ledger(
    model: VectorField,
    data: EmpiricalMeasure,
    target: GaussianMixture,
    rep: GroupRep,
    schedule: DiffusionSchedule,
    seed: int,
    n_eval: int = DEFAULT_LEDGER_EVAL,
    ref_size: int = DEFAULT_REF_SIZE,
) -> LedgerReport:
    """
    Evaluate the ledger for one model and training set.

    DFE is taken on augmented, diffused samples of the augmented data; the DSM term
    scores the symmetrized field in the unweighted uniform-t form; the transport term
    compares the augmented data with a fresh reference sample of the target.
    """
    augmented = augment(data, rep)
    batch = draw_dsm_batch(augmented, schedule, n_eval, mix_seed(seed, 0), WEIGHTING_UNIFORM)
    deviation = dfe(model, rep, augment_space_time(batch.space_time(), rep))
    symmetrized = EquivariantWrapper(model, rep)
    dsm_value = dsm_loss(symmetrized, augmented, schedule, n_eval, mix_seed(seed, 1), WEIGHTING_UNIFORM).item()
    if augmented.size * ref_size > MAX_PROBLEM_CELLS:
        augmented_for_w1 = augmented.subsample(MAX_PROBLEM_CELLS // ref_size, mix_seed(seed, 2))
    else:
        augmented_for_w1 = augmented
    reference = mixture_sample(target, ref_size, mix_seed(seed, 3))
    report = LedgerReport(
        dfe=deviation,
        dsm_symmetrized=dsm_value,
        w1_augmented_data=w1_exact(augmented_for_w1, reference).value,
        early_stop=schedule.eps,
        horizon=schedule.T,
    )
    logger.info("Error ledger: %s", report)
    return report
