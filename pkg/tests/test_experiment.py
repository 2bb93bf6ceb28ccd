"""
tests/test_experiment.py
Unit tests for src/experiment: config parsing, the run/grid driver, SVG output and the property suites.
"""

import functools
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

TINY = {
    "model": {"hidden_width": 8, "hidden_layers": 1},
    "n_training": 6,
    "iterations": 0,
    "schedule": {"T": 10.0, "eps": 0.01, "n_steps": 5},
    "n_runs": 2,
    "eval": {"n_gen_samples": 32, "n_ref_samples": 32, "invariance_resamples": 2, "dfe_points": 8},
}


def _tiny_config(**overrides):
    from src.experiment.config import parse_config

    return parse_config({**TINY, **overrides})


def test_config_defaults():
    from src.experiment.config import ExperimentConfig

    cfg = ExperimentConfig()
    assert cfg.schedule.T == 100.0
    assert cfg.schedule.eps == 1e-3
    assert cfg.schedule.n_steps == 500
    assert cfg.n_runs == 10
    assert cfg.group.to_rep().order == 4
    assert cfg.setup.name == "plain"


def test_benchmark_config_keeps_invariance_calibration_affordable():
    from pathlib import Path

    from src.experiment.config import ExperimentConfig, load_config
    from src.metrics.checks import DEFAULT_INVARIANCE_RESAMPLES

    benchmark = load_config(Path(__file__).resolve().parent.parent / "config" / "experiment.yaml")
    assert ExperimentConfig().eval.invariance_resamples == DEFAULT_INVARIANCE_RESAMPLES == 10
    assert benchmark.eval.invariance_resamples <= DEFAULT_INVARIANCE_RESAMPLES


def test_config_dump_parse_round_trip(tmp_path):
    from src.experiment.config import config_hash, load_config, save_config

    cfg = _tiny_config(base_seed=7)
    loaded = load_config(save_config(cfg, tmp_path / "cfg.yaml"))
    assert loaded == cfg
    assert config_hash(loaded) == config_hash(cfg)


def test_load_config_from_yaml(tmp_path):
    from src.experiment.config import load_config

    path = tmp_path / "cfg.yaml"
    path.write_text("n_training: 50\ngroup:\n  kind: dihedral\n  k: 4\nsetup:\n  equivariant: true\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg.n_training == 50
    assert cfg.group.to_rep().order == 8
    assert cfg.setup.name == "equivariant"


def test_config_rejects_unknown_key():
    from src.experiment.config import parse_config

    with pytest.raises(ValueError):
        parse_config({"n_trainig": 10})


def test_config_rejects_dimension_mismatch():
    from src.experiment.config import parse_config

    with pytest.raises(ValueError):
        parse_config({"group": {"kind": "trivial", "dim": 3}})


def test_config_rejects_bad_schedule():
    from src.experiment.config import parse_config

    with pytest.raises(ValueError):
        parse_config({"schedule": {"T": 1.0, "eps": 2.0}})


def test_config_hash_tracks_content():
    from src.experiment.config import config_hash

    assert config_hash(_tiny_config()) == config_hash(_tiny_config())
    assert config_hash(_tiny_config()) != config_hash(_tiny_config(base_seed=1))


def test_training_data_is_shared_across_setups():
    from src.experiment.config import SETUPS
    from src.experiment.runner import training_data

    cfg = _tiny_config()
    plain = training_data(cfg.with_cell(6, SETUPS[0]), 0)
    equivariant = training_data(cfg.with_cell(6, SETUPS[2]), 0)
    augmented = training_data(cfg.with_cell(6, SETUPS[1]), 0)
    np.testing.assert_array_equal(plain.points, equivariant.points)
    assert augmented.size == 24


def test_run_experiment_aggregates_runs():
    from src.experiment.runner import run_experiment

    report = run_experiment(_tiny_config())
    assert len(report.d1_values) == 2
    assert report.n_failed == 0
    assert report.d1_mean == pytest.approx(np.mean(report.d1_values))
    assert report.d1_std == pytest.approx(np.std(report.d1_values, ddof=1))
    assert all(run.final_loss is None for run in report.runs)
    assert report.invariance_passes == sum(run.invariance <= run.invariance_threshold for run in report.runs)


def test_run_experiment_is_deterministic():
    from src.experiment.runner import run_experiment

    assert run_experiment(_tiny_config()) == run_experiment(_tiny_config())


def test_single_run_reports_zero_spread():
    from src.experiment.runner import run_experiment

    assert run_experiment(_tiny_config(n_runs=1)).d1_std == 0.0


def test_equivariant_setup_has_no_dfe():
    from src.experiment.runner import run_experiment

    report = run_experiment(_tiny_config(setup={"equivariant": True}, n_runs=1))
    assert report.dfe == pytest.approx(0.0, abs=1e-20)


def test_run_experiment_all_runs_diverged_raises(monkeypatch):
    from src.common.errors import SamplerDivergedError
    from src.experiment import runner

    def explode(*args, **kwargs):
        raise SamplerDivergedError(0)

    monkeypatch.setattr(runner, "sample_reverse", explode)
    with pytest.raises(RuntimeError, match="diverged"):
        runner.run_experiment(_tiny_config())


def test_report_frame_has_one_row_per_run(tmp_path):
    from src.common.tables import read_csv
    from src.experiment.runner import run_experiment, write_report_csv

    cfg = _tiny_config()
    path = write_report_csv(run_experiment(cfg), cfg, tmp_path / "report.csv")
    frame = read_csv(path)
    assert list(frame["run"]) == [0, 1]
    assert set(frame["setup"]) == {"plain"}


def test_run_grid_covers_every_setup(tmp_path):
    from src.experiment.runner import GRID_COLUMNS, run_grid

    result = run_grid(_tiny_config(n_runs=1), [10], tmp_path)
    assert list(result.table.columns) == GRID_COLUMNS
    assert list(result.table["setup"]) == ["plain", "augmented", "equivariant", "equivariant+augmented"]
    assert result.failures == ()
    assert {p.name for p in result.files} == {"grid.csv", "grid.svg"}
    effective = {r.setup: r.effective_training_points for r in result.reports}
    assert effective == {"plain": 10, "augmented": 40, "equivariant": 10, "equivariant+augmented": 40}


def test_run_grid_rejects_empty_sizes():
    from src.experiment.runner import run_grid

    with pytest.raises(ValueError):
        run_grid(_tiny_config(), [])


def _grid_table():
    return pd.DataFrame(
        {
            "N": [10, 100, 10, 100, 10, 100, 10, 100],
            "setup": ["plain"] * 2 + ["augmented"] * 2 + ["equivariant"] * 2 + ["equivariant+augmented"] * 2,
            "mean_d1": [1.0, 0.5, 0.8, 0.4, 0.7, 0.3, 0.6, 0.2],
            "std_d1": [0.1] * 8,
        }
    )


def test_emit_svg_is_byte_deterministic(tmp_path):
    from src.experiment.plotting import emit_svg

    first = emit_svg(_grid_table(), tmp_path / "a.svg").read_bytes()
    second = emit_svg(_grid_table(), tmp_path / "b.svg").read_bytes()
    assert first == second


def test_emit_svg_tags_each_setup(tmp_path):
    from src.experiment.plotting import emit_svg

    root = ET.parse(emit_svg(_grid_table(), tmp_path / "grid.svg")).getroot()
    gids = {el.get("id") for el in root.iter() if (el.get("id") or "").startswith("setup-")}
    assert gids == {"setup-plain", "setup-augmented", "setup-equivariant", "setup-equivariant+augmented"}


def test_emit_svg_single_point(tmp_path):
    from src.experiment.plotting import emit_svg

    table = pd.DataFrame({"N": [10], "setup": ["plain"], "mean_d1": [1.0], "std_d1": [0.0]})
    ET.parse(emit_svg(table, tmp_path / "one.svg"))


def test_emit_svg_rejects_empty_table(tmp_path):
    from src.experiment.plotting import emit_svg

    with pytest.raises(ValueError):
        emit_svg(pd.DataFrame(columns=["N", "setup", "mean_d1", "std_d1"]), tmp_path / "x.svg")


def test_property_suite_empty_selection_passes():
    from src.experiment.properties import run_property_suite

    report = run_property_suite([])
    assert report.passed
    assert report.results == ()


def test_property_suite_unknown_name_fails():
    from src.experiment.properties import run_property_suite

    report = run_property_suite(["no-such-suite"])
    assert not report.passed
    assert report.results[0].name == "unknown-suite"


def test_ism_transfer_suite_is_exact():
    from src.experiment.properties import ISM_TRANSFER_TOL, run_property_suite

    report = run_property_suite(["ism-transfer"])
    assert report.passed
    assert all(r.residual <= ISM_TRANSFER_TOL for r in report.results)


@pytest.mark.parametrize(
    "suite", ["group-identities", "esm-decomposition", "score-lemma", "commutation", "gradient-check"]
)
def test_fast_property_suites_pass(suite):
    from src.experiment.properties import run_property_suite

    report = run_property_suite([suite])
    assert report.results
    assert report.passed, report.to_frame().to_string()


def test_gradient_error_is_per_parameter():
    from src.experiment.properties import GRADIENT_REL_TOL, _max_relative_error

    analytic = [np.full(999, 100.0), np.array([1e-3])]
    numeric = [np.full(999, 100.0), np.array([2e-3])]
    # One bad small entry disappears in a whole-vector norm ratio.
    whole = np.linalg.norm(np.concatenate(analytic) - np.concatenate(numeric)) / np.linalg.norm(np.concatenate(numeric))
    assert whole < GRADIENT_REL_TOL
    assert _max_relative_error(analytic, numeric) == pytest.approx(0.5)


def test_numeric_gradient_scales_step_with_parameter():
    from src.experiment.properties import _numeric_gradient
    from src.ndiff.net import net_init

    net = net_init([2, 3, 1], seed=5)
    net = net.with_parameters([p + 1e3 for p in net.parameters()])

    def loss(candidate):
        return float(sum(np.sum(p**3) for p in candidate.parameters()))

    numeric = _numeric_gradient(loss, net)
    for p, g in zip(net.parameters(), numeric):
        np.testing.assert_allclose(g, 3.0 * p**2, rtol=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("suite", ["contraction", "offset-check", "sweep"])
def test_slow_property_suites_pass(suite):
    from src.experiment.properties import run_property_suite

    report = run_property_suite([suite])
    assert report.passed, report.to_frame().to_string()


def test_property_report_frame_columns():
    from src.experiment.properties import run_property_suite

    frame = run_property_suite(["ism-transfer"]).to_frame()
    assert list(frame.columns) == ["suite", "name", "passed", "residual", "threshold", "detail"]


@functools.lru_cache(maxsize=1)
def _benchmark_reports_at_100():
    from pathlib import Path

    from src.experiment.config import SETUPS, load_config
    from src.experiment.runner import run_experiment

    base = load_config(Path(__file__).resolve().parent.parent / "config" / "experiment.yaml")
    return {
        setup.name: run_experiment(base.with_cell(100, setup), cell)
        for cell, setup in enumerate(SETUPS)
    }


def _pooled_se(a, b):
    return float(np.sqrt(a.d1_std**2 / len(a.d1_values) + b.d1_std**2 / len(b.d1_values)))


@pytest.mark.slow
def test_benchmark_ordering_at_100_points():
    reports = _benchmark_reports_at_100()
    both = reports["equivariant+augmented"]
    equivariant = reports["equivariant"]
    assert both.d1_mean <= equivariant.d1_mean + _pooled_se(both, equivariant)
    for name in ("plain", "augmented"):
        other = reports[name]
        assert equivariant.d1_mean <= other.d1_mean + _pooled_se(equivariant, other), name


@pytest.mark.slow
def test_equivariant_models_generate_invariant_samples():
    report = _benchmark_reports_at_100()["equivariant"]
    assert len(report.runs) == 10
    assert report.invariance_passes >= 9
