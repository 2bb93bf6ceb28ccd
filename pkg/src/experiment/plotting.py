"""
src/experiment/plotting.py
Byte-deterministic SVG figures: d1 against training size per setup, and generated sample clouds.
Exports: emit_svg, emit_samples_svg
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from src.targets.empirical import EmpiricalMeasure  # noqa: E402

logger = logging.getLogger(__name__)

_SVG_RC = {
    "svg.hashsalt": "equiscore",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def _save(fig: plt.Figure, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    logger.info("Wrote %s", target)
    return target


def emit_svg(table: pd.DataFrame, path: str | Path) -> Path:
    """
    Plot mean_d1 against N (log x) with std_d1 error bars, one line per setup.

    Args:
        table: Rows with columns N, setup, mean_d1, std_d1.
        path: Output .svg path.
    Returns:
        Path written.
    Raises:
        ValueError: Empty table.
        OSError: The path is not writable.
    """
    if table.empty:
        raise ValueError("Cannot plot an empty table.")
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for setup in dict.fromkeys(table["setup"]):
            rows = table[table["setup"] == setup].sort_values("N")
            container = ax.errorbar(
                rows["N"].to_numpy(dtype=float),
                rows["mean_d1"].to_numpy(dtype=float),
                yerr=rows["std_d1"].fillna(0.0).to_numpy(dtype=float),
                marker="o",
                capsize=3,
                label=str(setup),
            )
            container.lines[0].set_gid(f"setup-{setup}")
        ax.set_xscale("log")
        ax.set_xlabel("training sample size N")
        ax.set_ylabel("d1 to target")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def emit_samples_svg(
    clouds: dict[str, EmpiricalMeasure], reference: EmpiricalMeasure, path: str | Path
) -> Path:
    """Scatter each generated cloud next to the target reference sample, one panel per setup."""
    if not clouds:
        raise ValueError("Cannot plot without at least one generated cloud.")
    with plt.rc_context(_SVG_RC):
        fig, axes = plt.subplots(1, len(clouds), figsize=(3.0 * len(clouds), 3.2), squeeze=False)
        for ax, (name, cloud) in zip(axes[0], clouds.items()):
            ax.scatter(reference.points[:, 0], reference.points[:, 1], s=2, c="0.75", label="target")
            ax.scatter(cloud.points[:, 0], cloud.points[:, 1], s=2, label="generated")
            ax.set_title(name)
            ax.set_aspect("equal")
        axes[0][0].legend(loc="upper right", fontsize="small")
        fig.tight_layout()
        return _save(fig, path)
