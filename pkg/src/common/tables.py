"""CSV emission helpers: UTF-8, header row, '.' decimal separator, deterministic float text."""

import logging
from pathlib import Path

import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """Write `frame` without the index; parent directories are created."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False, encoding="utf-8", float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %s (%d rows).", target, len(frame))
    return target


def read_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(Path(path), encoding="utf-8", float_precision="round_trip")
