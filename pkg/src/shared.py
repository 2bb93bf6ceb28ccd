"""
src/shared.py
Process-level settings shared by the CLI, the HTTP service and the experiment runner.
Exports: build_thread_cap, build_output_dir, build_log_level, checkpoints_enabled,
         build_service_token, configure_logging
"""

import logging
import os

DEFAULT_OUTPUT_DIR = "results"
DEFAULT_LOG_LEVEL = "INFO"
DEFAULT_THREAD_CAP = 8
_FALSY = {"0", "false", "no", "off"}


def _flag(name: str, default: str) -> bool:
    value = os.getenv(name, default).strip().lower()
    return value not in _FALSY


def build_thread_cap() -> int:
    """Return EQUISCORE_THREADS (positive integer), defaulting to min(cpu_count, 8)."""
    fallback = min(os.cpu_count() or 1, DEFAULT_THREAD_CAP)
    raw_value = os.getenv("EQUISCORE_THREADS", "").strip()
    if not raw_value:
        return fallback
    try:
        threads = int(raw_value)
    except ValueError as exc:
        raise RuntimeError("Invalid EQUISCORE_THREADS: expected a positive integer.") from exc
    if threads <= 0:
        raise RuntimeError("Invalid EQUISCORE_THREADS: expected a positive integer.")
    return threads


def build_output_dir() -> str:
    """Return configured directory for CSV/SVG outputs."""
    return os.getenv("EQUISCORE_OUTPUT_DIR", DEFAULT_OUTPUT_DIR).strip() or DEFAULT_OUTPUT_DIR


def build_log_level() -> int:
    """Return the numeric logging level named by EQUISCORE_LOG_LEVEL."""
    name = os.getenv("EQUISCORE_LOG_LEVEL", DEFAULT_LOG_LEVEL).strip().upper() or DEFAULT_LOG_LEVEL
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        raise RuntimeError(f"Invalid EQUISCORE_LOG_LEVEL: unknown level '{name}'.")
    return level


def checkpoints_enabled() -> bool:
    """Return whether trained runs write parameter checkpoints."""
    return _flag("EQUISCORE_CHECKPOINTS_ENABLED", "false")


def build_service_token() -> str:
    """Return the optional shared secret guarding mutating HTTP endpoints."""
    return os.getenv("EQUISCORE_SERVICE_TOKEN", "").strip()


def configure_logging() -> None:
    """Configure the root logger once for CLI runs."""
    logging.basicConfig(
        level=build_log_level(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
