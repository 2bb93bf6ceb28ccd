"""Shared pytest fixtures for the equiscore test suite."""

import pytest


@pytest.fixture(autouse=True)
def _isolate_process_settings(monkeypatch, tmp_path):
    """Keep tests independent of developer shell env vars and never write into the repo."""
    monkeypatch.delenv("EQUISCORE_SERVICE_TOKEN", raising=False)
    monkeypatch.delenv("EQUISCORE_LOG_LEVEL", raising=False)
    monkeypatch.setenv("EQUISCORE_CHECKPOINTS_ENABLED", "false")
    monkeypatch.setenv("EQUISCORE_OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("EQUISCORE_THREADS", "2")
