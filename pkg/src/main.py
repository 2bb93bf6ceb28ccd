"""
src/main.py
FastAPI application exposing the experiment runner and property suites.
Endpoints: GET /health, POST /experiments/run, POST /grid/run, POST /properties/run
"""

import asyncio
import logging
from typing import Any

from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException, Request
from pydantic import BaseModel, Field

from src.experiment.config import parse_config
from src.experiment.properties import run_property_suite
from src.experiment.runner import MetricReport, run_experiment, run_grid
from src.shared import build_output_dir, build_service_token

logger = logging.getLogger(__name__)
load_dotenv()

app = FastAPI(title="Equiscore")


class GridRequest(BaseModel):
    config: dict[str, Any] = Field(default_factory=dict)
    Ns: list[int]


class PropertiesRequest(BaseModel):
    suites: list[str] = Field(default_factory=lambda: ["all"])


@app.get("/health")
def health_check() -> dict[str, str]:
    """Return service health status."""
    return {"status": "ok"}


def _verify_service_token(request: Request) -> None:
    """
    Validate the optional shared secret for mutating endpoints.

    Raises:
        HTTPException 401: When a token is configured and the header does not match.
    """
    expected = build_service_token()
    if not expected:
        return
    provided = request.headers.get("X-Equiscore-Token", "").strip()
    if provided != expected:
        raise HTTPException(status_code=401, detail="Unauthorized.")


def _report_payload(report: MetricReport) -> dict[str, Any]:
    return {
        "setup": report.setup,
        "n_training": report.n_training,
        "effective_training_points": report.effective_training_points,
        "d1_values": list(report.d1_values),
        "d1_mean": report.d1_mean,
        "d1_std": report.d1_std,
        "dfe": report.dfe,
        "invariance": report.invariance,
        "invariance_threshold": report.invariance_threshold,
        "invariance_passes": report.invariance_passes,
        "wall_clock": report.wall_clock,
        "config_hash": report.config_hash,
        "w1_method": report.w1_method,
        "n_failed": report.n_failed,
    }


@app.post("/experiments/run")
async def experiments_run(payload: dict[str, Any], request: Request) -> dict[str, Any]:
    """
    Run one experiment configuration.

    Args:
        payload: Experiment config mapping (same schema as the YAML files).
    Returns:
        Status and the aggregated metric report.
    Raises:
        HTTPException 400: Invalid config.
        HTTPException 401: Missing/invalid service token.
        HTTPException 500: Every run diverged, or another failure.
    """
    _verify_service_token(request)
    try:
        cfg = parse_config(payload)
        report = await asyncio.to_thread(run_experiment, cfg)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except Exception as exc:
        logger.exception("Experiment run failed.")
        raise HTTPException(status_code=500, detail=f"Experiment run failed: {exc}") from exc
    return {"status": "processed", "report": _report_payload(report)}


@app.post("/grid/run")
async def grid_run(body: GridRequest, request: Request) -> dict[str, Any]:
    """
    Run the four setups at every requested N and write grid.csv/grid.svg to the output directory.

    Raises:
        HTTPException 400: Invalid config or sizes.
        HTTPException 401: Missing/invalid service token.
        HTTPException 500: Grid failure.
    """
    _verify_service_token(request)
    try:
        cfg = parse_config(body.config)
        result = await asyncio.to_thread(run_grid, cfg, body.Ns, build_output_dir())
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except Exception as exc:
        logger.exception("Grid run failed.")
        raise HTTPException(status_code=500, detail=f"Grid run failed: {exc}") from exc
    return {
        "status": "processed",
        "rows": result.table.to_dict(orient="records"),
        "failures": list(result.failures),
        "files": [str(path) for path in result.files],
    }


@app.post("/properties/run")
async def properties_run(body: PropertiesRequest, request: Request) -> dict[str, Any]:
    """Run the selected property suites; failed checks are entries, not errors."""
    _verify_service_token(request)
    try:
        report = await asyncio.to_thread(run_property_suite, body.suites)
    except Exception as exc:
        logger.exception("Property run failed.")
        raise HTTPException(status_code=500, detail=f"Property run failed: {exc}") from exc
    return {
        "status": "processed",
        "passed": report.passed,
        "results": report.to_frame().to_dict(orient="records"),
    }
