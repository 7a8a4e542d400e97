from fastapi import FastAPI, BackgroundTasks, HTTPException
from pydantic import BaseModel
import logging
from contextlib import asynccontextmanager
from typing import Optional

from configuration.loader import load_lab_constraints, load_model, load_scenario, save_model, save_scenario
from configuration.settings import get_settings
from harness.experiment_runner import ExperimentJob, ExperimentRunner
from models.errors import ConfigParseError, DhnError
from network.validator import validate_network
from similitude.sizing import solve_lab_scale
from utils.idempotency import RunKey
from utils.logger import setup_logger

# Setup Logger
setup_logger(level=get_settings().log_level)
logger = logging.getLogger("dhn_similitude")

runner = ExperimentRunner()


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info(f"Service started; writing runs to {runner.writer.base_dir}")
    yield
    logger.info("Service stopped")

app = FastAPI(title="DHN Similitude Service", version="1.0.0", lifespan=lifespan)


class ValidateRequest(BaseModel):
    model: str


class ScaleRequest(BaseModel):
    full: str
    lab_constraints: str


class RunRequest(BaseModel):
    model: str
    scenario: str
    name: Optional[str] = None
    autotune: bool = False
    seed: Optional[int] = None


def _bad_config(e: ConfigParseError) -> HTTPException:
    return HTTPException(status_code=400, detail={"error": str(e), "line": e.line, "section": e.section,
                                                  "field": e.field})


@app.post("/api/v1/validate")
def validate(request: ValidateRequest):
    try:
        model = load_model(request.model)
    except ConfigParseError as e:
        raise _bad_config(e)
    report = validate_network(model)
    return {"valid": report.valid, "violations": [v.model_dump(mode="json") for v in report.violations]}


@app.post("/api/v1/scale")
def scale(request: ScaleRequest):
    try:
        full_model = load_model(request.full)
        constraints = load_lab_constraints(request.lab_constraints)
    except ConfigParseError as e:
        raise _bad_config(e)
    report = validate_network(full_model)
    if not report.valid:
        raise HTTPException(status_code=422, detail=[v.model_dump(mode="json") for v in report.errors])
    try:
        solution = solve_lab_scale(full_model, constraints)
    except DhnError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return {
        "feasible": solution.feasible,
        "solution": solution.model_dump(mode="json", exclude={"lab_model"}),
        "lab_model": save_model(solution.lab_model),
    }


@app.post("/api/v1/runs")
async def submit_run(request: RunRequest, background_tasks: BackgroundTasks):
    try:
        model = load_model(request.model)
        scenario = load_scenario(request.scenario)
    except ConfigParseError as e:
        raise _bad_config(e)
    report = validate_network(model)
    if not report.valid:
        raise HTTPException(status_code=422, detail=[v.model_dump(mode="json") for v in report.errors])

    # Same configs always map to the same run id.
    run_id = RunKey.run_id(
        RunKey.compute_hash(save_model(model)), RunKey.compute_hash(save_scenario(scenario)), scenario.dt or 0.0)
    job = ExperimentJob(name=request.name or run_id, model=model, scenario=scenario,
                        autotune=request.autotune, seed=request.seed)
    runner.submit(job, run_id)
    background_tasks.add_task(runner.run_experiments, [job], [run_id])

    return {
        "message": "Run queued",
        "run_id": run_id,
        "status": "queued"
    }


@app.get("/api/v1/runs/{run_id}")
def run_status(run_id: str):
    status = runner.status(run_id)
    if status is None:
        raise HTTPException(status_code=404, detail=f"Unknown run {run_id}")
    return status


@app.get("/health")
def health_check():
    return {"status": "ok"}
