import asyncio
import logging
import traceback
from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict

from configuration.settings import get_settings
from control.autotune import autotune_all
from control.occupancy import OccupancyController
from models.errors import DhnError, SimulationAbortedError
from models.network import NetworkModel
from models.scenario import ExperimentScenario
from models.simulation import RunStatus, SimulationTrajectory
from thermal.simulator import simulate
from utils.result_writer import ResultWriter

logger = logging.getLogger("dhn_similitude")


class ExperimentJob(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    model: NetworkModel
    scenario: ExperimentScenario
    closed_loop: bool = True
    autotune: bool = False
    seed: Optional[int] = None


class RunRecord(BaseModel):
    run_id: str
    name: str
    status: RunStatus = RunStatus.QUEUED
    started_at: Optional[datetime] = None
    finished_at: Optional[datetime] = None
    samples: int = 0
    output_path: Optional[str] = None
    error: Optional[str] = None


def run_job(job: ExperimentJob) -> SimulationTrajectory:
    """Runs one simulation, closed-loop through the occupancy PIDs unless disabled."""
    controller = None
    if job.closed_loop and job.scenario.occupancy_windows:
        gains = None
        if job.autotune or (job.scenario.controller_config and job.scenario.controller_config.autotune):
            seed = job.seed if job.seed is not None else get_settings().seed
            gains = autotune_all(job.model, job.scenario, seed)
        controller = OccupancyController(job.model, job.scenario, gains)
    return simulate(job.model, job.scenario, controller)


class ExperimentRunner:
    def __init__(self, writer: Optional[ResultWriter] = None, max_parallel: Optional[int] = None):
        settings = get_settings()
        self.writer = writer or ResultWriter(settings.output_dir)
        self.max_parallel = max_parallel or settings.max_parallel_runs
        self.records: Dict[str, RunRecord] = {}

    def _execute(self, job: ExperimentJob, record: RunRecord) -> RunRecord:
        record.status = RunStatus.RUNNING
        record.started_at = datetime.now()
        logger.info(f"Starting run {job.name} [RunID: {record.run_id}]")
        try:
            trajectory = run_job(job)
            record.output_path = self.writer.save_trajectory(trajectory, record.run_id)
            record.samples = len(trajectory)
            record.status = RunStatus.COMPLETED
        except SimulationAbortedError as e:
            logger.error(f"Run {job.name} aborted: {e}")
            if e.partial is not None:
                record.output_path = self.writer.save_trajectory(e.partial, record.run_id)
                record.samples = len(e.partial)
            record.status = RunStatus.ABORTED
            record.error = str(e)
        except DhnError as e:
            logger.error(f"Run {job.name} failed: {e}")
            record.status = RunStatus.FAILED
            record.error = str(e)
        except Exception as e:
            logger.error(f"Run {job.name} failed: {e}")
            logger.error(traceback.format_exc())
            record.status = RunStatus.FAILED
            record.error = str(e)
        record.finished_at = datetime.now()
        return record

    def submit(self, job: ExperimentJob, run_id: str) -> RunRecord:
        record = RunRecord(run_id=run_id, name=job.name)
        self.records[run_id] = record
        return record

    async def run_experiments(self, jobs: List[ExperimentJob], run_ids: Optional[List[str]] = None) -> List[RunRecord]:
        """
        Runs independent simulations in worker threads, at most ``max_parallel`` at a time.
        Results come back in job order.
        """
        semaphore = asyncio.Semaphore(self.max_parallel)
        run_ids = run_ids or [f"{job.name}-{index}" for index, job in enumerate(jobs)]

        async def process(job: ExperimentJob, run_id: str) -> RunRecord:
            record = self.records.get(run_id) or self.submit(job, run_id)
            async with semaphore:
                return await asyncio.to_thread(self._execute, job, record)

        results = await asyncio.gather(*(process(job, run_id) for job, run_id in zip(jobs, run_ids)))
        completed = sum(1 for record in results if record.status == RunStatus.COMPLETED)
        logger.info(f"Experiments complete. Completed: {completed}, Not completed: {len(results) - completed}")
        return list(results)

    def status(self, run_id: str) -> Optional[Dict[str, Any]]:
        record = self.records.get(run_id)
        return record.model_dump(mode="json") if record else None
