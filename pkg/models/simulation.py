from enum import Enum
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from models.flow_state import FlowState
from models.similitude import NondimBase


class RunStatus(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    COMPLETED = "completed"
    ABORTED = "aborted"
    FAILED = "failed"


class SimulationState(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    # Sub-volume temperatures from upstream to downstream.
    pipe_temperatures: Dict[str, List[float]]
    hx_temperatures: Dict[str, float]
    thermal_mass_temperatures: Dict[str, float]
    ambient: float
    supply_temperature: float
    flow_state: Optional[FlowState] = None
    peltier_powers: Dict[str, float] = Field(default_factory=dict)

    def pipe_bulk_temperature(self, segment_id: str) -> float:
        values = self.pipe_temperatures[segment_id]
        return sum(values) / len(values)

    def pipe_outlet_temperature(self, segment_id: str) -> float:
        return self.pipe_temperatures[segment_id][-1]


class RunMetadata(BaseModel):
    run_id: str = ""
    model_hash: str
    scenario_hash: str
    dt: float
    output_interval: float
    subsegments: int
    base: NondimBase
    status: RunStatus = RunStatus.COMPLETED
    diagnostic: Optional[str] = None
    nondimensional: bool = False
    extra: Dict[str, Any] = Field(default_factory=dict)


class SimulationTrajectory(BaseModel):
    """Uniformly sampled run history; one row per output instant."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    frame: pd.DataFrame
    metadata: RunMetadata

    @property
    def times(self) -> pd.Series:
        return self.frame["t_s"]

    def column(self, name: str) -> pd.Series:
        return self.frame[name]

    def __len__(self) -> int:
        return len(self.frame)
