from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field


class CommandName(str, Enum):
    SCALE = "scale"
    SIMULATE = "simulate"
    NONDIM = "nondim"
    COMPARE = "compare"
    METRICS = "metrics"
    VALIDATE = "validate"


class CommandSpec(BaseModel):
    command: CommandName
    model: Optional[str] = None
    scenario: Optional[str] = None
    full: Optional[str] = None
    lab_constraints: Optional[str] = None
    trajectories: List[str] = Field(default_factory=list)
    channel_map: Optional[str] = None
    out_dir: Optional[str] = None
    overrides: List[str] = Field(default_factory=list)
    seed: Optional[int] = None
    dt: Optional[float] = None
    subsegments: Optional[int] = None
    autotune: bool = False
