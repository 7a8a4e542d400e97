from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from models.scenario import PhaseLabel


class PhasePartition(BaseModel):
    duration: float
    intervals: Dict[PhaseLabel, List[Tuple[float, float]]] = Field(default_factory=dict)

    def mask(self, label: PhaseLabel, times: np.ndarray) -> np.ndarray:
        """Samples whose time falls in one of the label's half-open intervals."""
        times = np.asarray(times, dtype=float)
        selected = np.zeros(times.shape, dtype=bool)
        for start, end in self.intervals.get(label, []):
            if end >= self.duration:
                selected |= (times >= start) & (times <= end)
            else:
                selected |= (times >= start) & (times < end)
        return selected

    def total_time(self, label: PhaseLabel) -> float:
        return float(sum(end - start for start, end in self.intervals.get(label, [])))


class DelayEstimate(BaseModel):
    delay_s: float
    delay_star: float
    pairs: int


class QuantileStats(BaseModel):
    mean: float
    std: float
    median: float
    q25: float
    q75: float


class PhaseEfficiency(BaseModel):
    useful: Optional[float] = None
    lost: Optional[float] = None
    supplied_J: float = 0.0
    defined: bool = True


class MetricsReport(BaseModel):
    efficiency: Dict[str, PhaseEfficiency] = Field(default_factory=dict)
    # phase -> component -> fraction of the energy lost to the environment
    loss_breakdown: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    delay: Optional[DelayEstimate] = None
    rms_errors: Dict[str, float] = Field(default_factory=dict)
    statistics: Dict[str, QuantileStats] = Field(default_factory=dict)
    mean_ratio: Dict[str, float] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)


class ComparisonReport(BaseModel):
    t_star_start: float
    t_star_end: float
    samples: int
    rms: Dict[str, float] = Field(default_factory=dict)
    max_abs: Dict[str, float] = Field(default_factory=dict)
    pi_residuals: Dict[str, float] = Field(default_factory=dict)
    mean_ratio: Dict[str, float] = Field(default_factory=dict)
    flags: List[str] = Field(default_factory=list)


class EnergyAudit(BaseModel):
    supplied_J: float
    pipe_losses_J: float
    delivered_J: float
    storage_change_J: float
    heater_loss_J: float = 0.0

    @property
    def residual_J(self) -> float:
        return self.supplied_J - (self.pipe_losses_J + self.delivered_J + self.storage_change_J)

    @property
    def relative_error(self) -> float:
        scale = max(abs(self.supplied_J), abs(self.pipe_losses_J) + abs(self.delivered_J), 1e-300)
        return abs(self.residual_J) / scale
