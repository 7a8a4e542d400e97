from typing import Dict, Tuple

from pydantic import BaseModel, ConfigDict, Field


class FlowState(BaseModel):
    """Quasi-static hydraulic solution for one set of valve positions."""

    model_config = ConfigDict(frozen=True)

    total_flow: float
    segment_flows: Dict[str, float] = Field(default_factory=dict)
    segment_pressure_drops: Dict[str, float] = Field(default_factory=dict)
    hx_flows: Dict[str, float] = Field(default_factory=dict)
    hx_pressure_drops: Dict[str, float] = Field(default_factory=dict)
    # Keyed by valve id: one loop per valve.
    loop_flows: Dict[str, float] = Field(default_factory=dict)
    loop_pressure_drops: Dict[str, float] = Field(default_factory=dict)
    branch_flows: Dict[str, Tuple[float, float]] = Field(default_factory=dict)
    valve_positions: Dict[str, float] = Field(default_factory=dict)
    network_pressure_drop: float = 0.0
    pressure_residual: float = 0.0
    iterations: int = 0

    def edge_flow(self, edge_id: str) -> float:
        if edge_id in self.segment_flows:
            return self.segment_flows[edge_id]
        return self.hx_flows[edge_id]
