"""Ingestion of external sensor exports through a channel map.

A channel map is INI text with a ``[channels]`` section mapping logger channel
names (TM1, P1, F1, ...) to trajectory columns and an optional ``[time]``
section naming the time column and its unit scale to seconds::

    [time]
    column = Time
    scale = 1.0

    [channels]
    TM1 = T_s_C
    TM2 = T_r_C
"""
import configparser
import logging
from typing import Dict

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from configuration.loader import save_model
from models.errors import ConfigParseError, MissingChannelsError
from models.network import NetworkModel
from models.similitude import NondimBase
from models.simulation import RunMetadata, SimulationTrajectory
from utils.idempotency import RunKey

logger = logging.getLogger("dhn_similitude")


class ChannelMap(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    channels: Dict[str, str] = Field(default_factory=dict)
    time_column: str = "t_s"
    time_scale: float = 1.0


def load_channel_map(config_text: str) -> ChannelMap:
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(config_text)
    except configparser.Error as e:
        raise ConfigParseError(str(e), line=getattr(e, "lineno", None)) from e

    unknown = [name for name in parser.sections() if name not in ("time", "channels")]
    if unknown:
        raise ConfigParseError(f"unknown section(s): {', '.join(unknown)}")
    time_column = "t_s"
    time_scale = 1.0
    if parser.has_section("time"):
        time_column = parser.get("time", "column", fallback="t_s")
        try:
            time_scale = float(parser.get("time", "scale", fallback="1.0"))
        except ValueError as e:
            raise ConfigParseError(f"invalid time scale: {e}", section="time", field="scale") from e
    channels = dict(parser.items("channels")) if parser.has_section("channels") else {}
    return ChannelMap(channels=channels, time_column=time_column, time_scale=time_scale)


def apply_channel_map(frame: pd.DataFrame, channel_map: ChannelMap) -> pd.DataFrame:
    """Rename mapped channels and derive ``t_s``; unmapped channels are dropped."""
    missing = [name for name in [channel_map.time_column, *channel_map.channels] if name not in frame.columns]
    if missing:
        raise MissingChannelsError(missing)
    mapped = pd.DataFrame({"t_s": frame[channel_map.time_column].astype(float) * channel_map.time_scale})
    for channel, column in channel_map.channels.items():
        mapped[column] = frame[channel].astype(float)
    return mapped


def external_trajectory(frame: pd.DataFrame, channel_map: ChannelMap, model: NetworkModel) -> SimulationTrajectory:
    """Wrap a mapped sensor export as a trajectory recorded on ``model``'s base."""
    mapped = apply_channel_map(frame, channel_map)
    times = mapped["t_s"].to_numpy()
    interval = float(np.median(np.diff(times))) if len(times) > 1 else 0.0
    model_hash = RunKey.compute_hash(save_model(model))
    source_hash = RunKey.compute_hash(mapped.to_csv(index=False))
    metadata = RunMetadata(
        run_id=RunKey.run_id(model_hash, source_hash, interval),
        model_hash=model_hash,
        scenario_hash=source_hash,
        dt=interval,
        output_interval=interval or 1.0,
        subsegments=1,
        base=NondimBase.from_model(model),
        extra={
            "source": "external",
            "thermal_mass_setpoints": {tm.id: tm.setpoint_Tset for tm in model.thermal_masses},
        },
    )
    logger.info(f"Ingested {len(mapped)} samples from {len(channel_map.channels)} mapped channel(s)")
    return SimulationTrajectory(frame=mapped, metadata=metadata)
