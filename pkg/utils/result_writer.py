import os
import json
import logging
from datetime import datetime
from typing import Any, Dict, Optional

import pandas as pd

from models.simulation import RunMetadata, SimulationTrajectory

logger = logging.getLogger("dhn_similitude")

FLOAT_FORMAT = "%.9e"


class ResultWriter:
    def __init__(self, base_dir: str = "output", dated: bool = True):
        self.base_dir = base_dir
        self.dated = dated

    def _output_dir(self) -> str:
        output_dir = self.base_dir
        if self.dated:
            output_dir = os.path.join(self.base_dir, datetime.now().strftime("%Y-%m-%d"))
        if not os.path.exists(output_dir):
            os.makedirs(output_dir)
            logger.info(f"Created output directory: {output_dir}")
        return output_dir

    def save_trajectory(self, trajectory: SimulationTrajectory, name: Optional[str] = None) -> str:
        """
        Saves the trajectory to <dir>/<name>.csv with its run metadata in
        <dir>/<name>.json; name defaults to the run id.
        """
        stem = os.path.join(self._output_dir(), name or trajectory.metadata.run_id)
        trajectory.frame.to_csv(f"{stem}.csv", index=False, float_format=FLOAT_FORMAT)
        with open(f"{stem}.json", "w") as f:
            f.write(trajectory.metadata.model_dump_json(indent=4))
        logger.info(f"Saved trajectory ({len(trajectory)} samples) to: {stem}.csv")
        return f"{stem}.csv"

    def save_result(self, name: str, data: Dict[str, Any]) -> str:
        """Saves a JSON document to <dir>/<name>.json."""
        filepath = os.path.join(self._output_dir(), f"{name}.json")

        def json_serial(obj):
            if isinstance(obj, datetime):
                return obj.isoformat()
            if hasattr(obj, "model_dump"):
                return obj.model_dump(mode="json")
            raise TypeError(f"Type {type(obj)} not serializable")

        with open(filepath, "w") as f:
            json.dump(data, f, indent=4, default=json_serial)
        logger.info(f"Saved results to: {filepath}")
        return filepath

    def save_table(self, name: str, frame: pd.DataFrame) -> str:
        filepath = os.path.join(self._output_dir(), f"{name}.csv")
        frame.to_csv(filepath, index=False, float_format=FLOAT_FORMAT)
        logger.info(f"Saved table to: {filepath}")
        return filepath

    def save_text(self, name: str, text: str, suffix: str = ".txt") -> str:
        filepath = os.path.join(self._output_dir(), f"{name}{suffix}")
        with open(filepath, "w") as f:
            f.write(text)
        logger.info(f"Saved report to: {filepath}")
        return filepath


def read_trajectory(csv_path: str) -> SimulationTrajectory:
    """Loads a trajectory CSV and the metadata sidecar written next to it."""
    sidecar = os.path.splitext(csv_path)[0] + ".json"
    if not os.path.exists(sidecar):
        raise FileNotFoundError(f"missing run metadata next to {csv_path}: {sidecar}")
    with open(sidecar) as f:
        metadata = RunMetadata.model_validate_json(f.read())
    return SimulationTrajectory(frame=pd.read_csv(csv_path), metadata=metadata)
