import hashlib
import logging

logger = logging.getLogger("dhn_similitude")


class RunKey:
    @staticmethod
    def compute_hash(text: str) -> str:
        """sha256 of a canonical config text."""
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @staticmethod
    def run_id(model_hash: str, scenario_hash: str, dt: float) -> str:
        """
        Deterministic run id: identical model, scenario and step always map to the
        same id, so a repeated run overwrites its own output.
        """
        raw = f"{model_hash}:{scenario_hash}:{dt!r}"
        return hashlib.sha256(raw.encode()).hexdigest()[:16]
