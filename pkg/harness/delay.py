import logging
from typing import List, Tuple

import numpy as np
from scipy.signal import find_peaks

from models.errors import InsufficientSignalError
from models.metrics import DelayEstimate
from models.similitude import NondimBase

logger = logging.getLogger("dhn_similitude")

PROMINENCE_FRACTION = 0.05


def extrema(values: np.ndarray, prominence_fraction: float = PROMINENCE_FRACTION) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of peaks and valleys whose prominence exceeds a fraction of the signal range."""
    values = np.asarray(values, dtype=float)
    span = float(np.ptp(values)) if len(values) else 0.0
    if span <= 0.0:
        return np.array([], dtype=int), np.array([], dtype=int)
    prominence = prominence_fraction * span
    peaks, _ = find_peaks(values, prominence=prominence)
    valleys, _ = find_peaks(-values, prominence=prominence)
    return peaks, valleys


def refined_times(times: np.ndarray, values: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Extremum instants refined to sub-sample accuracy by a parabola through the three nearest samples."""
    refined = times[indices].astype(float)
    for n, i in enumerate(indices):
        if i == 0 or i == len(values) - 1:
            continue
        curvature = values[i - 1] - 2.0 * values[i] + values[i + 1]
        if curvature == 0.0:
            continue
        shift = 0.5 * (values[i - 1] - values[i + 1]) / curvature
        step = times[i + 1] - times[i] if shift > 0 else times[i] - times[i - 1]
        refined[n] += shift * step
    return refined


def _pair_offsets(leading: np.ndarray, lagging: np.ndarray) -> List[float]:
    """Offset from each leading extremum to the nearest lagging one of the same kind."""
    if len(lagging) == 0:
        return []
    return [float(lagging[np.argmin(np.abs(lagging - instant))] - instant) for instant in leading]


def peak_valley_delay(times, supply, returned, base: NondimBase,
                      prominence_fraction: float = PROMINENCE_FRACTION) -> DelayEstimate:
    """Mean lag between matching supply and return temperature extrema.

    Peaks pair with peaks and valleys with valleys; each supply extremum is
    matched with the nearest return extremum of the same kind, on either side.
    """
    times = np.asarray(times, dtype=float)
    supply = np.asarray(supply, dtype=float)
    returned = np.asarray(returned, dtype=float)
    supply_peaks, supply_valleys = extrema(supply, prominence_fraction)
    return_peaks, return_valleys = extrema(returned, prominence_fraction)

    offsets = (
        _pair_offsets(refined_times(times, supply, supply_peaks), refined_times(times, returned, return_peaks))
        + _pair_offsets(refined_times(times, supply, supply_valleys), refined_times(times, returned, return_valleys))
    )
    if not offsets:
        raise InsufficientSignalError("insufficient signal variation: no matched supply/return extrema")

    delay = float(np.mean(offsets))
    delay_star = delay * base.mdot_I / (base.rho * base.D ** 3)
    logger.info(f"Peak-valley delay {delay:.2f} s (t* {delay_star:.4g}) from {len(offsets)} pairs")
    return DelayEstimate(delay_s=delay, delay_star=delay_star, pairs=len(offsets))
