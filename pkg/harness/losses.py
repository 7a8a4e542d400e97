import logging
from typing import List

import pandas as pd

from models.errors import MissingChannelsError
from models.network import NetworkModel
from models.simulation import SimulationTrajectory

logger = logging.getLogger("dhn_similitude")


def required_channels(model: NetworkModel) -> List[str]:
    columns = ["t_s", "T_s_C", "T_r_C", "mdot_I_kgps"]
    for hx in model.heat_exchangers:
        columns += [f"T_{hx.id}_in_C", f"T_{hx.id}_C", f"mdot_{hx.id}_kgps"]
    return columns


def enthalpy_losses(trajectory: SimulationTrajectory, model: NetworkModel) -> pd.DataFrame:
    """Per-sample heat balance from water-side enthalpy changes only.

    Q_tot = ṁ_I c_p (T_s - T_r), Q_ThM_<tm> = ṁ_HX c_p (T_HX,in - T_HX,out) and
    Q_amb = Q_tot - ΣQ_ThM, so the decomposition closes by construction.
    """
    frame = trajectory.frame
    missing = [name for name in required_channels(model) if name not in frame.columns]
    if missing:
        raise MissingChannelsError(missing)

    cp = model.fluid.cp
    losses = pd.DataFrame({"t_s": frame["t_s"]})
    losses["Q_tot_W"] = frame["mdot_I_kgps"] * cp * (frame["T_s_C"] - frame["T_r_C"])
    delivered = pd.Series(0.0, index=frame.index)
    for hx in model.heat_exchangers:
        column = f"Q_ThM_{hx.thermal_mass}_W"
        losses[column] = frame[f"mdot_{hx.id}_kgps"] * cp * (frame[f"T_{hx.id}_in_C"] - frame[f"T_{hx.id}_C"])
        delivered = delivered + losses[column]
    losses["Q_amb_W"] = losses["Q_tot_W"] - delivered
    return losses
