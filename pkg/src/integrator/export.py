"""
Trajectory CSV export
"""
from pathlib import Path
from typing import List

import numpy as np

from utils.textio import write_csv
from .system import Trajectory


def trajectory_header(n: int, d: int) -> List[str]:
    return (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"eta{i + 1}" for i in range(d)]
        + [f"v{i + 1}" for i in range(d)]
        + ["jump_flag"]
    )


def write_trajectory_csv(traj: Trajectory, path: Path) -> Path:
    """
    Write t, x1..xn, eta1..etad, v1..vd, jump_flag with 17 significant digits

    Args:
        traj: Simulated trajectory
        path: Output CSV file

    Returns:
        The path written
    """
    rows = np.column_stack([
        traj.times,
        traj.states,
        traj.multipliers,
        traj.constraint_values,
        traj.jump_flags.astype(float),
    ])
    return write_csv(path, trajectory_header(traj.n, traj.d), rows)
