"""
Plain-text reports (stable "key: value" lines) and the regulation-error CSV
"""
import logging
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.textio import format_float, write_csv
from .model import ConvergenceTable

logger = logging.getLogger(__name__)

ReportItems = List[Tuple[str, Any]]


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(format_value(v) for v in value)
    if value is None:
        return "none"
    return str(value)


def format_report(items: Iterable[Tuple[str, Any]]) -> str:
    return "".join(f"{key}: {format_value(value)}\n" for key, value in items)


def parse_report(text: str) -> dict:
    """Inverse of format_report for scraping; values stay strings"""
    result = {}
    for line in text.splitlines():
        if ": " in line:
            key, value = line.split(": ", 1)
            result[key] = value
    return result


def write_report(path: Path, items: Iterable[Tuple[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(items))
    logger.info(f"Wrote report {path}")
    return path


def error_header(d_w: int, d_e: int, d_u: int) -> List[str]:
    return (
        ["t"]
        + [f"w{i + 1}" for i in range(d_w)]
        + [f"e{i + 1}" for i in range(d_e)]
        + ["V"]
        + [f"u_eta{i + 1}" for i in range(d_u)]
        + ["jump_flag"]
    )


def write_error_csv(
    path: Path,
    times: np.ndarray,
    w: np.ndarray,
    errors: np.ndarray,
    values: np.ndarray,
    jump_flags: np.ndarray,
    u_eta: Optional[np.ndarray] = None
) -> Path:
    """
    Write t, w.., e.., V, u_eta.., jump_flag with 17 significant digits

    u_eta columns are present only when u_eta is given.
    """
    u_eta = np.zeros((len(times), 0)) if u_eta is None else np.atleast_2d(u_eta)
    header = error_header(w.shape[1], errors.shape[1], u_eta.shape[1])
    rows = np.column_stack([times, w, errors, values, u_eta, jump_flags.astype(float)])
    return write_csv(path, header, rows)


def convergence_items(table: ConvergenceTable) -> ReportItems:
    items: ReportItems = [
        ("scenario", table.scenario),
        ("reference_dt", table.reference_dt),
    ]
    for i, (dt, err, terminal) in enumerate(table.rows()):
        items.append((f"dt[{i}]", dt))
        items.append((f"error[{i}]", err))
        items.append((f"terminal_error[{i}]", terminal))
    items.extend([
        ("order", table.order),
        ("loglog_slope", table.slope),
        ("richardson", table.richardson),
    ])
    if table.error:
        items.append(("error", table.error))
    return items


def format_table(table: ConvergenceTable) -> str:
    """Aligned dt / error columns followed by the fitted order"""
    lines = [f"{'dt':>12}  {'error':>12}  {'terminal':>12}"]
    for dt, err, terminal in table.rows():
        lines.append(f"{dt:12.4e}  {err:12.4e}  {terminal:12.4e}")
    lines.append(f"order: {table.order:.4f} (log-log slope {table.slope:.4f})")
    return "\n".join(lines)


def summarize(items: Sequence[Tuple[str, Any]], keys: Sequence[str]) -> str:
    lookup = dict(items)
    return ", ".join(f"{k}={format_value(lookup[k])}" for k in keys if k in lookup)
