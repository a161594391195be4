"""
Number formatting and CSV writing with round-trip precision
"""
import csv
import logging
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# 17 significant digits round-trip any IEEE double
SIG_DIGITS = 17


def format_float(value: float) -> str:
    """Format a float with 17 significant digits"""
    return f"{float(value):.{SIG_DIGITS}g}"


def format_row(values: Iterable[float]) -> List[str]:
    return [format_float(v) for v in values]


def matrix_to_lists(matrix: np.ndarray) -> List[List[float]]:
    """Row-major nested lists for JSON output"""
    return [[float(v) for v in row] for row in np.atleast_2d(matrix)]


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    """
    Write numeric rows to a CSV file

    Args:
        path: Output file
        header: Column names
        rows: Iterable of numeric rows

    Returns:
        The path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow(format_row(row))
            count += 1

    logger.info(f"Wrote {count} rows to {path}")
    return path
