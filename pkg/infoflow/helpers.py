from enum import Enum
from pathlib import Path
import re
from typing import Optional

import numpy as np

from .errors import MalformedSpecError
from .io import load_prior


def parse_level_range(levels: Optional[str] = None) -> tuple[int, int]:
    """Parses a depth range "g_min..g_max" into (g_min, g_max).

    Examples
    --------
    >>> parse_level_range('1..4')
    (1, 4)
    >>> parse_level_range('2-3')
    (2, 3)
    >>> parse_level_range('5')
    (5, 5)
    >>> parse_level_range('')
    (1, 1)
    """
    if not levels:
        return (1, 1)
    matches = re.match(r"^(\d+)(?:(?:\.\.|-)(\d+))?$", levels.strip())
    if not matches:
        raise MalformedSpecError(
            f"Invalid level range: {levels}. Expected 'min..max' or 'g'."
        )
    g_min, g_max = matches.groups()
    g_min = int(g_min)
    g_max = g_min if g_max is None else int(g_max)
    if g_max < g_min:
        raise MalformedSpecError(f"Empty level range: {levels}.")
    return (g_min, g_max)


class PriorChoice(str, Enum):
    """Named root priors; anything else is read as a prior file."""

    UNIFORM = "uniform"
    PI = "pi"
    FILE = "file"

    @classmethod
    def from_text(cls, text: str) -> "PriorChoice":
        """
        Examples
        --------
        >>> PriorChoice.from_text("pi")
        <PriorChoice.PI: 'pi'>
        >>> PriorChoice.from_text("prior.json")
        <PriorChoice.FILE: 'file'>
        """
        match text.lower():
            case "uniform":
                return PriorChoice.UNIFORM
            case "pi":
                return PriorChoice.PI
            case _:
                return PriorChoice.FILE


def resolve_prior(text: str, pi: np.ndarray) -> np.ndarray:
    """Turn a --prior value into a vector over the alphabet of pi.

    Examples
    --------
    >>> resolve_prior("uniform", np.array([0.2, 0.8])).tolist()
    [0.5, 0.5]
    """
    match PriorChoice.from_text(text):
        case PriorChoice.UNIFORM:
            return np.full(len(pi), 1.0 / len(pi))
        case PriorChoice.PI:
            return np.asarray(pi, dtype=float)
        case PriorChoice.FILE:
            return load_prior(Path(text))


class ReportSuffix(str, Enum):
    """Report formats selected by the output file suffix."""

    CSV = ".csv"
    JSON = ".json"

    @classmethod
    def from_path(cls, path: Path) -> "ReportSuffix":
        """
        Examples
        --------
        >>> ReportSuffix.from_path(Path("sweep.csv")).name
        'CSV'
        """
        for report_format in cls:
            if path.suffix == report_format.value:
                return report_format
        supported = [fmt.value for fmt in cls]
        raise MalformedSpecError(
            f"Unsupported report format: {path.suffix}. "
            f"Supported formats: {supported}"
        )
