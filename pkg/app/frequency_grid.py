import cmath
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import settings
from errors import InvalidParameterError


class FrequencyGrid(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    start_hz: float = Field(gt=0)
    stop_hz: float = Field(gt=0)
    points: int = Field(ge=1)
    spacing: Literal["log", "lin"] = "log"

    @model_validator(mode="after")
    def _ordered(self):
        if self.points > 1 and not self.stop_hz > self.start_hz:
            raise ValueError("stop_hz must be greater than start_hz")
        return self

    def frequencies(self) -> np.ndarray:
        """Grid points; a span too narrow for ``points`` distinct floats is rejected."""
        if self.points == 1:
            return np.array([self.start_hz])
        if self.spacing == "log":
            return check_grid_values(np.geomspace(self.start_hz, self.stop_hz, self.points))
        return check_grid_values(np.linspace(self.start_hz, self.stop_hz, self.points))


def default_grid() -> FrequencyGrid:
    return FrequencyGrid(
        start_hz=settings.default_grid_start_hz,
        stop_hz=settings.default_grid_stop_hz,
        points=settings.default_grid_points,
        spacing=settings.default_grid_spacing,
    )


def single_point(freq_hz: float) -> FrequencyGrid:
    return FrequencyGrid(start_hz=freq_hz, stop_hz=freq_hz, points=1)


def parse_grid(text: str) -> FrequencyGrid:
    """Parse ``start,stop,points,log|lin`` as given to ``--grid``."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 4:
        raise InvalidParameterError(f"grid must be 'start,stop,points,log|lin', got {text!r}")
    try:
        return FrequencyGrid(
            start_hz=float(parts[0]),
            stop_hz=float(parts[1]),
            points=int(parts[2]),
            spacing=parts[3].lower(),
        )
    except ValueError as exc:
        raise InvalidParameterError(f"invalid grid {text!r}: {exc}") from exc


def check_grid_values(freqs) -> np.ndarray:
    """Validate an explicit frequency list: nonempty, positive, strictly increasing."""
    freqs = np.asarray(freqs, dtype=float)
    if freqs.ndim != 1 or freqs.size == 0:
        raise InvalidParameterError("frequency grid must be a nonempty 1-D list")
    if not np.all(np.isfinite(freqs)) or np.any(freqs <= 0):
        raise InvalidParameterError("grid frequencies must be finite and > 0")
    if np.any(np.diff(freqs) <= 0):
        raise InvalidParameterError("grid frequencies must be strictly increasing")
    return freqs


class FrcRow(NamedTuple):
    """One row of a frequency response curve."""

    frequency_hz: float
    magnitude: float
    phase_rad: float


def frc_row(freq_hz: float, value: complex) -> FrcRow:
    return FrcRow(float(freq_hz), abs(value), cmath.phase(value))
