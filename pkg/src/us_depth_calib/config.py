"""Configuration management for the calibration toolkit."""

import json
import logging
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError
from .models import LineFitMethod

logger = logging.getLogger(__name__)


class CalibrationSettings(BaseModel):
    """Tunable numerical settings shared by the solver, the tip locator and the CLI."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rank_tol: float = Field(default=1e-10, gt=0.0, lt=1.0, description="Relative singular value cutoff")
    structure_tol_mm: float = Field(default=0.1, gt=0.0, description="Tolerance for intrinsic rows 3 and 4")
    homogeneous_tol: float = Field(default=1e-6, gt=0.0, description="Allowed deviation of the mapped w from 1")
    enforce_planar: bool = Field(default=False, description="Force rows 3 and 4 to [0,0,0] and [0,0,1] after solving")
    min_pixels: int = Field(default=10, ge=1, description="Minimum foreground pixels in a needle mask")
    line_fit_method: LineFitMethod = Field(default=LineFitMethod.PRINCIPAL_AXIS)
    ransac_threshold_px: float = Field(default=2.0, gt=0.0, description="RANSAC inlier distance, pixels")
    ransac_iterations: int = Field(default=200, ge=1)
    ransac_seed: int = Field(default=0, ge=0)
    cap_compensation: bool = Field(default=True, description="Pull fitted endpoints in by the mask half-width")


class ConfigManager:
    """Loads calibration settings from a JSON file."""

    def __init__(self, config_file: str | Path):
        self.config_file = Path(config_file)

    def load_config(self, overrides: dict[str, Any] | None = None) -> CalibrationSettings:
        """Load settings from file, then apply non-None overrides.

        A missing file yields the defaults.

        Raises:
            ConfigError: If the file is unreadable or holds invalid settings
        """
        data: dict[str, Any] = {}
        if self.config_file.exists():
            try:
                with open(self.config_file, encoding="utf-8") as f:
                    data = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read settings file {self.config_file}: {e}") from e
            if not isinstance(data, dict):
                raise ConfigError(f"settings file {self.config_file} must hold a JSON object")
            logger.debug("Loaded settings from %s", self.config_file)
        else:
            logger.debug("No settings file at %s, using defaults", self.config_file)

        data.update({key: value for key, value in (overrides or {}).items() if value is not None})
        try:
            return CalibrationSettings(**data)
        except ValidationError as e:
            raise ConfigError(f"invalid settings: {e.errors()[0]['loc']}: {e.errors()[0]['msg']}") from e


# Defaults used when callers pass no settings
default_settings = CalibrationSettings()
