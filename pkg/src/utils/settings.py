"""
Runtime settings read from the environment
"""
import os
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from dotenv import load_dotenv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """Tolerances, seeds and output locations shared by the CLI and the server"""
    tol: float = 1e-9
    traj_tol: float = 1e-6
    seed: int = 42
    output_dir: Path = Path("out")
    jobs: int = 1
    log_level: str = "INFO"

    @classmethod
    def from_env(cls, dotenv: bool = True) -> "Settings":
        """
        Build settings from EVI_* environment variables

        Args:
            dotenv: Load a .env file first

        Returns:
            Settings instance
        """
        if dotenv:
            load_dotenv()

        try:
            settings = cls(
                tol=float(os.getenv("EVI_TOL", "1e-9")),
                traj_tol=float(os.getenv("EVI_TRAJ_TOL", "1e-6")),
                seed=int(os.getenv("EVI_SEED", "42")),
                output_dir=Path(os.getenv("EVI_OUTPUT_DIR", "out")),
                jobs=max(1, int(os.getenv("EVI_JOBS", "1"))),
                log_level=os.getenv("EVI_LOG_LEVEL", "INFO").upper(),
            )
        except ValueError as e:
            raise ValueError(f"Invalid EVI_* environment setting: {e}") from e

        if settings.tol <= 0 or settings.traj_tol <= 0:
            raise ValueError("EVI_TOL and EVI_TRAJ_TOL must be positive")

        logger.debug(f"Loaded settings: {settings}")
        return settings

    def override(self, **kwargs) -> "Settings":
        """Return a copy with the non-None keyword values replaced"""
        changes = {k: v for k, v in kwargs.items() if v is not None}
        if "output_dir" in changes:
            changes["output_dir"] = Path(changes["output_dir"])
        return replace(self, **changes)
