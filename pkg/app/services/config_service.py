import os
from typing import List, Optional
from dotenv import load_dotenv
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

DEFAULT_L_GRID = [1.0, 4.0, 16.0]


class ConfigService:
    """
    Configuration service to manage environment variables.
    """
    def __init__(self):
        """
        Loads environment variables from .env file.
        """
        load_dotenv()  # Load .env variables into the environment

        self.workers = self._read_int("SRLIMITS_WORKERS", 1)
        self.tolerance = self._read_float("SRLIMITS_TOLERANCE", 1e-10)
        self.output_dir = os.getenv("SRLIMITS_OUTPUT_DIR", "reports")
        self.log_dir: Optional[str] = os.getenv("SRLIMITS_LOG_DIR")
        self.l_grid = self._read_grid("SRLIMITS_L_GRID", DEFAULT_L_GRID)

        if self.workers < 1:
            logger.error(f"SRLIMITS_WORKERS must be positive, got {self.workers}.")
            raise ValueError("SRLIMITS_WORKERS must be a positive integer.")
        if self.tolerance <= 0:
            logger.error(f"SRLIMITS_TOLERANCE must be positive, got {self.tolerance}.")
            raise ValueError("SRLIMITS_TOLERANCE must be a positive float.")

        logger.info("Configuration loaded successfully.")

    @staticmethod
    def _read_int(name: str, default: int) -> int:
        raw = os.getenv(name)
        if raw is None or raw == "":
            return default
        try:
            return int(raw)
        except ValueError:
            logger.error(f"Invalid integer for {name}: {raw!r}")
            raise ValueError(f"{name} must be an integer.")

    @staticmethod
    def _read_float(name: str, default: float) -> float:
        raw = os.getenv(name)
        if raw is None or raw == "":
            return default
        try:
            return float(raw)
        except ValueError:
            logger.error(f"Invalid float for {name}: {raw!r}")
            raise ValueError(f"{name} must be a number.")

    @staticmethod
    def _read_grid(name: str, default: List[float]) -> List[float]:
        raw = os.getenv(name)
        if raw is None or raw.strip() == "":
            return list(default)
        try:
            grid = [float(v) for v in raw.split(",")]
        except ValueError:
            logger.error(f"Invalid L grid for {name}: {raw!r}")
            raise ValueError(f"{name} must be a comma-separated list of numbers.")
        if any(L <= 0 for L in grid):
            logger.error(f"{name} holds a non-positive L: {raw!r}")
            raise ValueError(f"{name} values must be positive.")
        return grid

    def get_workers(self) -> int:
        """
        Returns the worker count used for scenario and L-grid parallelism.
        """
        return self.workers

    def get_tolerance(self) -> float:
        """
        Returns the default quadrature tolerance.
        """
        return self.tolerance

    def get_output_dir(self) -> str:
        """
        Returns the directory reports are written to.
        """
        return self.output_dir

    def get_default_l_grid(self) -> List[float]:
        """
        Returns the finite-L values used when a request names none.
        """
        return list(self.l_grid)
