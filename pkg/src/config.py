"""
Configuration management for the surface GFDM toolkit.
"""
import os
import re
from pathlib import Path
from typing import Dict, Optional, Tuple
from dataclasses import dataclass

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator


@dataclass
class Config:
    """Application configuration class."""

    # Output
    output_dir: str = "results"

    # Application Configuration
    log_level: str = "INFO"
    log_format: str = "console"

    # Solver defaults
    solver_tol: float = 1e-10
    max_iter: int = 1000
    jobs: int = 1

    def __post_init__(self):
        """Load configuration from environment variables."""
        # Load .env file if it exists
        env_path = Path(".env")
        if env_path.exists():
            load_dotenv(env_path)

        self.output_dir = os.getenv("GFDM_OUT", self.output_dir)

        self.log_level = os.getenv("LOG_LEVEL", self.log_level)
        self.log_format = os.getenv("LOG_FORMAT", self.log_format)

        self.solver_tol = float(os.getenv("GFDM_SOLVER_TOL", str(self.solver_tol)))
        self.max_iter = int(os.getenv("GFDM_MAX_ITER", str(self.max_iter)))
        self.jobs = int(os.getenv("GFDM_JOBS", str(self.jobs)))

    def validate_output_dir(self) -> bool:
        """Check that the output directory exists or can be created."""
        path = Path(self.output_dir)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError:
            return False
        return os.access(path, os.W_OK)


_NEIGHBORS_PATTERN = re.compile(r"^(knn:(?P<k>\d+)|radius)$")


class RunConfig(BaseModel):
    """Parameters of a single CLI run, serializable as a key = value file."""

    geometry: str = "sphere"
    h: Optional[float] = Field(default=None, gt=0)
    jitter: Optional[float] = Field(default=None, ge=0, lt=1)
    order: int = 2
    wf: float = Field(default=2.0, gt=0)
    ac: Optional[float] = None
    optimize: bool = True
    projection: str = "central"
    neighbors: str = "knn:15"
    tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=1000, ge=1)
    dt: Optional[float] = Field(default=None, gt=0)
    levels: int = Field(default=3, ge=1)
    out: str = "results"
    seed: int = 0
    jobs: int = Field(default=1, ge=1)
    checkpoint_stride: int = Field(default=0, ge=0)

    @field_validator("order")
    @classmethod
    def _check_order(cls, value: int) -> int:
        if value not in (2, 3):
            raise ValueError("order must be 2 or 3")
        return value

    @field_validator("projection")
    @classmethod
    def _check_projection(cls, value: str) -> str:
        if value not in ("central", "neighbor"):
            raise ValueError("projection must be 'central' or 'neighbor'")
        return value

    @field_validator("neighbors")
    @classmethod
    def _check_neighbors(cls, value: str) -> str:
        if not _NEIGHBORS_PATTERN.match(value):
            raise ValueError("neighbors must be 'knn:K' or 'radius'")
        return value

    @field_validator("ac")
    @classmethod
    def _check_ac(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and value in (0.0, 1.0):
            raise ValueError("ac must not be 0 or 1")
        return value

    @property
    def neighbor_strategy(self) -> Tuple[str, Optional[int]]:
        """Return ('knn', K) or ('radius', None)."""
        match = _NEIGHBORS_PATTERN.match(self.neighbors)
        if match.group("k") is not None:
            return "knn", int(match.group("k"))
        return "radius", None

    def to_text(self) -> str:
        """Render as plain key = value lines, in field order."""
        lines = []
        for key, value in self.model_dump().items():
            if value is None:
                continue
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def write(self, directory: Path) -> Path:
        """Echo the config into an output directory."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "run_config.txt"
        path.write_text(self.to_text(), encoding="utf-8")
        return path

    @staticmethod
    def parse_file(path: Path) -> Dict[str, str]:
        """Parse a key = value file; blank lines and '#' comments are ignored."""
        values: Dict[str, str] = {}
        for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{number}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
        return values

    @classmethod
    def from_sources(cls, file_path: Optional[Path] = None, **flags) -> "RunConfig":
        """Merge config file values with flags; flags that are not None win."""
        values: Dict[str, object] = {"out": config.output_dir, "tol": config.solver_tol,
                                     "max_iter": config.max_iter, "jobs": config.jobs}
        if file_path is not None:
            values.update(cls.parse_file(file_path))
        values.update({key: value for key, value in flags.items() if value is not None})
        return cls(**values)


# Global configuration instance
config = Config()
