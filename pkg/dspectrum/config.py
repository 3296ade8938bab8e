import os
from pathlib import Path

from dotenv import load_dotenv


BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables explicitly from the project-root .env if present
load_dotenv(BASE_DIR / ".env")


class ConfigurationError(RuntimeError):
    """Raised when an environment setting cannot be interpreted."""


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw.replace("_", ""))
    except ValueError as exc:
        raise ConfigurationError(f"Invalid {name} value: {raw!r}") from exc
    if value <= 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")
    return value


def _env_flag(name: str, default: bool = False) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in {"1", "true", "yes", "on"}


# Base data directory where run outputs and the run-log database live
DATA_DIR = Path(os.getenv("DSPECTRUM_DATA_DIR", str(BASE_DIR / "data")))
DATA_DIR.mkdir(parents=True, exist_ok=True)

# SQLite database path
DATABASE_URL = os.getenv(
    "DSPECTRUM_DATABASE_URL", f"sqlite:///{(DATA_DIR / 'dspectrum.db').as_posix()}"
)

# Upper rung of the interval precision ladder (bits)
MAX_PRECISION = _env_int("DSPECTRUM_MAX_PRECISION", 4096)

# Largest x-range the reference cylinder scan walks before the disk engine takes over
SCAN_LIMIT = _env_int("DSPECTRUM_SCAN_LIMIT", 2_000_000)

# Construction aborts once a denominator would exceed this cap
Q_CAP = _env_int("DSPECTRUM_Q_CAP", 10**40)

# Strips examined by one admissible-k search before the caller perturbs lambda*
K_BUDGET = _env_int("DSPECTRUM_K_BUDGET", 4000)

RECORD_RUNS = _env_flag("DSPECTRUM_RECORD_RUNS")


def get_run_dir(name: str) -> Path:
    """
    Return the output directory for a named run under DATA_DIR.
    Example: data/runs/construct-lambda-1
    """
    run_dir = DATA_DIR / "runs" / name.lower()
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir
