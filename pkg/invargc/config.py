"""
Library and CLI configuration loaded from environment variables
"""

from pydantic_settings import BaseSettings
from pathlib import Path
from dotenv import load_dotenv

# Get the project root directory (parent of 'invargc' folder)
BASE_DIR = Path(__file__).resolve().parent.parent

# Load .env file from project root explicitly
env_path = BASE_DIR / ".env"
load_dotenv(dotenv_path=env_path, override=True)


class Settings(BaseSettings):
    """Runtime settings and numerical defaults"""

    PROJECT_NAME: str = "invargc"

    # Logging
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = True

    # Linear solver defaults (penalty scales are multiplied by T - 1)
    LAMBDA_W_SCALE: float = 0.05
    LAMBDA_Z_SCALE: float = 0.1
    ALPHA: float = 0.5
    MAX_ITERS: int = 20000
    TOL: float = 1e-8
    STEP_INIT: float = 1.0
    BACKTRACK: float = 0.5
    MAX_BACKTRACKS: int = 60

    # Nonlinear solver defaults
    NONLINEAR_HIDDEN: int = 16
    NONLINEAR_REPR: int = 8
    NONLINEAR_EMBED: int = 8
    NONLINEAR_LEARNING_RATE: float = 1e-3
    NONLINEAR_RIDGE: float = 1e-4
    NONLINEAR_MAX_ITERS: int = 4000

    # Analysis and baseline
    THRESHOLD_FRACTION: float = 0.1
    BASELINE_LAMBDA_SCALE: float = 0.05
    BASELINE_MAX_SWEEPS: int = 10000

    # Reports and self-tests
    TRACE_TAIL: int = 50
    CHECK_SEED: int = 20240601

    model_config = {
        "env_file": str(BASE_DIR / ".env"),
        "env_file_encoding": "utf-8",
        "case_sensitive": True,
        "extra": "ignore"
    }


# Global settings instance
try:
    settings = Settings()
except Exception as e:
    import sys
    print(f"[ERROR] Error loading configuration: {e}", file=sys.stderr)
    print("Please check your .env file or the environment variables.", file=sys.stderr)
    raise
