"""
Configuration for the dyadic capacity toolkit

Central settings for window sizes, tolerances, sampling and worker pools.
Every value can be overridden through environment variables (or a .env file).
"""
import os

from dotenv import load_dotenv

# Load .env file
load_dotenv()

APP_NAME = "dyadic-capacity"
APP_VERSION = "1.0"

# Logging
LOG_LEVEL = os.getenv("DYADIC_LOG_LEVEL", "INFO")

# Lattice limits: configurations above this many finest cells are rejected
MAX_FINEST_CELLS = int(os.getenv("DYADIC_MAX_FINEST_CELLS", 2 ** 24))

# Default window used when a document carries no "config" block
DEFAULT_DIMENSION = int(os.getenv("DYADIC_DEFAULT_DIMENSION", 1))
DEFAULT_FINEST_LEVEL = int(os.getenv("DYADIC_DEFAULT_FINEST_LEVEL", -6))

# Sampling
DEFAULT_SEED = int(os.getenv("DYADIC_DEFAULT_SEED", 0))
DEFAULT_SAMPLES = int(os.getenv("DYADIC_DEFAULT_SAMPLES", 200))

# Numerics
TOLERANCE = float(os.getenv("DYADIC_TOLERANCE", 1e-9))
DP_RELATIVE_TOLERANCE = float(os.getenv("DYADIC_DP_RELATIVE_TOLERANCE", 1e-12))

# Worker pool for independent trials
MAX_WORKERS = int(os.getenv("DYADIC_MAX_WORKERS", min(os.cpu_count() or 1, 8)))

# John-Nirenberg subcube sampling
JN_EXHAUSTIVE_DEPTH = int(os.getenv("DYADIC_JN_EXHAUSTIVE_DEPTH", 4))
JN_RANDOM_CUBES = int(os.getenv("DYADIC_JN_RANDOM_CUBES", 100))


def validate_config():
    """Validate configuration, returning a list of error/warning messages"""
    errors = []

    if MAX_FINEST_CELLS <= 0 or MAX_FINEST_CELLS & (MAX_FINEST_CELLS - 1):
        errors.append(f"DYADIC_MAX_FINEST_CELLS must be a power of two, got {MAX_FINEST_CELLS}")

    if DEFAULT_DIMENSION < 1:
        errors.append(f"DYADIC_DEFAULT_DIMENSION must be >= 1, got {DEFAULT_DIMENSION}")

    if DEFAULT_FINEST_LEVEL > 0:
        errors.append(f"DYADIC_DEFAULT_FINEST_LEVEL must be <= 0, got {DEFAULT_FINEST_LEVEL}")
    elif 2 ** (-DEFAULT_FINEST_LEVEL * max(DEFAULT_DIMENSION, 1)) > MAX_FINEST_CELLS:
        errors.append("WARNING: default window exceeds DYADIC_MAX_FINEST_CELLS")

    if TOLERANCE < 0 or DP_RELATIVE_TOLERANCE < 0:
        errors.append("Tolerances must be non-negative")

    if MAX_WORKERS < 1:
        errors.append(f"DYADIC_MAX_WORKERS must be >= 1, got {MAX_WORKERS}")

    if DEFAULT_SAMPLES < 0 or JN_RANDOM_CUBES < 0 or JN_EXHAUSTIVE_DEPTH < 0:
        errors.append("Sample counts must be non-negative")

    if LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        errors.append(f"WARNING: unknown DYADIC_LOG_LEVEL {LOG_LEVEL!r}, falling back to INFO")

    return errors


def describe_config():
    """Configuration rows (name, value) for display"""
    return [
        ("Log level", LOG_LEVEL),
        ("Max finest cells", MAX_FINEST_CELLS),
        ("Default dimension", DEFAULT_DIMENSION),
        ("Default finest level", DEFAULT_FINEST_LEVEL),
        ("Default seed", DEFAULT_SEED),
        ("Default samples", DEFAULT_SAMPLES),
        ("Tolerance", TOLERANCE),
        ("DP relative tolerance", DP_RELATIVE_TOLERANCE),
        ("Max workers", MAX_WORKERS),
        ("JN exhaustive depth", JN_EXHAUSTIVE_DEPTH),
        ("JN random cubes", JN_RANDOM_CUBES),
    ]
