"""
Configuration settings for the FMO resonance toolkit
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, default))


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, default))


class Settings:
    """Application settings"""

    # Data and output
    DATA_DIRECTORY: str = os.getenv("FMO_DATA_DIRECTORY", "./data")
    FMO_DATASET: str = os.getenv(
        "FMO_DATASET", os.path.join(DATA_DIRECTORY, "fmo_adolphs_renger.json")
    )
    OUTPUT_DIRECTORY: str = os.getenv("FMO_OUTPUT_DIRECTORY", "./results")
    LOG_LEVEL: str = os.getenv("FMO_LOG_LEVEL", "WARNING")

    # Reproducibility: a fixed constant, never time-based
    DEFAULT_SEED: int = 20120417
    SEED_FROM_ENVIRONMENT: bool = os.getenv("FMO_SEED") is not None
    SEED: int = _env_int("FMO_SEED", DEFAULT_SEED)

    # Network model
    # "descending": Γ₃ belongs to the highest pigment eigenstate, α = N+1 (sink) is the lowest
    RATE_ORDER: str = os.getenv("FMO_RATE_ORDER", "descending")
    SYMMETRY_TOLERANCE: float = 1e-9

    # Quadrature
    QUAD_ABS_TOL: float = _env_float("FMO_QUAD_ABS_TOL", 1e-9)
    QUAD_MAX_INTERVALS: int = _env_int("FMO_QUAD_MAX_INTERVALS", 8192)
    QUAD_INITIAL_PIECES: int = 32
    WINDOW_PADDING: float = 20.0
    OVERLAP_CLAMP: float = 1e-6

    # Self-consistent frequency
    ROOT_DAMPING: float = 0.5
    ROOT_MAX_ITERATIONS: int = 200
    ROOT_TOLERANCE: float = 1e-8
    ROOT_SCAN_POINTS: int = 4001

    # Spectra output
    SPECTRA_POINTS: int = _env_int("FMO_SPECTRA_POINTS", 2000)

    # Parameter search
    SEARCH_BUDGET: int = _env_int("FMO_SEARCH_BUDGET", 10000)
    SEARCH_TOP_K: int = 10
    SEARCH_WORKERS: int = _env_int("FMO_SEARCH_WORKERS", 1)
    REFINE_MAX_EVALUATIONS: int = 2000
    REFINE_DIAMETER: float = 1e-3
    OMEGA8_RANGE: tuple = (-500.0, 0.0)
    GAMMA_RANGE: tuple = (50.0, 90.0)
    H28_RANGE: tuple = (0.0, 600.0)

    # Temperature model
    REFERENCE_TEMPERATURE: float = 77.0

    # Units: 1 cm⁻¹ of reciprocal time is 5.3088 ps (t = 1/(2πc·ω))
    PS_PER_INVERSE_CM: float = 5.3088
    KELVIN_PER_INVERSE_CM: float = 1.4388

    # Optimized parameters of the published FMO fit (cm⁻¹)
    OPTIMUM_RATES: tuple = (59.6, 90.0, 50.3, 59.7, 89.7)
    OPTIMUM_SINK_RATE: float = 50.1
    OPTIMUM_SINK_ENERGY: float = -500.0
    OPTIMUM_SINK_COUPLING: float = 327.0

    # Tests
    RUN_SLOW_TESTS: bool = os.getenv("RUN_SLOW_TESTS", "0") == "1"


# Global settings instance
settings = Settings()
