# config.py

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    """Base configuration class with common settings."""

    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
    DEFAULT_TOL = float(os.getenv("DEFAULT_TOL", "1e-9"))
    DEFAULT_T_END = float(os.getenv("DEFAULT_T_END", "1.0"))
    POSITIVITY_FLOOR = float(os.getenv("POSITIVITY_FLOOR", "1e-12"))
    INTEGRATOR_METHOD = os.getenv("INTEGRATOR_METHOD", "DOP853")
    # verify passes when every error is <= tol * VERIFY_TOL_FACTOR
    VERIFY_TOL_FACTOR = float(os.getenv("VERIFY_TOL_FACTOR", "1e3"))
    RANDOM_SEED = int(os.getenv("RANDOM_SEED", "0"))
    METRICS_ENABLED = os.getenv("METRICS_ENABLED", "true").lower() == "true"


class DevelopmentConfig(Config):
    DEBUG = True
    LOG_LEVEL = os.getenv("LOG_LEVEL", "DEBUG")


class TestingConfig(Config):
    """Configuration for testing."""

    TESTING = True
    LOG_LEVEL = "WARNING"
    # A second registry would clash with the one created by the first app
    METRICS_ENABLED = False


class ProductionConfig(Config):
    LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")


# Dictionary to map string names to config classes
config_by_name = {
    "development": DevelopmentConfig,
    "testing": TestingConfig,
    "production": ProductionConfig,
}


def current_config():
    """Config class selected by QP_RECAST_ENV (default: development)."""
    return config_by_name.get(os.getenv("QP_RECAST_ENV", "development"), DevelopmentConfig)
