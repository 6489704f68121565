"""
Configuration module for robexp.

Contains all default constants and environment-driven settings.
"""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Settings read from ROBEXP_* environment variables or a local .env file."""

    model_config = SettingsConfigDict(env_prefix="ROBEXP_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    output_dir: str = "runs"
    seed: int = 0
    jobs: int = 1


settings = Settings()

VERSION = "0.1.0"

# Runtime configuration
LOG_LEVEL = settings.log_level.upper()
OUTPUT_DIR = settings.output_dir
SEED = settings.seed
JOBS = settings.jobs

# PGD attack
PGD_STEP_SIZE = 1.0
PGD_NUM_STEPS = 100
BINSEARCH_ITERS = 12

# Evaluation curves: |S_r| at 5%, 10%, ..., 45% of the features
DEFAULT_FRACTIONS = tuple(round(0.05 * k, 2) for k in range(1, 10))

# Greedy / Greedy-AS
NUM_SUBSET_SAMPLES = 5000
STEP_FRACTION = 0.05
TARGET_FRACTION = 0.45
INCLUSION_PROB = 0.5
RIDGE = 1e-6

# Baseline explainers
IG_STEPS = 50
EG_SAMPLES = 200
EG_BACKGROUND_SIZE = 100

# Sensitivity: top-20% relevant set, radius 0.1
SENS_RADIUS = 0.1
SENS_TOP_FRACTION = 0.2
SENS_SAMPLES = 20

# Scalar reference values swept for Insertion/Deletion
REFERENCE_SWEEP = (0.0, 0.25, 0.5, 0.75, 1.0)

# Training defaults
HIDDEN_SIZES = (32,)
LEARNING_RATE = 0.1
EPOCHS = 30
BATCH_SIZE = 32
L2_PENALTY = 1e-4
TEST_FRACTION = 0.25

# Dataset defaults
DATA_KINDS = ("blobs", "digits8x8")
BLOB_CENTERS = ((0.25, 0.25), (0.75, 0.75))
BLOB_STD = 0.08
