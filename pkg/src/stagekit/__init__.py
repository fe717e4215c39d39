"""stagekit: staging of symptom-score cohorts with cost-sensitive and
resampling classifiers, repeated cross-validation, genetic hyperparameter
search and out-of-bag feature importance."""

__version__ = "0.1.0"

from .cohort import (  # noqa: E402
    Cohort, CohortError, FoldPlan, GeneratorSpec, generate_synthetic, load_csv, make_folds,
    write_csv,
)
from .registry import ModelSpec, PRESETS, preset  # noqa: E402

__all__ = [
    "Cohort", "CohortError", "FoldPlan", "GeneratorSpec", "ModelSpec", "PRESETS",
    "generate_synthetic", "load_csv", "make_folds", "preset", "write_csv", "__version__",
]
