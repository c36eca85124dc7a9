from .cohort import (  # noqa
    Observation,
    Individual,
    Cohort,
    split_folds,
    ablate_features,
)
from .arrays import CohortArrays  # noqa
from .datasets import load_cohort, save_cohort  # noqa
