from .cohorts import Cohort, Individual, Observation, load_cohort, save_cohort  # noqa
from .config import RunConfig  # noqa
from .models import (  # noqa
    CTHMMModel,
    EventSequence,
    FittedModel,
    TransitionModel,
    fit,
    fit_cthmm,
    fit_mixtures,
    load_model,
    save_model,
    viterbi_stage,
)

__version__ = "0.1.0"
__version_info__ = tuple(int(i) for i in __version__.split("."))
