from .sequence import EventSequence  # noqa
from .mixture import (  # noqa
    GaussianParams,
    MixturePair,
    fit_mixtures,
    event_likelihood_pair,
    stage_emission,
)
from .markov import (  # noqa
    TransitionModel,
    Timeline,
    apply_structure_prior,
    event_timeline,
    generator,
    initial_transition,
    sojourn_times,
    transition_over_interval,
)
from .stage_model import StageModel  # noqa
from .inference import (  # noqa
    FitDiagnostics,
    FittedModel,
    PosteriorTables,
    fit,
    forward_backward,
    posterior_tables,
    total_log_likelihood,
    update_transition,
)
from .staging import (  # noqa
    StagePath,
    StagePrediction,
    baseline_stages,
    predict_cohort,
    predict_next_stage,
    stage_cohort,
    viterbi_stage,
)
from .baseline import CTHMMModel, fit_cthmm, stage_cthmm  # noqa
from .storage import load_model, save_model  # noqa
